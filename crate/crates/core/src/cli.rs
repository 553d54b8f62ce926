//! Command line front-end for the `sadis` binary.
//!
//! Results go to standard output as one JSON object per line (or `key value`
//! lines with `--pretty`); diagnostics go to standard error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Ix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::cte::{self, CteConfig};
use crate::error::{Error, Result};
use crate::imageops::{average_gray, gray_to_rgb, grayscale};
use crate::metrics::{
    chist_distance, covariance_distance, high_radius_bins, latent_spectrum, radial_spectrum, spectrum_gap,
    spectrum_gap_range, swd_color_distance, SpectrumProfile, SwdConfig,
};
use crate::regwct::{blend, blend_step, fires, RegWctConfig};
use crate::sandbox::{self, Arm, Sandbox, SimConfig};
use crate::tensorio::{read_image, read_npy_typed, write_image, Embedding, LatentTensor, Precision};

pub const SEED_ENV: &str = "SADIS_SEED";

#[derive(Debug, Parser)]
#[command(name = "sadis", version, about = "Color/texture disentanglement operations on embeddings, images and latents")]
pub struct Cli {
    /// Print human-readable `key value` lines instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embedding arithmetic on (n_t, c) NPY token matrices.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Grayscale conversions of PNG/PPM images.
    #[command(subcommand)]
    Image(ImageCommand),
    /// Blend a (C,H,W) latent with its RegWCT transform toward a reference latent.
    Wct(WctArgs),
    /// Color and frequency metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Run the Gaussian diffusion sandbox for the control, wct and regwct arms.
    #[command(long_about = "Run the Gaussian diffusion sandbox for the control (ω = 0), wct (λ = 0) and regwct arms.\n\n\
        The config file is TOML; flat `key = value` lines work too, with dotted keys for the nested table. \
        Relevant keys: regwct.omega (ω), regwct.lambda (λ), regwct.t_start_frac (T_start as a fraction of T), \
        regwct.t_end_frac (T_end as a fraction of T), t_train (T), steps, data_cov (Σ0), ref_cov, seed.")]
    Sim(SimArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output NPY path.
    #[arg(long)]
    pub out: PathBuf,
    /// Stored precision, f32 or f64. Defaults to the precision of the first input.
    #[arg(long)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Subcommand)]
pub enum EmbedCommand {
    /// Color embedding: color_scale · (E(color image) − E(grayscale image)).
    ColorExtract {
        /// Tokens of the color image.
        #[arg(long)]
        color: PathBuf,
        /// Tokens of its grayscale version.
        #[arg(long)]
        gray: PathBuf,
        /// Scalar gain on the color difference.
        #[arg(long, default_value_t = 1.0)]
        color_scale: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Texture embedding: singular-value reweighting of [gray texture; average gray].
    TextureExtract {
        /// Tokens of the grayscale style image.
        #[arg(long)]
        gray_texture: PathBuf,
        /// Tokens of the average-gray image.
        #[arg(long)]
        avg_gray: PathBuf,
        /// γ: exponential damping rate, σ̂ = β·exp(−γσ)·σ.
        #[arg(long, default_value_t = 0.003)]
        gamma: f64,
        /// β: singular value gain.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Style condition: texture tokens followed by color tokens.
    Combine {
        #[arg(long)]
        texture: PathBuf,
        #[arg(long)]
        color: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum ImageCommand {
    /// BT.601 luma, replicated to three channels.
    Gs {
        #[arg(long)]
        input: PathBuf,
        /// Output image; the extension selects PNG or PPM.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grayscale, then every pixel set to the mean gray level.
    Avg {
        #[arg(long)]
        input: PathBuf,
        /// Output image; the extension selects PNG or PPM.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct WctArgs {
    /// Content latent z', NPY shaped (C,H,W).
    #[arg(long)]
    pub latent: PathBuf,
    /// Reference latent z^c, NPY shaped (C,H',W') with the same C.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// ω: blend weight, z = (1 − ω)·z' + ω·RegWCT(z').
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    /// λ: standard deviation of the regularization noise added after WCT.
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Seed for the regularization noise. Falls back to SADIS_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the regularization noise (λ = 0).
    #[arg(long)]
    pub no_noise: bool,
    /// Current timestep t; with --T the blend only applies when t/T ∈ [T_end, T_start].
    #[arg(long = "t", requires = "total")]
    pub t: Option<usize>,
    /// Training horizon T.
    #[arg(long = "T", id = "total", requires = "t")]
    pub total: Option<usize>,
    /// T_start as a fraction of T (upper gate edge).
    #[arg(long, default_value_t = 0.8)]
    pub t_start: f64,
    /// T_end as a fraction of T (lower gate edge).
    #[arg(long, default_value_t = 0.6)]
    pub t_end: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// Summed per-channel Bhattacharyya histogram distance between two images.
    Chist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = crate::metrics::DEFAULT_BINS)]
        bins: usize,
    },
    /// Sliced Wasserstein distance between RGB pixel clouds over a 2x pyramid.
    Swd {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 64)]
        projections: usize,
        #[arg(long, default_value_t = 3)]
        scales: usize,
        /// Seed for the projection directions. Falls back to SADIS_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Relative Frobenius distance between channel covariances of two (C,H,W) latents.
    Covdist { a: PathBuf, b: PathBuf },
    /// Radially binned power spectrum of a (H,W) array or channel-averaged (C,H,W) latent.
    Spectrum {
        input: PathBuf,
        /// CSV output with columns radius,power.
        #[arg(long)]
        out: PathBuf,
        /// Second array; adds log-spectrum gaps to the printed summary.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// SimConfig file (TOML or flat key = value). Built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of seeded trajectories per arm.
    #[arg(long, default_value_t = 16)]
    pub seeds: u64,
    /// Base seed, overriding the config. Falls back to SADIS_SEED, then the config value.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// `--seed`, else `SADIS_SEED`, else 0 with a notice on standard error.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = env_seed()? {
        return Ok(seed);
    }
    eprintln!("note: no --seed given and {SEED_ENV} unset; using seed 0");
    Ok(0)
}

/// Rounds to 9 significant digits for display.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn rounded(value: Value) -> Value {
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            n.as_f64().map(|x| json!(round_sig9(x))).unwrap_or(Value::Number(n))
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn emit(out: &mut dyn Write, pretty: bool, value: Value) -> Result<()> {
    let value = rounded(value);
    if pretty {
        if let Value::Object(map) = &value {
            let width = map.keys().map(String::len).max().unwrap_or(0);
            for (k, v) in map {
                writeln!(out, "{k:<width$}  {v}")?;
            }
            return Ok(());
        }
    }
    writeln!(out, "{value}")?;
    Ok(())
}

fn load_embedding(path: &Path) -> Result<(Embedding, Precision)> {
    let (arr, precision) = read_npy_typed(path)?;
    Ok((Embedding::from_dyn(arr)?, precision))
}

fn load_latent(path: &Path) -> Result<(LatentTensor, Precision)> {
    let (arr, precision) = read_npy_typed(path)?;
    Ok((LatentTensor::from_dyn(arr)?, precision))
}

fn write_embedding(e: &Embedding, output: &OutputArgs, input_precision: Precision) -> Result<()> {
    e.write(&output.out, output.precision.unwrap_or(input_precision))
}

/// Runs a parsed invocation, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let value = match &cli.command {
        Command::Embed(cmd) => run_embed(cmd)?,
        Command::Image(cmd) => run_image(cmd)?,
        Command::Wct(args) => run_wct(args)?,
        Command::Metrics(cmd) => run_metrics(cmd)?,
        Command::Sim(args) => run_sim(args)?,
    };
    emit(out, cli.pretty, value)
}

fn run_embed(cmd: &EmbedCommand) -> Result<Value> {
    match cmd {
        EmbedCommand::ColorExtract { color, gray, color_scale, output } => {
            let (ec, precision) = load_embedding(color)?;
            let (eg, _) = load_embedding(gray)?;
            let cfg = CteConfig { color_scale: *color_scale, ..Default::default() };
            let result = cte::extract_color_embedding(&ec, &eg, &cfg)?;
            write_embedding(&result, output, precision)?;
            Ok(json!({"op": "color-extract", "shape": [result.n_tokens(), result.width()], "norm": result.frobenius_norm()}))
        }
        EmbedCommand::TextureExtract { gray_texture, avg_gray, gamma, beta, output } => {
            let (tx, precision) = load_embedding(gray_texture)?;
            let (avg, _) = load_embedding(avg_gray)?;
            let cfg = CteConfig { gamma: *gamma, beta: *beta, ..Default::default() };
            let result = cte::extract_texture_embedding(&tx, &avg, &cfg)?;
            write_embedding(&result, output, precision)?;
            Ok(json!({
                "op": "texture-extract",
                "shape": [result.n_tokens(), result.width()],
                "norm": result.frobenius_norm(),
                "input_norm": tx.frobenius_norm(),
            }))
        }
        EmbedCommand::Combine { texture, color, output } => {
            let (tx, precision) = load_embedding(texture)?;
            let (clr, _) = load_embedding(color)?;
            let cond = cte::combine(&tx, &clr)?;
            write_embedding(cond.tokens(), output, precision)?;
            let t = cond.tokens();
            Ok(json!({"op": "combine", "shape": [t.n_tokens(), t.width()], "n_tokens": cond.n_tokens(), "norm": t.frobenius_norm()}))
        }
    }
}

fn run_image(cmd: &ImageCommand) -> Result<Value> {
    let (op, input, out) = match cmd {
        ImageCommand::Gs { input, out } => ("gs", input, out),
        ImageCommand::Avg { input, out } => ("avg", input, out),
    };
    let image = read_image(input)?;
    let mut gray = grayscale(&image);
    if op == "avg" {
        gray = average_gray(&gray);
    }
    write_image(out, &gray_to_rgb(&gray))?;
    let (h, w) = gray.dim();
    Ok(json!({"op": op, "height": h, "width": w, "mean": gray.mean()}))
}

fn run_wct(args: &WctArgs) -> Result<Value> {
    let (latent, precision) = load_latent(&args.latent)?;
    let (reference, _) = load_latent(&args.reference)?;
    let seed = resolve_seed(args.seed)?;
    let cfg = RegWctConfig {
        omega: args.omega,
        lambda: if args.no_noise { 0.0 } else { args.lambda },
        t_start_frac: args.t_start,
        t_end_frac: args.t_end,
        seed,
        ..Default::default()
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (result, applied) = match (args.t, args.total) {
        (Some(t), Some(total)) => (blend_step(&latent, &reference, t, total, &cfg, &mut rng)?, fires(t, total, &cfg)),
        _ => (blend(&latent, &reference, &cfg, &mut rng)?, cfg.omega > 0.0),
    };
    result.write(&args.output.out, args.output.precision.unwrap_or(precision))?;
    Ok(json!({
        "op": "wct",
        "applied": applied,
        "shape": [result.channels(), result.height(), result.width()],
        "omega": cfg.omega,
        "lambda": cfg.lambda,
        "seed": seed,
    }))
}

/// A (H,W) array or a (C,H,W) latent, reduced to its radial profile.
fn load_profile(path: &Path) -> Result<SpectrumProfile> {
    let (arr, _) = read_npy_typed(path)?;
    match arr.ndim() {
        2 => radial_spectrum(arr.into_dimensionality::<Ix2>().expect("rank checked").view()),
        3 => latent_spectrum(&LatentTensor::from_dyn(arr)?),
        n => Err(Error::Shape(format!("spectrum input must be rank 2 or 3, got rank {n}"))),
    }
}

fn run_metrics(cmd: &MetricsCommand) -> Result<Value> {
    match cmd {
        MetricsCommand::Chist { a, b, bins } => {
            let d = chist_distance(&read_image(a)?, &read_image(b)?, *bins)?;
            Ok(json!({"chist": d}))
        }
        MetricsCommand::Swd { a, b, projections, scales, seed } => {
            let cfg = SwdConfig { projections: *projections, scales: *scales, seed: resolve_seed(*seed)? };
            let d = swd_color_distance(&read_image(a)?, &read_image(b)?, &cfg)?;
            Ok(json!({"swd": d}))
        }
        MetricsCommand::Covdist { a, b } => {
            let d = covariance_distance(&load_latent(a)?.0, &load_latent(b)?.0)?;
            Ok(json!({"covdist": d}))
        }
        MetricsCommand::Spectrum { input, out, reference } => {
            let profile = load_profile(input)?;
            let mut csv = String::from("radius,power\n");
            for (r, p) in profile.radial_bins.iter().enumerate() {
                csv.push_str(&format!("{r},{p}\n"));
            }
            fs::write(out, csv)?;
            let mut summary = Map::new();
            summary.insert("bins".into(), json!(profile.len()));
            summary.insert("max_radius".into(), json!(profile.max_radius()));
            if let Some(reference) = reference {
                let other = load_profile(reference)?;
                summary.insert("gap".into(), json!(spectrum_gap(&profile, &other)?));
                let high = high_radius_bins(profile.len());
                summary.insert("high_radius_gap".into(), json!(spectrum_gap_range(&profile, &other, high)?));
            }
            Ok(Value::Object(summary))
        }
    }
}

fn run_sim(args: &SimArgs) -> Result<Value> {
    let mut config = match &args.config {
        Some(path) => SimConfig::from_file(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed.map(Some).map_or_else(env_seed, Ok)? {
        config.seed = seed;
    }
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let sandbox = Sandbox::new(config.clone())?;
    let seeds: Vec<u64> = (0..args.seeds).map(|k| config.seed.wrapping_add(k)).collect();

    let mut arm_summaries = Map::new();
    let mut runs = Vec::new();
    for arm in Arm::standard(&config.regwct) {
        let reports = sandbox.run_seeds(&seeds, &arm.regwct(&config.regwct))?;
        let dir = args.out_dir.join(&arm.name);
        fs::create_dir_all(&dir)?;
        let mut per_seed = Vec::with_capacity(seeds.len());
        for (seed, report) in seeds.iter().zip(&reports) {
            sandbox::report_to_csv(report, dir.join(format!("seed_{seed}.csv")))?;
            let mut summary = sandbox::report_summary_json(report);
            summary["seed"] = json!(seed);
            fs::write(dir.join(format!("seed_{seed}.json")), format!("{summary}\n"))?;
            per_seed.push(summary);
        }
        let arm_summary = json!({
            "arm": arm.name,
            "omega": arm.omega,
            "lambda": arm.lambda,
            "seeds": seeds,
            "mean_cov_to_ref": sandbox::mean_cov_to_ref(&reports),
            "mean_cov_to_data": sandbox::mean_cov_to_data(&reports),
            "runs": per_seed,
        });
        fs::write(dir.join("summary.json"), format!("{}\n", serde_json::to_string_pretty(&arm_summary).expect("json")))?;
        arm_summaries.insert(arm.name.clone(), json!({
            "mean_cov_to_ref": arm_summary["mean_cov_to_ref"],
            "mean_cov_to_data": arm_summary["mean_cov_to_data"],
        }));
        runs.push((arm.name, reports));
    }

    let control = &runs[0].1;
    let control_ref = sandbox::mean_cov_to_ref(control);
    let regwct_ref = sandbox::mean_cov_to_ref(&runs[2].1);
    let ratio = regwct_ref / control_ref;
    let top = json!({
        "config": config,
        "seeds": seeds,
        "arms": arm_summaries,
        "regwct_to_control_cov_ratio": ratio,
        "reduction_at_least_half": ratio <= 0.5,
        "high_radius_gap_to_control": {
            "wct": sandbox::mean_high_radius_gap(&runs[1].1, control)?,
            "regwct": sandbox::mean_high_radius_gap(&runs[2].1, control)?,
        },
    });
    fs::write(args.out_dir.join("summary.json"), format!("{}\n", serde_json::to_string_pretty(&top).expect("json")))?;

    Ok(json!({
        "verdict": if ratio <= 0.5 { "pass" } else { "fail" },
        "control_cov_to_ref": control_ref,
        "regwct_cov_to_ref": regwct_ref,
        "ratio": ratio,
        "seeds": args.seeds,
    }))
}
