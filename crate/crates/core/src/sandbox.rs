//! Closed-form Gaussian diffusion sandbox.
//!
//! Every spatial position of the clean latent carries an i.i.d. channel vector
//! `x ~ N(μ, Σ0)`. For such data the MMSE noise predictor is linear:
//!
//! ```text
//! Σ_t = ᾱ_t Σ0 + (1 − ᾱ_t) I
//! ε̂(z_t) = sqrt(1 − ᾱ_t) · Σ_t⁻¹ (z_t − sqrt(ᾱ_t) μ)
//! ```
//!
//! so full deterministic DDIM trajectories run without any learned model. The
//! RegWCT hook is applied to the latent produced by each DDIM update, before
//! the next predictor call, against a reference latent obtained by q-sampling
//! one fixed draw from `N(ref_mean, ref_cov)` with one fixed noise field.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, is_symmetric, spd_inverse};
use crate::metrics::{covariance_gap_to, high_radius_bins, latent_spectrum, spectrum_gap_range, SpectrumProfile};
use crate::regwct::{blend_step, fires, RegWctConfig};
use crate::tensorio::LatentTensor;

/// Fractions of the training horizon at which spectra are recorded; `0` is the final sample.
pub const CHECKPOINT_FRACTIONS: [f64; 5] = [0.8, 0.6, 0.4, 0.2, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub t_train: usize,
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub data_mean: Vec<f64>,
    /// Σ0, channel covariance of the clean data.
    pub data_cov: Vec<Vec<f64>>,
    pub ref_mean: Vec<f64>,
    pub ref_cov: Vec<Vec<f64>>,
    pub seed: u64,
    pub regwct: RegWctConfig,
}

impl Default for SimConfig {
    /// Four channels on a 16x16 grid, 50 DDIM steps over a 1000-step linear schedule.
    ///
    /// The data are isotropic with variance 100; the reference is a strongly
    /// correlated `50 · 0.9^|i−j|` (condition number ≈ 57). The variance scale
    /// matters: at the gate's lower edge `ᾱ ≈ 0.026`, and a reference whose
    /// signal is small next to unit noise there carries almost no covariance
    /// information for the transform to impose.
    fn default() -> Self {
        let c = 4;
        let data_cov = (0..c).map(|i| (0..c).map(|j| if i == j { 100.0 } else { 0.0 }).collect()).collect();
        let ref_cov = (0..c)
            .map(|i| (0..c).map(|j| 50.0 * 0.9f64.powi((i as i32 - j as i32).abs())).collect())
            .collect();
        Self {
            channels: c,
            height: 16,
            width: 16,
            t_train: 1000,
            steps: 50,
            beta_min: 1e-4,
            beta_max: 0.02,
            data_mean: vec![0.0; c],
            data_cov,
            ref_mean: vec![0.0; c],
            ref_cov,
            seed: 0,
            regwct: RegWctConfig::default(),
        }
    }
}

fn to_matrix(rows: &[Vec<f64>], c: usize, what: &str) -> Result<Array2<f64>> {
    if rows.len() != c || rows.iter().any(|r| r.len() != c) {
        return Err(Error::Config(format!("{what} must be {c}x{c}")));
    }
    let m = Array2::from_shape_fn((c, c), |(i, j)| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} has non-finite entries")));
    }
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !is_symmetric(m.view(), 1e-12 * scale.max(1.0)) {
        return Err(Error::Config(format!("{what} is not symmetric")));
    }
    Ok(m)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        if c == 0 || self.height * self.width < 2 {
            return Err(Error::Config("need channels >= 1 and height*width >= 2".into()));
        }
        if self.steps == 0 || self.steps > self.t_train {
            return Err(Error::Config(format!("steps must lie in 1..={}, got {}", self.t_train, self.steps)));
        }
        if !(0.0 < self.beta_min && self.beta_min <= self.beta_max && self.beta_max < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < beta_min <= beta_max < 1, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        if self.data_mean.len() != c || self.ref_mean.len() != c {
            return Err(Error::Config(format!("means must have {c} entries")));
        }
        for (what, rows) in [("data_cov", &self.data_cov), ("ref_cov", &self.ref_cov)] {
            let m = to_matrix(rows, c, what)?;
            cholesky_lower(m.view()).map_err(|_| Error::Config(format!("{what} is not positive definite")))?;
        }
        self.regwct.validate()
    }
}

/// Noise schedule and the descending DDIM timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alpha_bar: Vec<f64>,
    pub timesteps: Vec<usize>,
}

pub fn make_schedule(config: &SimConfig) -> Result<Schedule> {
    let t = config.t_train;
    let span = (t.max(2) - 1) as f64;
    let mut alpha_bar = Vec::with_capacity(t);
    let mut acc = 1.0;
    for i in 0..t {
        let beta = config.beta_min + (config.beta_max - config.beta_min) * i as f64 / span;
        acc *= 1.0 - beta;
        alpha_bar.push(acc);
    }
    if !alpha_bar.last().is_some_and(|&a| a > 0.0 && a < 1.0) {
        return Err(Error::Config("schedule must end with alpha_bar in (0, 1)".into()));
    }
    let timesteps = (0..config.steps).map(|i| i * t / config.steps).rev().collect();
    Ok(Schedule { alpha_bar, timesteps })
}

/// `mean + L·n` at every position, with `n` standard normal drawn channel-fastest per position.
fn sample_gaussian<R: Rng + ?Sized>(
    mean: &Array1<f64>,
    chol: &Array2<f64>,
    height: usize,
    width: usize,
    rng: &mut R,
) -> Result<LatentTensor> {
    let c = mean.len();
    let n = height * width;
    let white = Array2::from_shape_fn((n, c), |_| rng.sample::<f64, _>(StandardNormal));
    let samples = chol.dot(&white.t()) + &mean.view().insert_axis(Axis(1));
    LatentTensor::from_matrix(samples, height, width)
}

fn standard_normal_latent<R: Rng + ?Sized>(c: usize, h: usize, w: usize, rng: &mut R) -> Result<LatentTensor> {
    LatentTensor::new(Array3::from_shape_fn((c, h, w), |_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn sample_data<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<LatentTensor> {
    let cov = to_matrix(&config.data_cov, config.channels, "data_cov")?;
    let chol = cholesky_lower(cov.view())?;
    sample_gaussian(&Array1::from(config.data_mean.clone()), &chol, config.height, config.width, rng)
}

/// Spectrum of the latent at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// DDIM timestep of the recorded latent; `0` is the final sample.
    pub step: usize,
    pub profile: SpectrumProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub final_sample: LatentTensor,
    pub cov_distance_to_ref: f64,
    pub cov_distance_to_data: f64,
    pub spectrum_profiles: Vec<Checkpoint>,
    /// Timesteps whose latent went through the RegWCT blend.
    pub gated_steps: Vec<usize>,
}

/// A validated configuration with its schedule and factorizations.
#[derive(Debug, Clone)]
pub struct Sandbox {
    config: SimConfig,
    schedule: Schedule,
    data_mean: Array1<f64>,
    data_cov: Array2<f64>,
    ref_mean: Array1<f64>,
    ref_cov: Array2<f64>,
    ref_chol: Array2<f64>,
}

impl Sandbox {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let data_cov = to_matrix(&config.data_cov, c, "data_cov")?;
        let ref_cov = to_matrix(&config.ref_cov, c, "ref_cov")?;
        Ok(Self {
            schedule: make_schedule(&config)?,
            data_mean: Array1::from(config.data_mean.clone()),
            ref_mean: Array1::from(config.ref_mean.clone()),
            ref_chol: cholesky_lower(ref_cov.view())?,
            data_cov,
            ref_cov,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.schedule
            .alpha_bar
            .get(t)
            .copied()
            .ok_or_else(|| Error::Domain(format!("timestep {t} outside 0..{}", self.config.t_train)))
    }

    /// Optimal noise prediction for Gaussian data at timestep `t`.
    pub fn exact_eps(&self, z: &LatentTensor, t: usize) -> Result<LatentTensor> {
        if z.channels() != self.config.channels {
            return Err(Error::Dimension(format!("latent has {} channels, sandbox {}", z.channels(), self.config.channels)));
        }
        let ab = self.alpha_bar(t)?;
        let c = self.config.channels;
        let sigma_t = &self.data_cov * ab + Array2::<f64>::eye(c) * (1.0 - ab);
        let precision = spd_inverse(sigma_t.view())?;
        let offset = &self.data_mean * ab.sqrt();
        let centered = &z.as_matrix() - &offset.view().insert_axis(Axis(1));
        let eps = precision.dot(&centered) * (1.0 - ab).sqrt();
        LatentTensor::from_matrix(eps, z.height(), z.width())
    }

    /// Deterministic DDIM update from `ᾱ_t` to `ᾱ_prev`.
    pub fn ddim_update(z: &LatentTensor, eps: &LatentTensor, alpha_bar: f64, alpha_bar_prev: f64) -> Result<LatentTensor> {
        let x0 = (z.data() - &(eps.data() * (1.0 - alpha_bar).sqrt())) / alpha_bar.sqrt();
        let next = x0 * alpha_bar_prev.sqrt() + eps.data() * (1.0 - alpha_bar_prev).sqrt();
        LatentTensor::new(next)
    }

    fn checkpoint_steps(&self) -> Vec<usize> {
        let t = self.config.t_train as f64;
        let candidates = &self.schedule.timesteps[1..];
        CHECKPOINT_FRACTIONS
            .iter()
            .filter(|&&f| f > 0.0)
            .filter_map(|&f| {
                let target = f * t;
                candidates
                    .iter()
                    .copied()
                    .min_by(|&a, &b| (a as f64 - target).abs().total_cmp(&(b as f64 - target).abs()).then(b.cmp(&a)))
            })
            .collect()
    }

    /// Runs one full DDIM trajectory with the RegWCT hook configured by `regwct`.
    ///
    /// The generator is consumed in a fixed order: initial noise, reference
    /// sample, reference noise, then regularization noise at each gated step.
    pub fn run(&self, seed: u64, regwct: &RegWctConfig) -> Result<TrajectoryReport> {
        regwct.validate()?;
        let (c, h, w) = (self.config.channels, self.config.height, self.config.width);
        let total = self.config.t_train;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut z = standard_normal_latent(c, h, w, &mut rng)?;
        let reference = sample_gaussian(&self.ref_mean, &self.ref_chol, h, w, &mut rng)?;
        let reference_noise = standard_normal_latent(c, h, w, &mut rng)?;

        let checkpoints = self.checkpoint_steps();
        let mut profiles = Vec::with_capacity(CHECKPOINT_FRACTIONS.len());
        let mut gated = Vec::new();
        let timesteps = &self.schedule.timesteps;

        for (i, &t) in timesteps.iter().enumerate() {
            let eps = self.exact_eps(&z, t)?;
            let prev = timesteps.get(i + 1).copied();
            let ab_prev = match prev {
                Some(p) => self.alpha_bar(p)?,
                None => 1.0,
            };
            z = Self::ddim_update(&z, &eps, self.alpha_bar(t)?, ab_prev)?;

            let Some(p) = prev else { continue };
            if fires(p, total, regwct) {
                let noised_ref = reference.data() * ab_prev.sqrt() + reference_noise.data() * (1.0 - ab_prev).sqrt();
                let noised_ref = LatentTensor::new(noised_ref)?;
                z = blend_step(&z, &noised_ref, p, total, regwct, &mut rng)?;
                gated.push(p);
            }
            if checkpoints.contains(&p) {
                profiles.push(Checkpoint { step: p, profile: latent_spectrum(&z)? });
            }
        }
        profiles.push(Checkpoint { step: 0, profile: latent_spectrum(&z)? });

        Ok(TrajectoryReport {
            cov_distance_to_ref: covariance_gap_to(&z, self.ref_cov.view())?,
            cov_distance_to_data: covariance_gap_to(&z, self.data_cov.view())?,
            final_sample: z,
            spectrum_profiles: profiles,
            gated_steps: gated,
        })
    }

    /// Runs one trajectory per seed in parallel; results are in seed order.
    pub fn run_seeds(&self, seeds: &[u64], regwct: &RegWctConfig) -> Result<Vec<TrajectoryReport>> {
        seeds.par_iter().map(|&s| self.run(s, regwct)).collect()
    }
}

pub fn exact_eps(z: &LatentTensor, t: usize, config: &SimConfig) -> Result<LatentTensor> {
    Sandbox::new(config.clone())?.exact_eps(z, t)
}

/// One trajectory with `config.seed` and `config.regwct`.
pub fn run_trajectory(config: &SimConfig) -> Result<TrajectoryReport> {
    let sandbox = Sandbox::new(config.clone())?;
    sandbox.run(config.seed, &config.regwct)
}

/// An experiment arm: the base RegWCT configuration with ω and λ overridden.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arm {
    pub name: String,
    pub omega: f64,
    pub lambda: f64,
}

impl Arm {
    pub fn new(name: &str, omega: f64, lambda: f64) -> Self {
        Self { name: name.to_string(), omega, lambda }
    }

    pub fn regwct(&self, base: &RegWctConfig) -> RegWctConfig {
        RegWctConfig { omega: self.omega, lambda: self.lambda, ..*base }
    }

    /// Control (ω = 0), plain WCT (λ = 0) and RegWCT arms for a base configuration.
    pub fn standard(base: &RegWctConfig) -> [Arm; 3] {
        [
            Arm::new("control", 0.0, 0.0),
            Arm::new("wct", base.omega, 0.0),
            Arm::new("regwct", base.omega, base.lambda),
        ]
    }
}

pub fn mean_cov_to_ref(reports: &[TrajectoryReport]) -> f64 {
    reports.iter().map(|r| r.cov_distance_to_ref).sum::<f64>() / reports.len().max(1) as f64
}

pub fn mean_cov_to_data(reports: &[TrajectoryReport]) -> f64 {
    reports.iter().map(|r| r.cov_distance_to_data).sum::<f64>() / reports.len().max(1) as f64
}

/// Mean high-radius spectrum gap between paired reports, over seeds and checkpoints.
pub fn mean_high_radius_gap(arm: &[TrajectoryReport], control: &[TrajectoryReport]) -> Result<f64> {
    if arm.len() != control.len() || arm.is_empty() {
        return Err(Error::Dimension(format!("{} arm runs vs {} control runs", arm.len(), control.len())));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, b) in arm.iter().zip(control) {
        if a.spectrum_profiles.len() != b.spectrum_profiles.len() {
            return Err(Error::Dimension("runs recorded different checkpoints".into()));
        }
        for (pa, pb) in a.spectrum_profiles.iter().zip(&b.spectrum_profiles) {
            total += spectrum_gap_range(&pa.profile, &pb.profile, high_radius_bins(pa.profile.len()))?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub const CSV_HEADER: &str = "step,radius,power";

pub fn write_report_csv<W: Write>(report: &TrajectoryReport, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for cp in &report.spectrum_profiles {
        for (r, p) in cp.profile.radial_bins.iter().enumerate() {
            writeln!(out, "{},{r},{p}", cp.step)?;
        }
    }
    Ok(())
}

pub fn report_to_csv(report: &TrajectoryReport, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_report_csv(report, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn report_summary_json(report: &TrajectoryReport) -> serde_json::Value {
    serde_json::json!({
        "cov_to_ref": report.cov_distance_to_ref,
        "cov_to_data": report.cov_distance_to_data,
        "gated_steps": report.gated_steps,
    })
}
