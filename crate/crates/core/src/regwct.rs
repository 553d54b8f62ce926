//! Whitening-coloring transform on channel-major latents, with noise
//! regularization, blending and timestep gating.
//!
//! Channel statistics use the unnormalized centered gram `(z − m)(z − m)ᵀ`
//! over the `H·W` spatial positions. Whitening maps a latent onto identity
//! gram; coloring maps identity gram onto the reference gram through
//! `E_c D_c^{1/2} E_cᵀ` and re-centers on the reference mean.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::tensorio::LatentTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegWctConfig {
    /// λ, standard deviation of the additive regularization noise.
    pub lambda: f64,
    /// ω, blend weight of the transformed latent.
    pub omega: f64,
    /// T_start as a fraction of the training horizon.
    pub t_start_frac: f64,
    /// T_end as a fraction of the training horizon.
    pub t_end_frac: f64,
    pub seed: u64,
    /// Eigenvalues below `eig_floor · max eigenvalue` are treated as zero when whitening.
    pub eig_floor: f64,
}

impl Default for RegWctConfig {
    fn default() -> Self {
        Self { lambda: 0.01, omega: 0.5, t_start_frac: 0.8, t_end_frac: 0.6, seed: 0, eig_floor: 1e-8 }
    }
}

impl RegWctConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Config(format!("omega must lie in [0, 1], got {}", self.omega)));
        }
        if !(0.0 <= self.t_end_frac && self.t_end_frac < self.t_start_frac && self.t_start_frac <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= t_end_frac < t_start_frac <= 1, got t_end_frac={} t_start_frac={}",
                self.t_end_frac, self.t_start_frac
            )));
        }
        if !(self.eig_floor > 0.0 && self.eig_floor.is_finite()) {
            return Err(Error::Config(format!("eig_floor must be finite and > 0, got {}", self.eig_floor)));
        }
        Ok(())
    }
}

/// Per-channel spatial mean and unnormalized centered gram.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMoments {
    pub mean: Array1<f64>,
    pub gram: Array2<f64>,
}

pub fn channel_moments(z: &LatentTensor) -> ChannelMoments {
    let m = z.as_matrix();
    let mean = m.mean_axis(Axis(1)).expect("latent has at least two positions");
    let centered = &m - &mean.view().insert_axis(Axis(1));
    let gram = centered.dot(&centered.t());
    ChannelMoments { mean, gram }
}

fn centered(z: &LatentTensor, mean: &Array1<f64>) -> Array2<f64> {
    &z.as_matrix() - &mean.view().insert_axis(Axis(1))
}

/// Largest gram eigenvalue that is still indistinguishable from round-off in
/// the centering step.
fn roundoff_gram_level(z: ArrayView2<'_, f64>) -> f64 {
    let scale = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let per_entry = 64.0 * f64::EPSILON * scale;
    z.ncols() as f64 * per_entry * per_entry
}

/// `E · diag(f(d)) · Eᵀ`
fn spectral_map(values: &Array1<f64>, vectors: &Array2<f64>, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let mapped = values.mapv(f);
    (vectors * &mapped.view().insert_axis(Axis(0))).dot(&vectors.t())
}

/// Decorrelates channels: `E D^{−1/2} Eᵀ (z − m)`.
pub fn whiten(z: &LatentTensor, config: &RegWctConfig) -> Result<LatentTensor> {
    let moments = channel_moments(z);
    let (values, vectors) = sym_eigen(moments.gram.view())?;
    let d_max = values[0];
    if d_max <= roundoff_gram_level(z.as_matrix()) {
        return Err(Error::Degenerate("latent has zero channel variance; whitening is undefined".into()));
    }
    let cutoff = config.eig_floor * d_max;
    let whitening = spectral_map(&values, &vectors, |d| if d > cutoff { d.powf(-0.5) } else { 0.0 });
    let out = whitening.dot(&centered(z, &moments.mean));
    LatentTensor::from_matrix(out, z.height(), z.width())
}

/// Imposes the reference's channel gram and mean: `E_c D_c^{1/2} E_cᵀ ẑ + m_c`.
pub fn color(z_white: &LatentTensor, reference: &LatentTensor, _config: &RegWctConfig) -> Result<LatentTensor> {
    if z_white.channels() != reference.channels() {
        return Err(Error::Dimension(format!(
            "latent has {} channels, reference has {}",
            z_white.channels(),
            reference.channels()
        )));
    }
    let moments = channel_moments(reference);
    let (values, vectors) = sym_eigen(moments.gram.view())?;
    if values[0] <= roundoff_gram_level(reference.as_matrix()) {
        return Err(Error::DegenerateReference("reference latent has zero channel variance".into()));
    }
    let coloring = spectral_map(&values, &vectors, |d| d.max(0.0).sqrt());
    let out = coloring.dot(&z_white.as_matrix()) + &moments.mean.view().insert_axis(Axis(1));
    LatentTensor::from_matrix(out, z_white.height(), z_white.width())
}

pub fn wct(z: &LatentTensor, reference: &LatentTensor, config: &RegWctConfig) -> Result<LatentTensor> {
    if z.channels() != reference.channels() {
        return Err(Error::Dimension(format!(
            "latent has {} channels, reference has {}",
            z.channels(),
            reference.channels()
        )));
    }
    color(&whiten(z, config)?, reference, config)
}

/// WCT followed by `λ·δ`, `δ` i.i.d. standard normal drawn in C order from `rng`.
///
/// With `λ = 0` nothing is drawn and the WCT output is returned untouched.
pub fn reg_wct<R: Rng + ?Sized>(
    z: &LatentTensor,
    reference: &LatentTensor,
    config: &RegWctConfig,
    rng: &mut R,
) -> Result<LatentTensor> {
    config.validate()?;
    let mut out = wct(z, reference, config)?;
    if config.lambda > 0.0 {
        let lambda = config.lambda;
        out.as_matrix_mut().iter_mut().for_each(|v| *v += lambda * rng.sample::<f64, _>(StandardNormal));
    }
    Ok(out)
}

fn snap_to_integer(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Whether timestep `t` of a `total`-step horizon lies in `[t_end_frac, t_start_frac]`.
///
/// Boundaries that land within round-off of an integer step are snapped to it,
/// so `0.6 · 1000` is exactly step 600.
pub fn gate_open(t: usize, total: usize, config: &RegWctConfig) -> bool {
    if total == 0 {
        return false;
    }
    let lo = snap_to_integer(config.t_end_frac * total as f64);
    let hi = snap_to_integer(config.t_start_frac * total as f64);
    let t = t as f64;
    lo <= t && t <= hi
}

/// Whether [`blend_step`] would apply the transform (gate open and `ω > 0`).
pub fn fires(t: usize, total: usize, config: &RegWctConfig) -> bool {
    config.omega > 0.0 && gate_open(t, total, config)
}

/// `(1 − ω)·z' + ω·RegWCT(z')` inside the gate, `z'` unchanged outside it.
pub fn blend_step<R: Rng + ?Sized>(
    z_prime: &LatentTensor,
    reference: &LatentTensor,
    t: usize,
    total: usize,
    config: &RegWctConfig,
    rng: &mut R,
) -> Result<LatentTensor> {
    config.validate()?;
    if t > total {
        return Err(Error::Domain(format!("timestep {t} exceeds horizon {total}")));
    }
    if !fires(t, total, config) {
        return Ok(z_prime.clone());
    }
    blend(z_prime, reference, config, rng)
}

/// `(1 − ω)·z' + ω·RegWCT(z')` without timestep gating.
pub fn blend<R: Rng + ?Sized>(
    z_prime: &LatentTensor,
    reference: &LatentTensor,
    config: &RegWctConfig,
    rng: &mut R,
) -> Result<LatentTensor> {
    config.validate()?;
    if config.omega == 0.0 {
        return Ok(z_prime.clone());
    }
    let transformed = reg_wct(z_prime, reference, config, rng)?;
    if config.omega == 1.0 {
        return Ok(transformed);
    }
    let omega = config.omega;
    let mixed = z_prime.data() * (1.0 - omega) + transformed.data() * omega;
    LatentTensor::new(mixed)
}
