//! Color and frequency diagnostics.
//!
//! * C-Hist: per-channel Bhattacharyya distance `sqrt(1 − BC)` summed over R, G, B.
//! * Sliced Wasserstein over RGB point clouds, averaged over seeded random
//!   directions and a 2x box pyramid. This is a plain RGB variant; it does not
//!   reproduce any perceptual multi-scale SWD implementation.
//! * Relative Frobenius distance between normalized channel covariances.
//! * Radially binned power spectrum from a direct 2-D DFT.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::imageops::downsample2x;
use crate::tensorio::{LatentTensor, RgbImage};

pub const DEFAULT_BINS: usize = 256;

/// Normalized per-channel histograms of an RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    pub bins_per_channel: usize,
    pub channels: [Vec<f64>; 3],
}

impl HistogramSet {
    pub fn from_image(image: &RgbImage, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Domain(format!("histograms need at least 2 bins, got {bins}")));
        }
        let mut channels = [vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]];
        let n = (image.height() * image.width()) as f64;
        for px in image.iter_pixels() {
            for (hist, v) in channels.iter_mut().zip(px) {
                hist[bin_index(v, bins)] += 1.0;
            }
        }
        for hist in &mut channels {
            hist.iter_mut().for_each(|c| *c /= n);
        }
        Ok(Self { bins_per_channel: bins, channels })
    }
}

/// `min(⌊v·bins⌋, bins − 1)`
pub fn bin_index(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn bhattacharyya_distance(p: &[f64], q: &[f64]) -> f64 {
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    (1.0 - bc).max(0.0).sqrt()
}

/// Summed per-channel Bhattacharyya distance, in `[0, 3]`.
pub fn chist_distance(a: &RgbImage, b: &RgbImage, bins: usize) -> Result<f64> {
    let ha = HistogramSet::from_image(a, bins)?;
    let hb = HistogramSet::from_image(b, bins)?;
    Ok(ha.channels.iter().zip(&hb.channels).map(|(p, q)| bhattacharyya_distance(p, q)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwdConfig {
    pub projections: usize,
    pub scales: usize,
    pub seed: u64,
}

impl Default for SwdConfig {
    fn default() -> Self {
        Self { projections: 64, scales: 3, seed: 0 }
    }
}

/// Seeded unit directions in RGB space (normalized Gaussian draws).
pub fn random_directions(count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            out.push(v.map(|x| x / norm));
        }
    }
    out
}

/// 1-D Wasserstein-1 between two empirical distributions given as sorted samples.
///
/// When sizes differ the larger sample is reduced to the smaller count by
/// taking its values at the mid-quantiles `(j + ½)/k`.
pub fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let k = small.len();
    if k == 0 {
        return 0.0;
    }
    let n = large.len();
    let total: f64 = small
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let idx = if n == k { j } else { ((2 * j + 1) * n / (2 * k)).min(n - 1) };
            (s - large[idx]).abs()
        })
        .sum();
    total / k as f64
}

fn sorted_projection(image: &RgbImage, dir: &[f64; 3]) -> Vec<f64> {
    let mut p: Vec<f64> = image.iter_pixels().map(|px| px[0] * dir[0] + px[1] * dir[1] + px[2] * dir[2]).collect();
    p.sort_by(f64::total_cmp);
    p
}

fn pyramid(image: &RgbImage, scales: usize) -> Result<Vec<RgbImage>> {
    let mut levels = vec![image.clone()];
    for _ in 1..scales {
        let next = downsample2x(levels.last().expect("non-empty")).map_err(|_| {
            Error::Shape(format!(
                "{}x{} image is too small for {scales} pyramid scales",
                image.height(),
                image.width()
            ))
        })?;
        levels.push(next);
    }
    Ok(levels)
}

/// Sliced Wasserstein color distance over explicit directions.
pub fn swd_with_directions(a: &RgbImage, b: &RgbImage, directions: &[[f64; 3]], scales: usize) -> Result<f64> {
    if directions.is_empty() || scales == 0 {
        return Err(Error::Domain("need at least one projection and one scale".into()));
    }
    let (pa, pb) = (pyramid(a, scales)?, pyramid(b, scales)?);
    let mut total = 0.0;
    for (la, lb) in pa.iter().zip(&pb) {
        for dir in directions {
            total += wasserstein1_sorted(&sorted_projection(la, dir), &sorted_projection(lb, dir));
        }
    }
    Ok(total / (directions.len() * scales) as f64)
}

pub fn swd_color_distance(a: &RgbImage, b: &RgbImage, config: &SwdConfig) -> Result<f64> {
    if config.projections == 0 || config.scales == 0 {
        return Err(Error::Domain("need at least one projection and one scale".into()));
    }
    swd_with_directions(a, b, &random_directions(config.projections, config.seed), config.scales)
}

/// `(z − m)(z − m)ᵀ / (HW − 1)`
pub fn normalized_covariance(z: &LatentTensor) -> Array2<f64> {
    let m = z.as_matrix();
    let mean = m.mean_axis(Axis(1)).expect("latent has positions");
    let centered = &m - &mean.insert_axis(Axis(1));
    centered.dot(&centered.t()) / (m.ncols() - 1) as f64
}

/// Relative Frobenius gap `‖cov(z) − target‖ / ‖target‖`.
pub fn covariance_gap_to(z: &LatentTensor, target: ArrayView2<'_, f64>) -> Result<f64> {
    let c = z.channels();
    if target.dim() != (c, c) {
        return Err(Error::Dimension(format!("latent has {c} channels, target is {:?}", target.dim())));
    }
    let denom = target.iter().map(|x| x * x).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateReference("reference covariance is zero".into()));
    }
    let diff = &normalized_covariance(z) - &target;
    Ok(diff.iter().map(|x| x * x).sum::<f64>().sqrt() / denom)
}

pub fn covariance_distance(a: &LatentTensor, b: &LatentTensor) -> Result<f64> {
    if a.channels() != b.channels() {
        return Err(Error::Dimension(format!("{} vs {} channels", a.channels(), b.channels())));
    }
    covariance_gap_to(a, normalized_covariance(b).view())
}

/// Mean power per integer radius band, `max_radius + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumProfile {
    pub radial_bins: Vec<f64>,
}

impl SpectrumProfile {
    pub fn max_radius(&self) -> usize {
        self.radial_bins.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.radial_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radial_bins.is_empty()
    }

    /// Elementwise mean of equally long profiles.
    pub fn mean_of(profiles: &[SpectrumProfile]) -> Result<SpectrumProfile> {
        let first = profiles.first().ok_or_else(|| Error::Domain("no profiles to average".into()))?;
        let mut acc = vec![0.0; first.len()];
        for p in profiles {
            if p.len() != acc.len() {
                return Err(Error::Dimension(format!("profile lengths {} and {}", p.len(), acc.len())));
            }
            acc.iter_mut().zip(&p.radial_bins).for_each(|(a, v)| *a += v);
        }
        let n = profiles.len() as f64;
        Ok(SpectrumProfile { radial_bins: acc.into_iter().map(|v| v / n).collect() })
    }
}

/// Signed frequency index for DFT bin `k` of an `n`-point transform.
fn centered_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// `|F(u, v)|²` by direct separable summation.
pub fn power_spectrum(z: ArrayView2<'_, f64>) -> Array2<f64> {
    let (h, w) = z.dim();
    let twiddles = |n: usize| {
        Array2::from_shape_fn((n, n), |(k, x)| {
            let phase = -2.0 * PI * ((k * x) % n) as f64 / n as f64;
            (phase.cos(), phase.sin())
        })
    };
    let (th, tw) = (twiddles(h), twiddles(w));

    // transform along rows, then columns
    let mut re = Array2::<f64>::zeros((h, w));
    let mut im = Array2::<f64>::zeros((h, w));
    for y in 0..h {
        for v in 0..w {
            let (mut sr, mut si) = (0.0, 0.0);
            for x in 0..w {
                let (c, s) = tw[[v, x]];
                sr += z[[y, x]] * c;
                si += z[[y, x]] * s;
            }
            re[[y, v]] = sr;
            im[[y, v]] = si;
        }
    }
    let mut power = Array2::<f64>::zeros((h, w));
    for u in 0..h {
        for v in 0..w {
            let (mut sr, mut si) = (0.0, 0.0);
            for y in 0..h {
                let (c, s) = th[[u, y]];
                sr += re[[y, v]] * c - im[[y, v]] * s;
                si += re[[y, v]] * s + im[[y, v]] * c;
            }
            power[[u, v]] = sr * sr + si * si;
        }
    }
    power
}

pub fn radial_spectrum(z: ArrayView2<'_, f64>) -> Result<SpectrumProfile> {
    let (h, w) = z.dim();
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("spectrum needs at least 2x2, got {h}x{w}")));
    }
    let power = power_spectrum(z);
    let radius = |u: usize, v: usize| centered_frequency(u, h).hypot(centered_frequency(v, w)).round() as usize;
    let max_radius = (0..h).flat_map(|u| (0..w).map(move |v| (u, v))).map(|(u, v)| radius(u, v)).max().unwrap_or(0);
    let mut sums = vec![0.0; max_radius + 1];
    let mut counts = vec![0usize; max_radius + 1];
    for u in 0..h {
        for v in 0..w {
            let r = radius(u, v);
            sums[r] += power[[u, v]];
            counts[r] += 1;
        }
    }
    let radial_bins = sums.iter().zip(&counts).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    Ok(SpectrumProfile { radial_bins })
}

/// Channel-averaged radial spectrum of a latent.
pub fn latent_spectrum(z: &LatentTensor) -> Result<SpectrumProfile> {
    let profiles = z
        .data()
        .outer_iter()
        .map(|channel| radial_spectrum(channel))
        .collect::<Result<Vec<_>>>()?;
    SpectrumProfile::mean_of(&profiles)
}

/// Mean `|log(1 + a) − log(1 + b)|` across bins.
pub fn spectrum_gap(a: &SpectrumProfile, b: &SpectrumProfile) -> Result<f64> {
    spectrum_gap_range(a, b, 0..a.len())
}

/// [`spectrum_gap`] restricted to a bin range.
pub fn spectrum_gap_range(a: &SpectrumProfile, b: &SpectrumProfile, bins: std::ops::Range<usize>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("profile lengths {} and {}", a.len(), b.len())));
    }
    if bins.is_empty() || bins.end > a.len() {
        return Err(Error::Domain(format!("bin range {bins:?} invalid for {} bins", a.len())));
    }
    let n = bins.len() as f64;
    Ok(bins.map(|i| (a.radial_bins[i].ln_1p() - b.radial_bins[i].ln_1p()).abs()).sum::<f64>() / n)
}

/// The upper half of the radius bins, `len/2 .. len`.
pub fn high_radius_bins(profile_len: usize) -> std::ops::Range<usize> {
    profile_len / 2..profile_len
}
