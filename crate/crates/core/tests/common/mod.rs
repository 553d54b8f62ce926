//! Reference implementations used as test oracles.
//!
//! Everything here is written from the definitions with plain loops and owns
//! its own linear algebra, so it shares no code path with the library beyond
//! the input types.
#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sadis::{LatentTensor, RgbImage};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

pub fn random_latent(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> LatentTensor {
    LatentTensor::new(Array3::from_shape_fn((c, h, w), |_| rng.sample(StandardNormal))).unwrap()
}

/// Latent with channel mixing `mix` and per-channel offsets, so its gram is far from identity.
pub fn correlated_latent(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> LatentTensor {
    let mix = gaussian_matrix(rng, c, c);
    let offsets: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
    let white = gaussian_matrix(rng, c, h * w);
    let mut m = mix.dot(&white);
    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
        row += offsets[i];
    }
    LatentTensor::from_matrix(m, h, w).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> RgbImage {
    RgbImage::new(Array3::from_shape_fn((h, w, 3), |_| rng.random_range(0.0..=1.0))).unwrap()
}

pub fn rel_frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num / den).sqrt()
}

/// Per-channel means of a `C × H × W` latent.
pub fn brute_mean(z: &LatentTensor) -> Vec<f64> {
    let d = z.data();
    let (c, h, w) = d.dim();
    (0..c)
        .map(|k| {
            let mut s = 0.0;
            for y in 0..h {
                for x in 0..w {
                    s += d[[k, y, x]];
                }
            }
            s / (h * w) as f64
        })
        .collect()
}

/// Unnormalized centered channel gram `Σ_p (z_p − m)(z_p − m)ᵀ`.
pub fn brute_gram(z: &LatentTensor) -> Array2<f64> {
    let d = z.data();
    let (c, h, w) = d.dim();
    let m = brute_mean(z);
    let mut g = Array2::zeros((c, c));
    for i in 0..c {
        for j in 0..c {
            let mut s = 0.0;
            for y in 0..h {
                for x in 0..w {
                    s += (d[[i, y, x]] - m[i]) * (d[[j, y, x]] - m[j]);
                }
            }
            g[[i, j]] = s;
        }
    }
    g
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m: Vec<f64> = a.iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
        }
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = Array1::from_iter(order.iter().map(|&k| m[k * n + k]));
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| v[i * n + order[j]]);
    (values, vectors)
}

/// Singular values, descending, from the Jacobi eigenvalues of the smaller gram.
pub fn jacobi_singular_values(a: &Array2<f64>) -> Vec<f64> {
    let gram = if a.nrows() <= a.ncols() { a.dot(&a.t()) } else { a.t().dot(a) };
    let (values, _) = jacobi_eigen(&gram);
    values.iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// `E diag(f(d)) Eᵀ` from the Jacobi decomposition.
pub fn jacobi_spectral_map(a: &Array2<f64>, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let (values, vectors) = jacobi_eigen(a);
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let fk = f(values[k]);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += vectors[[i, k]] * fk * vectors[[j, k]];
            }
        }
    }
    out
}

/// Whitening then coloring built from the Jacobi oracle.
pub fn oracle_wct(z: &LatentTensor, reference: &LatentTensor) -> Array2<f64> {
    let c = z.channels();
    let (m, mc) = (brute_mean(z), brute_mean(reference));
    let gram = brute_gram(z);
    let dmax = jacobi_eigen(&gram).0[0];
    let whiten = jacobi_spectral_map(&gram, |d| if d > 1e-8 * dmax { d.powf(-0.5) } else { 0.0 });
    let color = jacobi_spectral_map(&brute_gram(reference), |d| d.max(0.0).sqrt());
    let transform = color.dot(&whiten);
    let zm = z.as_matrix();
    let mut out = Array2::zeros((c, zm.ncols()));
    for p in 0..zm.ncols() {
        for i in 0..c {
            let mut s = mc[i];
            for j in 0..c {
                s += transform[[i, j]] * (zm[[j, p]] - m[j]);
            }
            out[[i, p]] = s;
        }
    }
    out
}

/// C-Hist by counting each channel against half-open bin edges `[k/bins, (k+1)/bins)`, the last bin closed.
pub fn brute_chist(a: &RgbImage, b: &RgbImage, bins: usize) -> f64 {
    let hist = |img: &RgbImage, ch: usize| {
        let mut h = vec![0.0; bins];
        let px = img.pixels();
        let (hh, ww, _) = px.dim();
        for y in 0..hh {
            for x in 0..ww {
                let v = px[[y, x, ch]];
                let mut k = 0;
                while k + 1 < bins && v >= (k + 1) as f64 / bins as f64 {
                    k += 1;
                }
                h[k] += 1.0;
            }
        }
        let n = (hh * ww) as f64;
        h.iter().map(|c| c / n).collect::<Vec<_>>()
    };
    let mut total = 0.0;
    for ch in 0..3 {
        let (p, q) = (hist(a, ch), hist(b, ch));
        let mut bc = 0.0;
        for k in 0..bins {
            bc += (p[k] * q[k]).sqrt();
        }
        total += (1.0 - bc).max(0.0).sqrt();
    }
    total
}

fn box_half(img: &Array3<f64>) -> Array3<f64> {
    let (h, w, _) = img.dim();
    let mut out = Array3::zeros((h / 2, w / 2, 3));
    for y in 0..h / 2 {
        for x in 0..w / 2 {
            for c in 0..3 {
                let mut s = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        s += img[[2 * y + dy, 2 * x + dx, c]];
                    }
                }
                out[[y, x, c]] = s / 4.0;
            }
        }
    }
    out
}

/// SWD for equally sized images: mean over scales and directions of the mean sorted-projection gap.
pub fn brute_swd(a: &RgbImage, b: &RgbImage, directions: &[[f64; 3]], scales: usize) -> f64 {
    let mut la = a.pixels().clone();
    let mut lb = b.pixels().clone();
    let mut total = 0.0;
    for s in 0..scales {
        if s > 0 {
            la = box_half(&la);
            lb = box_half(&lb);
        }
        let (h, w, _) = la.dim();
        for d in directions {
            let project = |img: &Array3<f64>| {
                let mut v = Vec::with_capacity(h * w);
                for y in 0..h {
                    for x in 0..w {
                        v.push(img[[y, x, 0]] * d[0] + img[[y, x, 1]] * d[1] + img[[y, x, 2]] * d[2]);
                    }
                }
                v.sort_by(|p, q| p.partial_cmp(q).unwrap());
                v
            };
            let (pa, pb) = (project(&la), project(&lb));
            let gap: f64 = pa.iter().zip(&pb).map(|(p, q)| (p - q).abs()).sum();
            total += gap / pa.len() as f64;
        }
    }
    total / (scales * directions.len()) as f64
}

/// `|Σ_{y,x} z[y,x] e^{−2πi(uy/H + vx/W)}|²` for every frequency, by quadruple loop.
pub fn direct_dft_power(z: &Array2<f64>) -> Array2<f64> {
    let (h, w) = z.dim();
    let mut out = Array2::zeros((h, w));
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * std::f64::consts::PI * (u as f64 * y as f64 / h as f64 + v as f64 * x as f64 / w as f64);
                    re += z[[y, x]] * phase.cos();
                    im += z[[y, x]] * phase.sin();
                }
            }
            out[[u, v]] = re * re + im * im;
        }
    }
    out
}

/// Number of DFT frequencies falling in each integer radius band.
pub fn radius_counts(h: usize, w: usize) -> Vec<usize> {
    let signed = |k: usize, n: usize| if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
    let mut counts = Vec::new();
    for u in 0..h {
        for v in 0..w {
            let r = signed(u, h).hypot(signed(v, w)).round() as usize;
            if counts.len() <= r {
                counts.resize(r + 1, 0);
            }
            counts[r] += 1;
        }
    }
    counts
}

/// A linear patch encoder: token `k` is `W_k · vec(patch_k) + b_k` over non-overlapping square patches.
pub struct LinearPatchEncoder {
    pub patch: usize,
    pub weights: Vec<Array2<f64>>,
    pub bias: Array2<f64>,
}

impl LinearPatchEncoder {
    pub fn random(rng: &mut ChaCha8Rng, h: usize, w: usize, patch: usize, width: usize) -> Self {
        let tokens = (h / patch) * (w / patch);
        let weights = (0..tokens).map(|_| gaussian_matrix(rng, width, patch * patch * 3)).collect();
        let bias = gaussian_matrix(rng, tokens, width);
        Self { patch, weights, bias }
    }

    /// Encodes raw `H × W × 3` values without any clamping.
    pub fn encode(&self, img: &Array3<f64>) -> Array2<f64> {
        let (h, w, _) = img.dim();
        let p = self.patch;
        let cols = w / p;
        let mut out = self.bias.clone();
        for (k, wk) in self.weights.iter().enumerate() {
            let (py, px) = (k / cols * p, k % cols * p);
            let mut idx = 0;
            let mut patch = vec![0.0; p * p * 3];
            for y in py..py + p {
                for x in px..px + p {
                    for c in 0..3 {
                        patch[idx] = img[[y, x, c]];
                        idx += 1;
                    }
                }
            }
            debug_assert!(py + p <= h);
            for r in 0..wk.nrows() {
                let mut s = 0.0;
                for (j, v) in patch.iter().enumerate() {
                    s += wk[[r, j]] * v;
                }
                out[[k, r]] += s;
            }
        }
        out
    }
}
