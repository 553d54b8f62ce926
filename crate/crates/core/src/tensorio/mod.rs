//! Tensor and image interchange, plus the value types shared across the crate.
//!
//! All tensors are held at 64-bit precision in C order. Files may be 32- or
//! 64-bit; see [`npy`] for the on-disk format.

mod image;
pub mod npy;

use ndarray::{Array2, Array3, ArrayD, ArrayView2, ArrayViewMut2, Ix2, Ix3};

use crate::error::{Error, Result};

pub use self::image::{read_image, write_image};
pub use self::npy::{read_npy, read_npy_typed, write_npy, Precision};

pub(crate) fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Image-encoder token features, `n_t` rows by `c` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    tokens: Array2<f64>,
}

impl Embedding {
    pub fn new(tokens: Array2<f64>) -> Result<Self> {
        let (n, c) = tokens.dim();
        if n == 0 || c == 0 {
            return Err(Error::Shape(format!("embedding must be at least 1x1, got {n}x{c}")));
        }
        check_finite(tokens.iter())?;
        Ok(Self { tokens: tokens.as_standard_layout().into_owned() })
    }

    pub fn zeros(n_tokens: usize, width: usize) -> Result<Self> {
        Self::new(Array2::zeros((n_tokens, width)))
    }

    pub fn tokens(&self) -> ArrayView2<'_, f64> {
        self.tokens.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.tokens
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.nrows()
    }

    pub fn width(&self) -> usize {
        self.tokens.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tokens.dim()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.tokens.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Reads an `(n_t, c)` array from an NPY file.
    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_dyn(read_npy(path)?)
    }

    pub fn from_dyn(arr: ArrayD<f64>) -> Result<Self> {
        let shape = arr.shape().to_vec();
        let tokens = arr
            .into_dimensionality::<Ix2>()
            .map_err(|_| Error::Shape(format!("embedding must be rank 2, got shape {shape:?}")))?;
        Self::new(tokens)
    }

    pub fn write(&self, path: impl AsRef<std::path::Path>, precision: Precision) -> Result<()> {
        write_npy(path, &self.tokens.view().into_dyn(), precision)
    }
}

/// Channel-major latent `C × H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    data: Array3<f64>,
}

impl LatentTensor {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if c == 0 || h * w < 2 {
            return Err(Error::Shape(format!(
                "latent needs C >= 1 and H*W >= 2, got ({c}, {h}, {w})"
            )));
        }
        check_finite(data.iter())?;
        Ok(Self { data: data.as_standard_layout().into_owned() })
    }

    /// Builds a latent from a `C × (H·W)` matrix.
    pub fn from_matrix(m: Array2<f64>, height: usize, width: usize) -> Result<Self> {
        let c = m.nrows();
        if m.ncols() != height * width {
            return Err(Error::Shape(format!(
                "matrix has {} columns, expected {height}*{width}",
                m.ncols()
            )));
        }
        let data = m
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((c, height, width))
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn spatial_len(&self) -> usize {
        self.height() * self.width()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.data
    }

    /// The latent flattened to `C × (H·W)`.
    pub fn as_matrix(&self) -> ArrayView2<'_, f64> {
        let (c, h, w) = self.data.dim();
        self.data
            .view()
            .into_shape_with_order((c, h * w))
            .expect("latent storage is always in standard layout")
    }

    pub(crate) fn as_matrix_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        let (c, h, w) = self.data.dim();
        self.data
            .view_mut()
            .into_shape_with_order((c, h * w))
            .expect("latent storage is always in standard layout")
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_dyn(read_npy(path)?)
    }

    pub fn from_dyn(arr: ArrayD<f64>) -> Result<Self> {
        let shape = arr.shape().to_vec();
        let data = arr
            .into_dimensionality::<Ix3>()
            .map_err(|_| Error::Shape(format!("latent must be rank 3 (C,H,W), got shape {shape:?}")))?;
        Self::new(data)
    }

    pub fn write(&self, path: impl AsRef<std::path::Path>, precision: Precision) -> Result<()> {
        write_npy(path, &self.data.view().into_dyn(), precision)
    }
}

/// `H × W × 3` color image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pixels: Array3<f64>,
}

impl RgbImage {
    /// Validates shape and finiteness, then clamps every channel into `[0, 1]`.
    pub fn new(pixels: Array3<f64>) -> Result<Self> {
        let (h, w, ch) = pixels.dim();
        if h == 0 || w == 0 || ch != 3 {
            return Err(Error::Shape(format!("rgb image must be HxWx3 with H,W >= 1, got ({h}, {w}, {ch})")));
        }
        check_finite(pixels.iter())?;
        let pixels = pixels.mapv(|v| v.clamp(0.0, 1.0)).as_standard_layout().into_owned();
        Ok(Self { pixels })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Result<Self> {
        Self::new(Array3::from_shape_fn((height, width, 3), |(y, x, c)| f(y, x)[c]))
    }

    pub fn constant(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        [self.pixels[[y, x, 0]], self.pixels[[y, x, 1]], self.pixels[[y, x, 2]]]
    }

    /// Iterates pixels in row-major order.
    pub fn iter_pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.height()).flat_map(move |y| (0..self.width()).map(move |x| self.pixel(y, x)))
    }

    /// 8-bit code of a channel value, rounding half up.
    pub fn quantize_channel(v: f64) -> u8 {
        (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
    }

    /// The image as it will read back after an 8-bit write.
    pub fn quantized(&self) -> Self {
        Self { pixels: self.pixels.mapv(|v| f64::from(Self::quantize_channel(v)) / 255.0) }
    }

    pub(crate) fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| Self::quantize_channel(v)).collect()
    }

    pub(crate) fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "expected {} rgb bytes, found {}",
                height * width * 3,
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        let pixels = Array3::from_shape_vec((height, width, 3), values).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(pixels)
    }
}
