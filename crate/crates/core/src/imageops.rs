//! Image-domain primitives: luma grayscale, uniform average-gray, 2x box downsampling.

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::tensorio::{check_finite, RgbImage};

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Single-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Array2<f64>,
}

impl GrayImage {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h == 0 || w == 0 {
            return Err(Error::Shape(format!("gray image must be at least 1x1, got {h}x{w}")));
        }
        check_finite(pixels.iter())?;
        Ok(Self { pixels: pixels.mapv(|v| v.clamp(0.0, 1.0)) })
    }

    pub fn pixels(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    /// Mean gray level, accumulated relative to the first pixel so constant images are exact.
    pub fn mean(&self) -> f64 {
        let pivot = self.pixels[[0, 0]];
        let n = self.pixels.len() as f64;
        pivot + self.pixels.iter().map(|v| v - pivot).sum::<f64>() / n
    }
}

pub fn grayscale(image: &RgbImage) -> GrayImage {
    let px = image.pixels();
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let luma = Array2::from_shape_fn((image.height(), image.width()), |(y, x)| {
        (wr * px[[y, x, 0]] + wg * px[[y, x, 1]] + wb * px[[y, x, 2]]).clamp(0.0, 1.0)
    });
    GrayImage { pixels: luma }
}

/// Replicates the gray channel into R = G = B.
pub fn gray_to_rgb(image: &GrayImage) -> RgbImage {
    let (h, w) = image.dim();
    let px = image.pixels();
    RgbImage::new(Array3::from_shape_fn((h, w, 3), |(y, x, _)| px[[y, x]]))
        .expect("gray pixels are finite and in range")
}

/// A full-size image whose every pixel is the mean of `image`.
pub fn average_gray(image: &GrayImage) -> GrayImage {
    let mean = image.mean();
    GrayImage { pixels: Array2::from_elem(image.dim(), mean) }
}

/// 2x2 box average; a trailing odd row or column is dropped.
pub fn downsample2x(image: &RgbImage) -> Result<RgbImage> {
    let (h, w) = (image.height(), image.width());
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("downsampling needs at least 2x2, got {h}x{w}")));
    }
    let px = image.pixels();
    let out = Array3::from_shape_fn((h / 2, w / 2, 3), |(y, x, c)| {
        let (y0, x0) = (2 * y, 2 * x);
        0.25 * (px[[y0, x0, c]] + px[[y0, x0 + 1, c]] + px[[y0 + 1, x0, c]] + px[[y0 + 1, x0 + 1, c]])
    });
    RgbImage::new(out)
}
