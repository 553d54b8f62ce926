//! Color/texture disentanglement primitives for diffusion-model stylization.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensorio`]: NPY and PNG/PPM interchange plus the shared tensor types.
//! * [`imageops`]: grayscale, average-gray and pyramid downsampling.
//! * [`cte`]: color embedding subtraction, token concatenation and
//!   singular-value reweighting of texture embeddings.
//! * [`regwct`]: whitening/coloring of channel-major latents with noise
//!   regularization, blending and timestep gating.
//! * [`metrics`]: histogram, sliced-Wasserstein, covariance and radial
//!   spectrum diagnostics.
//! * [`sandbox`]: a Gaussian diffusion simulator with an exact noise
//!   predictor that runs whole DDIM trajectories through the RegWCT hook.
//! * [`cli`]: the `sadis` command line front-end.

pub mod cli;
pub mod cte;
pub mod error;
pub mod imageops;
pub mod linalg;
pub mod metrics;
pub mod regwct;
pub mod sandbox;
pub mod tensorio;

pub use error::{Error, Result};
pub use imageops::GrayImage;
pub use tensorio::{Embedding, LatentTensor, RgbImage};
