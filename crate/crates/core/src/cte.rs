//! Color/texture extraction on image-encoder token embeddings.
//!
//! The color branch is a plain difference of embeddings: encoding a color
//! image and its grayscale copy and subtracting removes what the two share
//! (layout, semantics), leaving a color direction that can be added to other
//! embeddings.
//!
//! The texture branch stacks the grayscale texture tokens on top of the tokens
//! of a uniform average-gray image, reweights the singular values of the stack
//! with `σ ↦ β·exp(−γσ)·σ`, and keeps the first half of the rows. Large
//! singular values carry the tone shared by both grays and are damped hardest.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::tensorio::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CteConfig {
    /// γ, exponential damping rate of singular values.
    pub gamma: f64,
    /// β, overall singular value gain.
    pub beta: f64,
    /// Scalar gain on the extracted color embedding.
    pub color_scale: f64,
}

impl Default for CteConfig {
    fn default() -> Self {
        Self { gamma: 0.003, beta: 1.0, color_scale: 1.0 }
    }
}

impl CteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be a finite value >= 0, got {}", self.gamma)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be a finite value > 0, got {}", self.beta)));
        }
        if !(self.color_scale >= 0.0 && self.color_scale.is_finite()) {
            return Err(Error::Config(format!("color_scale must be a finite value >= 0, got {}", self.color_scale)));
        }
        Ok(())
    }
}

/// Texture tokens followed by color tokens, `2·n_t` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleCondition {
    tokens: Embedding,
    n_tokens: usize,
}

impl StyleCondition {
    pub fn tokens(&self) -> &Embedding {
        &self.tokens
    }

    pub fn into_tokens(self) -> Embedding {
        self.tokens
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    /// Splits back into `(texture, color)`.
    pub fn split(&self) -> (Embedding, Embedding) {
        let t = self.tokens.tokens();
        let tx = Embedding::new(t.slice(s![..self.n_tokens, ..]).to_owned()).expect("slice of a valid embedding");
        let clr = Embedding::new(t.slice(s![self.n_tokens.., ..]).to_owned()).expect("slice of a valid embedding");
        (tx, clr)
    }
}

fn same_shape(a: &Embedding, b: &Embedding, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("{what}: shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

/// `color_scale · (emb_color − emb_gray)`.
pub fn extract_color_embedding(emb_color: &Embedding, emb_gray: &Embedding, config: &CteConfig) -> Result<Embedding> {
    config.validate()?;
    same_shape(emb_color, emb_gray, "color extraction")?;
    let diff = (&emb_color.tokens() - &emb_gray.tokens()) * config.color_scale;
    Embedding::new(diff)
}

/// Stacks `a` over `b` along the token axis.
pub fn concat_tokens(a: &Embedding, b: &Embedding) -> Result<Embedding> {
    if a.width() != b.width() {
        return Err(Error::Dimension(format!(
            "token concatenation: widths {} and {} differ",
            a.width(),
            b.width()
        )));
    }
    let stacked = concatenate(Axis(0), &[a.tokens(), b.tokens()]).expect("widths checked above");
    Embedding::new(stacked)
}

/// `σ̂_i = β·exp(−γ·σ_i)·σ_i`, elementwise.
pub fn reweight_singular_values(sigma: &[f64], config: &CteConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if let Some(&bad) = sigma.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::Domain(format!("singular values must be nonnegative, got {bad}")));
    }
    Ok(sigma.iter().map(|&v| config.beta * (-config.gamma * v).exp() * v).collect())
}

/// `U · diag(σ̂) · Vᵀ` for the thin SVD of `stacked`.
pub fn reconstruct_reweighted(stacked: &Embedding, config: &CteConfig) -> Result<Array2<f64>> {
    let svd = thin_svd(stacked.tokens())?;
    let reweighted = Array1::from(reweight_singular_values(&svd.singular_values.to_vec(), config)?);
    let scaled_u = &svd.u * &reweighted.view().insert_axis(Axis(0));
    Ok(scaled_u.dot(&svd.vt))
}

/// Texture embedding from the grayscale-texture tokens and the average-gray tokens.
pub fn extract_texture_embedding(emb_gray_tx: &Embedding, emb_avg_gray: &Embedding, config: &CteConfig) -> Result<Embedding> {
    config.validate()?;
    same_shape(emb_gray_tx, emb_avg_gray, "texture extraction")?;
    let stacked = concat_tokens(emb_gray_tx, emb_avg_gray)?;
    let recon = reconstruct_reweighted(&stacked, config)?;
    Embedding::new(recon.slice(s![..emb_gray_tx.n_tokens(), ..]).to_owned())
}

pub fn combine(emb_tx: &Embedding, emb_clr: &Embedding) -> Result<StyleCondition> {
    same_shape(emb_tx, emb_clr, "combine")?;
    Ok(StyleCondition { tokens: concat_tokens(emb_tx, emb_clr)?, n_tokens: emb_tx.n_tokens() })
}
