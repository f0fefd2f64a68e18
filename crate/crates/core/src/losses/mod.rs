//! Reconstruction objectives. Every loss returns its value (accumulated in
//! `f64`) and the gradient with respect to the reconstruction.

mod spectral;
mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub use spectral::{fft2_ortho, fft_magnitude_loss, Fft2, MAGNITUDE_DEAD_ZONE};
pub use ssim::{ssim_loss, C1, C2, SIGMA, WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_mse: f64,
    pub w_fft: f64,
    pub w_ssim: f64,
}

impl LossWeights {
    pub fn new(w_mse: f64, w_fft: f64, w_ssim: f64) -> Result<Self> {
        let w = LossWeights { w_mse, w_fft, w_ssim };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_mse, self.w_fft, self.w_ssim];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!("loss weights must be finite and nonnegative: {all:?}")));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::Config("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse: f64,
    pub fft: f64,
    pub ssim: f64,
    pub total: f64,
}

pub fn mse_loss<T: Real>(recon: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    recon.ensure_same_shape(target)?;
    let n = recon.len() as f64;
    let mut sum = 0.0;
    let scale = 2.0 / n;
    let grad = recon
        .data()
        .iter()
        .zip(target.data())
        .map(|(&r, &t)| {
            let d = r.to_f64_lossy() - t.to_f64_lossy();
            sum += d * d;
            T::from_f64_lossy(scale * d)
        })
        .collect();
    Ok((sum / n, Tensor::from_vec(recon.shape(), grad)?))
}

/// Weighted sum of the enabled terms. Zero-weight terms are not evaluated.
pub fn total_loss<T: Real>(
    recon: &Tensor<T>,
    target: &Tensor<T>,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Tensor<T>)> {
    weights.validate()?;
    recon.ensure_same_shape(target)?;
    let mut out = LossBreakdown::default();
    let mut grad = vec![0.0f64; recon.len()];
    let mut add = |w: f64, term: Result<(f64, Tensor<T>)>| -> Result<f64> {
        let (value, g) = term?;
        for (acc, v) in grad.iter_mut().zip(g.data()) {
            *acc += w * v.to_f64_lossy();
        }
        Ok(value)
    };
    if weights.w_mse > 0.0 {
        out.mse = add(weights.w_mse, mse_loss(recon, target))?;
    }
    if weights.w_fft > 0.0 {
        out.fft = add(weights.w_fft, fft_magnitude_loss(recon, target))?;
    }
    if weights.w_ssim > 0.0 {
        out.ssim = add(weights.w_ssim, ssim_loss(recon, target))?;
    }
    out.total = weights.w_mse * out.mse + weights.w_fft * out.fft + weights.w_ssim * out.ssim;
    let grad = grad.into_iter().map(T::from_f64_lossy).collect();
    Ok((out, Tensor::from_vec(recon.shape(), grad)?))
}
