//! Orthonormal 2D DFT and the magnitude-spectrum L1 loss.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::Result;
use crate::tensor::{Real, Tensor};

/// Magnitudes below this get a zero subgradient.
pub const MAGNITUDE_DEAD_ZONE: f64 = 1e-12;

/// Reusable row/column plans for one `h x w` grid.
pub struct Fft2 {
    h: usize,
    w: usize,
    rows: std::sync::Arc<dyn rustfft::Fft<f64>>,
    cols: std::sync::Arc<dyn rustfft::Fft<f64>>,
    scale: f64,
}

impl Fft2 {
    pub fn new(h: usize, w: usize, direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            h,
            w,
            rows: planner.plan_fft(w, direction),
            cols: planner.plan_fft(h, direction),
            scale: 1.0 / ((h * w) as f64).sqrt(),
        }
    }

    /// In-place unitary transform of a row-major `h x w` plane.
    pub fn process(&self, plane: &mut [Complex64]) {
        assert_eq!(plane.len(), self.h * self.w, "plane size");
        self.rows.process(plane);
        let mut col = vec![Complex64::default(); self.h];
        for x in 0..self.w {
            for y in 0..self.h {
                col[y] = plane[y * self.w + x];
            }
            self.cols.process(&mut col);
            for y in 0..self.h {
                plane[y * self.w + x] = col[y] * self.scale;
            }
        }
    }
}

/// Orthonormal forward DFT of a real `h x w` plane.
pub fn fft2_ortho(plane: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::new(h, w, FftDirection::Forward).process(&mut buf);
    buf
}

pub(crate) fn planes<T: Real>(t: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() < 2 || s[s.len() - 1] == 0 || s[s.len() - 2] == 0 {
        return Err(crate::Error::InvalidInput(format!(
            "expected a tensor ending in two nonzero spatial dims, got {s:?}"
        )));
    }
    let h = s[s.len() - 2];
    let w = s[s.len() - 1];
    Ok((t.len() / (h * w), h, w))
}

/// Mean over planes and frequency bins of `| |F r| - |F t| |`, where `F` is
/// the orthonormal 2D DFT over the two trailing dims.
pub fn fft_magnitude_loss<T: Real>(recon: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    recon.ensure_same_shape(target)?;
    let (n_planes, h, w) = planes(recon)?;
    let hw = h * w;
    let count = recon.len() as f64;
    let fwd = Fft2::new(h, w, FftDirection::Forward);
    let inv = Fft2::new(h, w, FftDirection::Inverse);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(recon.len());
    let mut zr = vec![Complex64::default(); hw];
    let mut zt = vec![Complex64::default(); hw];
    for p in 0..n_planes {
        let span = p * hw..(p + 1) * hw;
        for ((a, b), (&r, &t)) in zr
            .iter_mut()
            .zip(zt.iter_mut())
            .zip(recon.data()[span.clone()].iter().zip(&target.data()[span]))
        {
            *a = Complex64::new(r.to_f64_lossy(), 0.0);
            *b = Complex64::new(t.to_f64_lossy(), 0.0);
        }
        fwd.process(&mut zr);
        fwd.process(&mut zt);
        for (z, t) in zr.iter_mut().zip(&zt) {
            let (mr, mt) = (z.norm(), t.norm());
            loss += (mr - mt).abs();
            let diff = mr - mt;
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            *z = if mr < MAGNITUDE_DEAD_ZONE || sign == 0.0 {
                Complex64::default()
            } else {
                *z * (sign / (mr * count))
            };
        }
        inv.process(&mut zr);
        grad.extend(zr.iter().map(|z| T::from_f64_lossy(z.re)));
    }
    Ok((loss / count, Tensor::from_vec(recon.shape(), grad)?))
}
