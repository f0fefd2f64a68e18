//! Windowed structural similarity with an analytic gradient.

use super::spectral::planes;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

fn gaussian_1d() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid separable correlation: `h x w` -> `(h-10) x (w-10)`.
fn filter_valid(x: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for j in 0..ow {
            tmp[y * ow + j] = (0..WINDOW).map(|v| g[v] * x[y * w + j + v]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..WINDOW).map(|u| g[u] * tmp[(i + u) * ow + j]).sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters a window map back onto the image.
fn filter_adjoint(m: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let mut tmp = vec![0.0; h * ow];
    for i in 0..oh {
        for u in 0..WINDOW {
            for j in 0..ow {
                tmp[(i + u) * ow + j] += g[u] * m[i * ow + j];
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for j in 0..ow {
            let t = tmp[y * ow + j];
            for v in 0..WINDOW {
                out[y * w + j + v] += g[v] * t;
            }
        }
    }
    out
}

/// `1 - mean SSIM` over every valid 11x11 window of every plane.
pub fn ssim_loss<T: Real>(recon: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    recon.ensure_same_shape(target)?;
    let (n_planes, h, w) = planes(recon)?;
    if h < WINDOW || w < WINDOW {
        return Err(Error::InvalidInput(format!(
            "SSIM needs at least {WINDOW}x{WINDOW} pixels, got {h}x{w}"
        )));
    }
    let g = gaussian_1d();
    let hw = h * w;
    let n_windows = (h + 1 - WINDOW) * (w + 1 - WINDOW);
    let total = (n_planes * n_windows) as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(recon.len());
    for p in 0..n_planes {
        let x: Vec<f64> = recon.data()[p * hw..(p + 1) * hw].iter().map(|v| v.to_f64_lossy()).collect();
        let y: Vec<f64> = target.data()[p * hw..(p + 1) * hw].iter().map(|v| v.to_f64_lossy()).collect();
        let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
        let mx = filter_valid(&x, h, w, &g);
        let my = filter_valid(&y, h, w, &g);
        let mxx = filter_valid(&prod(&x, &x), h, w, &g);
        let myy = filter_valid(&prod(&y, &y), h, w, &g);
        let mxy = filter_valid(&prod(&x, &y), h, w, &g);
        let mut da = vec![0.0; n_windows];
        let mut db = vec![0.0; n_windows];
        let mut dc = vec![0.0; n_windows];
        for k in 0..n_windows {
            let (ux, uy) = (mx[k], my[k]);
            let a1 = 2.0 * ux * uy + C1;
            let a2 = 2.0 * (mxy[k] - ux * uy) + C2;
            let b1 = ux * ux + uy * uy + C1;
            let b2 = (mxx[k] - ux * ux) + (myy[k] - uy * uy) + C2;
            let s = a1 * a2 / (b1 * b2);
            sum += s;
            da[k] = s * (2.0 * uy / a1 - 2.0 * uy / a2 - 2.0 * ux / b1 + 2.0 * ux / b2);
            db[k] = -s / b2;
            dc[k] = 2.0 * s / a2;
        }
        let ga = filter_adjoint(&da, h, w, &g);
        let gb = filter_adjoint(&db, h, w, &g);
        let gc = filter_adjoint(&dc, h, w, &g);
        grad.extend((0..hw).map(|i| T::from_f64_lossy(-(ga[i] + 2.0 * x[i] * gb[i] + y[i] * gc[i]) / total)));
    }
    Ok((1.0 - sum / total, Tensor::from_vec(recon.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_normalized_and_symmetric() {
        let g = gaussian_1d();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..WINDOW {
            assert_eq!(g[i], g[WINDOW - 1 - i]);
        }
    }

    #[test]
    fn constant_shift_value() {
        let a = Tensor::full(&[1, 16, 16], 0.5f64);
        let b = Tensor::full(&[1, 16, 16], 0.6f64);
        let (l, _) = ssim_loss(&a, &b).unwrap();
        let expected = 1.0 - (2.0 * 0.5 * 0.6 + C1) / (0.25 + 0.36 + C1);
        assert!((l - expected).abs() < 1e-12, "{l}");
        assert!((l - 0.01639).abs() < 1e-5);
    }

    #[test]
    fn identical_images_score_zero() {
        let a = Tensor::from_vec(&[12, 13], (0..156).map(|i| ((i * 7) % 13) as f64 / 13.0).collect()).unwrap();
        let (l, g) = ssim_loss(&a, &a).unwrap();
        assert!(l.abs() < 1e-12);
        assert!(g.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn adjoint_identity() {
        let (h, w) = (14, 12);
        let g = gaussian_1d();
        let x: Vec<f64> = (0..h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let m: Vec<f64> = (0..(h - 10) * (w - 10)).map(|i| (i as f64 * 0.91).cos()).collect();
        let lhs: f64 = filter_valid(&x, h, w, &g).iter().zip(&m).map(|(a, b)| a * b).sum();
        let rhs: f64 = filter_adjoint(&m, h, w, &g).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn too_small_is_rejected() {
        let a = Tensor::full(&[10, 16], 0.5f64);
        assert!(ssim_loss(&a, &a).is_err());
    }
}
