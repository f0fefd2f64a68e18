//! Planar resampling used when bringing images and masks to the working
//! resolution. Both kernels use half-pixel centres.

/// Bilinear resize of one `in_h x in_w` plane.
pub fn bilinear(src: &[f32], in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    debug_assert_eq!(src.len(), in_h * in_w);
    if in_h == out_h && in_w == out_w {
        return src.to_vec();
    }
    let ys: Vec<(usize, usize, f32)> = (0..out_h).map(|o| taps(o, in_h, out_h)).collect();
    let xs: Vec<(usize, usize, f32)> = (0..out_w).map(|o| taps(o, in_w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &ys {
        let r0 = &src[y0 * in_w..(y0 + 1) * in_w];
        let r1 = &src[y1 * in_w..(y1 + 1) * in_w];
        for &(x0, x1, fx) in &xs {
            // lerp form keeps constant regions exactly constant
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

fn taps(o: usize, n_in: usize, n_out: usize) -> (usize, usize, f32) {
    let scale = n_in as f64 / n_out as f64;
    let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(n_in - 1);
    (i0, i1, (pos - i0 as f64) as f32)
}

/// Nearest-neighbour resize of one plane.
pub fn nearest<T: Copy>(src: &[T], in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Vec<T> {
    debug_assert_eq!(src.len(), in_h * in_w);
    let pick = |o: usize, n_in: usize, n_out: usize| {
        let p = ((o as f64 + 0.5) * n_in as f64 / n_out as f64).floor() as usize;
        p.min(n_in - 1)
    };
    let xs: Vec<usize> = (0..out_w).map(|o| pick(o, in_w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let row = &src[pick(oy, in_h, out_h) * in_w..][..in_w];
        out.extend(xs.iter().map(|&x| row[x]));
    }
    out
}
