//! SVG curve plots and PNG heatmap panels.

use std::fmt::Write as _;

use image::{Rgb, RgbImage};

use d3r_core::dataset::ImageTensor;
use d3r_core::metrics::RocCurve;
use d3r_core::scoring::AnomalyMap;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const SIZE: f64 = 360.0;
const MARGIN: f64 = 50.0;

fn sx(v: f64) -> f64 {
    MARGIN + v * SIZE
}

fn sy(v: f64) -> f64 {
    MARGIN + (1.0 - v) * SIZE
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// ROC plot with one polyline per present curve. Absent methods are listed
/// in the legend as missing.
pub fn roc_svg(title: &str, curves: &[(String, Option<&RocCurve>)]) -> String {
    let width = SIZE + 2.0 * MARGIN + 170.0;
    let height = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, sx(0.5), escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#, sx(v), sy(0.0) + 16.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#, sx(0.0) - 6.0, sy(v) + 4.0).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">False positive rate</text>"#,
        sx(0.5),
        height - 8.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">True positive rate</text>"#,
        sy(0.5),
        sy(0.5)
    )
    .unwrap();
    writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    )
    .unwrap();
    for (k, (name, curve)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let ly = MARGIN + 10.0 + 18.0 * k as f64;
        let lx = MARGIN + SIZE + 15.0;
        match curve {
            Some(c) => {
                let pts: Vec<String> = c
                    .fprs
                    .iter()
                    .zip(&c.tprs)
                    .map(|(&f, &t)| format!("{:.2},{:.2}", sx(f), sy(t)))
                    .collect();
                writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    pts.join(" ")
                )
                .unwrap();
                writeln!(
                    s,
                    r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                    lx + 20.0
                )
                .unwrap();
                writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name)).unwrap();
            }
            None => {
                writeln!(s, r##"<text x="{}" y="{}" fill="#777">{} (missing)</text>"##, lx + 26.0, ly + 4.0, escape(name))
                    .unwrap();
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `input | reconstruction | anomaly map | overlay`, side by side. `map`
/// should be normalized to `[0, 1]`.
pub fn panel(input: &ImageTensor, recon: &ImageTensor, map: &AnomalyMap) -> RgbImage {
    let (h, w) = (input.height(), input.width());
    let mut out = RgbImage::new(4 * w as u32, h as u32);
    let rgb = |img: &ImageTensor, y: usize, x: usize| {
        [0, 1, 2].map(|c| f64::from(img.at(c, y, x)))
    };
    for y in 0..h {
        for x in 0..w {
            let a = rgb(input, y, x);
            let r = rgb(recon, y, x);
            let m = map.values()[y * w + x];
            let alpha = 0.6 * m.clamp(0.0, 1.0);
            let over = [a[0] * (1.0 - alpha) + alpha, a[1] * (1.0 - alpha), a[2] * (1.0 - alpha)];
            let (xu, yu) = (x as u32, y as u32);
            out.put_pixel(xu, yu, Rgb(a.map(to_u8)));
            out.put_pixel(xu + w as u32, yu, Rgb(r.map(to_u8)));
            out.put_pixel(xu + 2 * w as u32, yu, Rgb([to_u8(m); 3]));
            out.put_pixel(xu + 3 * w as u32, yu, Rgb(over.map(to_u8)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_lists_missing_methods() {
        let c = RocCurve {
            thresholds: vec![f64::INFINITY, 0.5, 0.1],
            fprs: vec![0.0, 0.5, 1.0],
            tprs: vec![0.0, 1.0, 1.0],
        };
        let svg = roc_svg("tile", &[("ae-mse".into(), Some(&c)), ("d3r-fft".into(), None)]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("d3r-fft (missing)"));
    }

    #[test]
    fn panel_layout() {
        let img = ImageTensor::filled(2, 3, 0.5).unwrap();
        let map = AnomalyMap::new(2, 3, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let p = panel(&img, &img, &map);
        assert_eq!(p.dimensions(), (12, 2));
        assert_eq!(p.get_pixel(7, 0).0, [255; 3]);
        assert_eq!(p.get_pixel(10, 0).0[0], 204);
    }
}
