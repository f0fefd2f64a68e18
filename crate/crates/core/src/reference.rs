//! Published MVTec AD results, kept as reference rows for reports.
//!
//! These are numbers to compare against, not targets: the dataset is
//! external and the original loss weights were never disclosed.

/// `(method, img_auc, img_ap, px_auc, px_ap, pro, fps)`; FPS is absent for
/// per-category tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceRow {
    pub method: &'static str,
    pub img_auc: f64,
    pub img_ap: f64,
    pub px_auc: f64,
    pub px_ap: f64,
    pub pro: f64,
    pub fps: Option<f64>,
}

const fn row(method: &'static str, v: [f64; 5], fps: Option<f64>) -> ReferenceRow {
    ReferenceRow {
        method,
        img_auc: v[0],
        img_ap: v[1],
        px_auc: v[2],
        px_ap: v[3],
        pro: v[4],
        fps,
    }
}

/// Averages over the 15 MVTec AD categories.
pub const MVTEC_AVERAGE: [ReferenceRow; 7] = [
    row("AE-MSE", [0.708, 0.859, 0.733, 0.152, 0.417], Some(19.8)),
    row("D3R-MSE", [0.720, 0.867, 0.738, 0.177, 0.441], Some(21.5)),
    row("D3R-FFT", [0.706, 0.867, 0.751, 0.166, 0.468], Some(20.3)),
    row("D3R-FFT-SSIM", [0.657, 0.840, 0.625, 0.127, 0.346], Some(20.5)),
    row("PaDiM (ResNet-18)", [0.894, 0.943, 0.964, 0.443, 0.733], Some(21.7)),
    row("STFPM (ResNet-18)", [0.599, 0.797, 0.822, 0.171, 0.471], Some(20.7)),
    row("PatchCoreLite (ResNet-18)", [0.937, 0.969, 0.940, 0.476, 0.854], Some(7.7)),
];

pub const HAZELNUT: [ReferenceRow; 7] = [
    row("AE-MSE", [0.936, 0.961, 0.914, 0.468, 0.603], None),
    row("D3R-MSE", [0.928, 0.956, 0.925, 0.490, 0.606], None),
    row("D3R-FFT", [0.923, 0.956, 0.882, 0.428, 0.687], None),
    row("D3R-FFT-SSIM", [0.739, 0.858, 0.858, 0.260, 0.616], None),
    row("PaDiM", [0.766, 0.816, 0.977, 0.468, 0.633], None),
    row("STFPM", [0.930, 0.963, 0.966, 0.437, 0.813], None),
    row("PatchCoreLite", [0.970, 0.982, 0.974, 0.474, 0.911], None),
];

pub const LEATHER: [ReferenceRow; 7] = [
    row("AE-MSE", [0.846, 0.945, 0.748, 0.113, 0.445], None),
    row("D3R-MSE", [0.849, 0.946, 0.790, 0.171, 0.467], None),
    row("D3R-FFT", [0.659, 0.867, 0.772, 0.061, 0.471], None),
    row("D3R-FFT-SSIM", [0.690, 0.898, 0.885, 0.222, 0.599], None),
    row("PaDiM", [1.000, 1.000, 0.992, 0.411, 0.863], None),
    row("STFPM", [0.660, 0.881, 0.965, 0.286, 0.736], None),
    row("PatchCoreLite", [1.000, 1.000, 0.996, 0.539, 0.880], None),
];

pub const PRO_METHODS: [&str; 4] = ["AE-MSE", "D3R-MSE", "D3R-FFT", "PatchCoreLite"];

/// PRO AUC per category, columns as in [`PRO_METHODS`].
pub const PRO_BY_CATEGORY: [(&str, [f64; 4]); 5] = [
    ("tile", [0.412, 0.449, 0.453, 0.739]),
    ("wood", [0.495, 0.555, 0.608, 0.895]),
    ("pill", [0.534, 0.619, 0.721, 0.848]),
    ("carpet", [0.255, 0.337, 0.316, 0.923]),
    ("screw", [0.356, 0.427, 0.588, 0.890]),
];

/// Per-category table for `category`, if one was published.
pub fn category_table(category: &str) -> Option<&'static [ReferenceRow]> {
    match category.to_ascii_lowercase().as_str() {
        "hazelnut" => Some(&HAZELNUT),
        "leather" => Some(&LEATHER),
        _ => None,
    }
}

pub fn average_row(method_label: &str) -> Option<&'static ReferenceRow> {
    MVTEC_AVERAGE.iter().find(|r| r.method.eq_ignore_ascii_case(method_label))
}
