use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruthMask;
use crate::error::{Error, Result};
use crate::scoring::AnomalyMap;

pub const DEFAULT_THRESHOLDS: usize = 200;
pub const DEFAULT_MAX_FPR: f64 = 0.3;

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// 8-connected foreground components as flat pixel indices, ordered by the
/// scanline position of each component's first pixel.
pub fn connected_components(mask: &GroundTruthMask) -> Vec<Vec<usize>> {
    let (h, w) = (mask.height(), mask.width());
    let fg = mask.data();
    let mut parent: Vec<usize> = (0..h * w).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if fg[i] == 0 {
                continue;
            }
            let mut link = |j: usize| {
                if fg[j] != 0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            };
            if x > 0 {
                link(i - 1);
            }
            if y > 0 {
                link(i - w);
                if x > 0 {
                    link(i - w - 1);
                }
                if x + 1 < w {
                    link(i - w + 1);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; h * w];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in 0..h * w {
        if fg[i] == 0 {
            continue;
        }
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[r]].push(i);
    }
    comps
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProCurve {
    pub thresholds: Vec<f64>,
    pub fprs: Vec<f64>,
    pub pros: Vec<f64>,
}

/// `n` equally spaced thresholds from 1 down to 0.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 - i as f64 / (n - 1) as f64).collect()
}

/// Per-region overlap curve over normalized maps. A pixel is predicted
/// anomalous at threshold `t` when its value is `>= t`.
pub fn pro_curve(maps: &[AnomalyMap], masks: &[GroundTruthMask], n_thresholds: usize) -> Result<ProCurve> {
    if maps.len() != masks.len() {
        return Err(Error::InvalidInput(format!("{} maps but {} masks", maps.len(), masks.len())));
    }
    if n_thresholds < 2 {
        return Err(Error::InvalidInput("need at least 2 thresholds".into()));
    }
    let thresholds = threshold_grid(n_thresholds);
    let first_hit = |v: f64| thresholds.partition_point(|&t| v < t);
    let mut fp_hist = vec![0u64; n_thresholds + 1];
    let mut normal = 0u64;
    let mut comp_hists: Vec<(Vec<u64>, u64)> = Vec::new();
    for (map, mask) in maps.iter().zip(masks) {
        if (map.height(), map.width()) != (mask.height(), mask.width()) {
            return Err(Error::shape(&[mask.height(), mask.width()], &[map.height(), map.width()]));
        }
        let v = map.values();
        for (i, &m) in mask.data().iter().enumerate() {
            if m == 0 {
                normal += 1;
                fp_hist[first_hit(v[i])] += 1;
            }
        }
        for comp in connected_components(mask) {
            let mut hist = vec![0u64; n_thresholds + 1];
            for &i in &comp {
                hist[first_hit(v[i])] += 1;
            }
            comp_hists.push((hist, comp.len() as u64));
        }
    }
    if comp_hists.is_empty() {
        return Err(Error::UndefinedMetric("PRO needs at least one ground-truth region".into()));
    }
    if normal == 0 {
        return Err(Error::UndefinedMetric("PRO needs at least one normal pixel".into()));
    }
    let cumulative = |hist: &[u64]| -> Vec<u64> {
        hist[..n_thresholds]
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    };
    let fp = cumulative(&fp_hist);
    let mut pro_sum = vec![0.0f64; n_thresholds];
    for (hist, size) in &comp_hists {
        for (acc, hit) in pro_sum.iter_mut().zip(cumulative(hist)) {
            *acc += hit as f64 / *size as f64;
        }
    }
    let n_comp = comp_hists.len() as f64;
    Ok(ProCurve {
        fprs: fp.iter().map(|&c| c as f64 / normal as f64).collect(),
        pros: pro_sum.iter().map(|s| s / n_comp).collect(),
        thresholds,
    })
}

/// Normalized area under the PRO curve, with an optional note when the curve
/// had to be extended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProAuc {
    pub value: f64,
    pub warning: Option<String>,
}

/// Trapezoidal area of PRO over FPR in `[0, max_fpr]`, divided by `max_fpr`.
/// The curve is anchored at `(0, 0)` and linearly interpolated at `max_fpr`.
pub fn pro_auc(curve: &ProCurve, max_fpr: f64) -> Result<ProAuc> {
    if !(max_fpr > 0.0 && max_fpr <= 1.0) {
        return Err(Error::InvalidInput(format!("max_fpr {max_fpr} outside (0, 1]")));
    }
    if curve.fprs.len() != curve.pros.len() || curve.fprs.is_empty() {
        return Err(Error::InvalidInput("PRO curve is empty or ragged".into()));
    }
    let mut pts: Vec<(f64, f64)> = curve.fprs.iter().copied().zip(curve.pros.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for &(x, y) in &pts {
        if x >= max_fpr {
            let y_cut = if x > prev.0 {
                prev.1 + (y - prev.1) * (max_fpr - prev.0) / (x - prev.0)
            } else {
                y
            };
            area += (max_fpr - prev.0) * (prev.1 + y_cut) / 2.0;
            return Ok(ProAuc {
                value: (area / max_fpr).clamp(0.0, 1.0),
                warning: None,
            });
        }
        area += (x - prev.0) * (prev.1 + y) / 2.0;
        prev = (x, y);
    }
    area += (max_fpr - prev.0) * prev.1;
    Ok(ProAuc {
        value: (area / max_fpr).clamp(0.0, 1.0),
        warning: Some(format!(
            "PRO curve ends at FPR {:.4} below {max_fpr}; extended with its last value",
            prev.0
        )),
    })
}
