use crate::autoencoder::ModelParams;
use crate::dataset::{self, DatasetIndex};
use crate::error::Result;
use crate::metrics::{
    average_precision, defined, pixel_metrics, pro_auc, pro_curve, roc_auc, roc_curve, throughput_images,
    MetricsReport, ProCurve, RocCurve, ScoredSet, DEFAULT_MAX_FPR,
};
use crate::scoring::{normalize_maps, score_images, AnomalyMap, ScoredImage};

/// Report plus the intermediate artifacts needed for exports.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub scored: Vec<ScoredImage>,
    pub normalized: Vec<AnomalyMap>,
    pub roc: Option<RocCurve>,
    pub pro: Option<ProCurve>,
}

/// Metric suite over already-scored images. Metrics that the data cannot
/// define are left as `None` with a warning.
pub fn evaluate_scored(
    category: &str,
    method: &str,
    scored: Vec<ScoredImage>,
    n_thresholds: usize,
    fps: f64,
) -> Result<Evaluation> {
    let mut warnings = Vec::new();
    let image_set = ScoredSet::new(
        scored.iter().map(|s| s.map.image_score()).collect(),
        scored.iter().map(|s| s.label).collect(),
    )?;
    let img_auc = defined(roc_auc(&image_set), &mut warnings)?;
    let img_ap = defined(average_precision(&image_set), &mut warnings)?;
    let roc = defined(roc_curve(&image_set), &mut warnings)?;
    let maps: Vec<AnomalyMap> = scored.iter().map(|s| s.map.clone()).collect();
    let masks: Vec<_> = scored.iter().map(|s| s.mask.clone()).collect();
    let px = defined(pixel_metrics(&maps, &masks), &mut warnings)?;
    let normalized = if maps.is_empty() { Vec::new() } else { normalize_maps(&maps)? };
    let pro = defined(pro_curve(&normalized, &masks, n_thresholds), &mut warnings)?;
    let pro_value = match &pro {
        Some(curve) => {
            let area = pro_auc(curve, DEFAULT_MAX_FPR)?;
            warnings.extend(area.warning);
            Some(area.value)
        }
        None => None,
    };
    warnings.dedup();
    Ok(Evaluation {
        report: MetricsReport {
            category: category.to_string(),
            method: method.to_string(),
            img_auc,
            img_ap,
            px_auc: px.map(|p| p.0),
            px_ap: px.map(|p| p.1),
            pro_auc: pro_value,
            fps,
            warnings,
        },
        scored,
        normalized,
        roc,
        pro,
    })
}

/// Scores the test split, computes every metric and measures throughput.
pub fn evaluate_category(
    params: &ModelParams<f32>,
    index: &DatasetIndex,
    method: &str,
    n_thresholds: usize,
) -> Result<Evaluation> {
    let images = dataset::load_test_set(index)?;
    let labels: Vec<bool> = index.test.iter().map(|s| s.is_anomalous()).collect();
    let scored = score_images(params, &images, &labels)?;
    let plain: Vec<_> = images.into_iter().map(|(img, _)| img).collect();
    let fps = throughput_images(params, &plain)?;
    evaluate_scored(&index.category, method, scored, n_thresholds, fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GroundTruthMask;

    fn injected(mask: &[u8], label: bool) -> ScoredImage {
        let m = GroundTruthMask::new(2, 2, mask.to_vec()).unwrap();
        ScoredImage {
            map: AnomalyMap::new(2, 2, mask.iter().map(|&v| f64::from(v)).collect()).unwrap(),
            label,
            mask: m,
        }
    }

    #[test]
    fn maps_equal_to_masks_are_perfect() {
        let scored = vec![injected(&[0, 0, 0, 0], false), injected(&[1, 0, 0, 1], true), injected(&[0, 1, 0, 0], true)];
        let e = evaluate_scored("c", "m", scored, 200, 1.0).unwrap();
        assert_eq!(e.report.px_auc, Some(1.0));
        assert_eq!(e.report.img_auc, Some(1.0));
        assert!((e.report.pro_auc.unwrap() - 1.0).abs() < 1e-12);
        assert!(e.report.warnings.is_empty());
    }

    #[test]
    fn single_class_leaves_fields_empty() {
        let scored = vec![injected(&[0, 0, 0, 0], false), injected(&[0, 0, 0, 0], false)];
        let e = evaluate_scored("c", "m", scored, 10, 1.0).unwrap();
        assert_eq!(e.report.img_auc, None);
        assert_eq!(e.report.pro_auc, None);
        assert!(!e.report.warnings.is_empty());
    }
}
