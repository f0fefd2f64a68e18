//! Detection and localization metrics.

mod pro;
mod ranking;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autoencoder::ModelParams;
use crate::dataset::{self, DatasetIndex, GroundTruthMask, ImageTensor};
use crate::error::{Error, Result};
use crate::scoring::{reconstruct, AnomalyMap};

pub use pro::{
    connected_components, pro_auc, pro_curve, threshold_grid, ProAuc, ProCurve, DEFAULT_MAX_FPR, DEFAULT_THRESHOLDS,
};
pub use ranking::{average_precision, roc_auc, roc_curve, RocCurve, ScoredSet};

/// Every pixel of every map pooled into one scored set.
pub fn pooled_pixels(maps: &[AnomalyMap], masks: &[GroundTruthMask]) -> Result<ScoredSet> {
    if maps.len() != masks.len() {
        return Err(Error::InvalidInput(format!("{} maps but {} masks", maps.len(), masks.len())));
    }
    let total: usize = maps.iter().map(|m| m.values().len()).sum();
    let mut scores = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (map, mask) in maps.iter().zip(masks) {
        if (map.height(), map.width()) != (mask.height(), mask.width()) {
            return Err(Error::shape(&[mask.height(), mask.width()], &[map.height(), map.width()]));
        }
        scores.extend_from_slice(map.values());
        labels.extend(mask.data().iter().map(|&m| m != 0));
    }
    ScoredSet::new(scores, labels)
}

/// Pixel-level `(roc_auc, average_precision)`.
pub fn pixel_metrics(maps: &[AnomalyMap], masks: &[GroundTruthMask]) -> Result<(f64, f64)> {
    let set = pooled_pixels(maps, masks)?;
    Ok((roc_auc(&set)?, average_precision(&set)?))
}

/// Images per second of inference-mode reconstruction on pre-decoded images.
/// One untimed warm-up pass runs first.
pub fn throughput_images(params: &ModelParams<f32>, images: &[ImageTensor]) -> Result<f64> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("throughput needs at least one image".into()))?;
    reconstruct(params, first)?;
    let start = Instant::now();
    for img in images {
        reconstruct(params, img)?;
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    Ok(images.len() as f64 / secs)
}

pub fn throughput(params: &ModelParams<f32>, index: &DatasetIndex) -> Result<f64> {
    let images: Vec<ImageTensor> = dataset::load_test_set(index)?.into_iter().map(|(i, _)| i).collect();
    throughput_images(params, &images)
}

/// One row of results. Metrics that are undefined for the data (for example
/// a test split without defects) are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub category: String,
    pub method: String,
    pub img_auc: Option<f64>,
    pub img_ap: Option<f64>,
    pub px_auc: Option<f64>,
    pub px_ap: Option<f64>,
    pub pro_auc: Option<f64>,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Maps undefined-metric errors to `None` plus a warning; other errors pass
/// through.
pub fn defined<T>(r: Result<T>, warnings: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(msg)) => {
            warnings.push(msg);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for ((t, f), p) in curve.thresholds.iter().zip(&curve.fprs).zip(&curve.tprs) {
        writeln!(s, "{t},{f},{p}").expect("string write");
    }
    s
}

pub fn pro_csv(curve: &ProCurve) -> String {
    let mut s = String::from("threshold,fpr,pro\n");
    for ((t, f), p) in curve.thresholds.iter().zip(&curve.fprs).zip(&curve.pros) {
        writeln!(s, "{t},{f},{p}").expect("string write");
    }
    s
}

pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    write_text(path, &roc_csv(curve))
}

pub fn write_pro_csv(curve: &ProCurve, path: &Path) -> Result<()> {
    write_text(path, &pro_csv(curve))
}
