//! Residual anomaly maps and image scores.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;

use crate::autoencoder::ModelParams;
use crate::dataset::{self, DatasetIndex, GroundTruthMask, ImageTensor, CHANNELS};
use crate::error::{Error, Result};

pub const MAP_MAGIC: &[u8; 6] = b"D3RMAP";

/// Per-pixel residual field with its image-level score (the field maximum).
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    image_score: f64,
}

impl AnomalyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(&[height, width], &[values.len()]));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!("anomaly value {v} is not a finite nonnegative number")));
        }
        let image_score = values.iter().copied().fold(0.0, f64::max);
        Ok(AnomalyMap {
            height,
            width,
            values,
            image_score,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn image_score(&self) -> f64 {
        self.image_score
    }

    /// 8-bit rendering, `round(clamp(v, 0, 1) * 255)`.
    pub fn to_luma8(&self) -> GrayImage {
        let px = self
            .values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, px).expect("buffer size")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8().save(path).map_err(|source| Error::Encode {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Raw little-endian layout: magic, `H` and `W` as u32, then `H*W` f32.
    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + 4 * self.values.len());
        out.extend_from_slice(MAP_MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_raw_bytes(buf: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("raw anomaly map: {msg}"));
        if buf.len() < 14 || &buf[..6] != MAP_MAGIC {
            return Err(bad("missing header"));
        }
        let h = u32::from_le_bytes(buf[6..10].try_into().expect("4 bytes")) as usize;
        let w = u32::from_le_bytes(buf[10..14].try_into().expect("4 bytes")) as usize;
        let body = &buf[14..];
        if Some(body.len()) != h.checked_mul(w).and_then(|n| n.checked_mul(4)) {
            return Err(bad("payload size does not match header"));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        Self::new(h, w, values)
    }

    pub fn save_raw(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_raw_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_raw(path: &Path) -> Result<Self> {
        Self::from_raw_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Channel mean of `|input - recon|`.
pub fn anomaly_map(input: &ImageTensor, recon: &ImageTensor) -> Result<AnomalyMap> {
    if input.shape() != recon.shape() {
        return Err(Error::shape(&input.shape(), &recon.shape()));
    }
    let (h, w) = (input.height(), input.width());
    let plane = h * w;
    let mut values = vec![0.0f64; plane];
    for c in 0..CHANNELS {
        let a = &input.data()[c * plane..(c + 1) * plane];
        let b = &recon.data()[c * plane..(c + 1) * plane];
        for ((v, &x), &r) in values.iter_mut().zip(a).zip(b) {
            *v += (f64::from(x) - f64::from(r)).abs();
        }
    }
    for v in &mut values {
        *v /= CHANNELS as f64;
    }
    AnomalyMap::new(h, w, values)
}

/// Inference-mode reconstruction of a single image.
pub fn reconstruct(params: &ModelParams<f32>, image: &ImageTensor) -> Result<ImageTensor> {
    let out = params.forward_eval(&dataset::stack(&[image])?)?;
    Ok(dataset::unstack(&out)?.pop().expect("one image"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredImage {
    pub map: AnomalyMap,
    pub label: bool,
    pub mask: GroundTruthMask,
}

/// Scores already-decoded test images. Labels come from `anomalous`.
pub fn score_images(
    params: &ModelParams<f32>,
    images: &[(ImageTensor, GroundTruthMask)],
    anomalous: &[bool],
) -> Result<Vec<ScoredImage>> {
    if images.len() != anomalous.len() {
        return Err(Error::InvalidInput(format!(
            "{} images but {} labels",
            images.len(),
            anomalous.len()
        )));
    }
    images
        .par_iter()
        .zip(anomalous)
        .map(|((img, mask), &label)| {
            let map = anomaly_map(img, &reconstruct(params, img)?)?;
            Ok(ScoredImage {
                map,
                label,
                mask: mask.clone(),
            })
        })
        .collect()
}

/// Decodes and scores the whole test split in index order.
pub fn score_test_set(params: &ModelParams<f32>, index: &DatasetIndex) -> Result<Vec<ScoredImage>> {
    let images = dataset::load_test_set(index)?;
    let labels: Vec<bool> = index.test.iter().map(|s| s.is_anomalous()).collect();
    score_images(params, &images, &labels)
}

/// Global min-max rescaling to `[0, 1]` over every map of the set. A
/// constant set maps to all zeros.
pub fn normalize_maps(maps: &[AnomalyMap]) -> Result<Vec<AnomalyMap>> {
    if maps.is_empty() {
        return Err(Error::InvalidInput("no anomaly maps to normalize".into()));
    }
    let all = || maps.iter().flat_map(|m| m.values.iter().copied());
    let lo = all().fold(f64::INFINITY, f64::min);
    let hi = all().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    maps.iter()
        .map(|m| {
            let values = m
                .values
                .iter()
                .map(|&v| if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 })
                .collect();
            AnomalyMap::new(m.height, m.width, values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(values: &[f32]) -> ImageTensor {
        ImageTensor::new(1, values.len() / 3, values.to_vec()).unwrap()
    }

    #[test]
    fn identical_images_give_zero_map() {
        let a = ImageTensor::filled(4, 4, 0.3).unwrap();
        let m = anomaly_map(&a, &a).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        assert_eq!(m.image_score(), 0.0);
    }

    #[test]
    fn single_channel_difference_is_averaged() {
        let a = img(&[0.9, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = img(&[0.0; 6]);
        let m = anomaly_map(&a, &b).unwrap();
        assert!((m.values()[0] - f64::from(0.9f32) / 3.0).abs() < 1e-12);
        assert_eq!(m.values()[1], 0.0);
        assert_eq!(m.image_score(), m.values()[0]);
    }

    #[test]
    fn normalization_rules() {
        let a = AnomalyMap::new(1, 2, vec![0.2, 0.4]).unwrap();
        let b = AnomalyMap::new(1, 2, vec![0.6, 0.3]).unwrap();
        let n = normalize_maps(&[a, b]).unwrap();
        assert!((n[0].values()[1] - 0.5).abs() < 1e-12);
        assert_eq!(n[0].values()[0], 0.0);
        assert_eq!(n[1].image_score(), 1.0);
        let c = AnomalyMap::new(2, 1, vec![0.7, 0.7]).unwrap();
        assert!(normalize_maps(&[c]).unwrap()[0].values().iter().all(|&v| v == 0.0));
        assert!(normalize_maps(&[]).is_err());
    }

    #[test]
    fn raw_round_trip_and_rejection() {
        let m = AnomalyMap::new(2, 3, vec![0.0, 0.25, 0.5, 1.0, 2.0, 0.125]).unwrap();
        let bytes = m.to_raw_bytes();
        assert_eq!(&bytes[..6], b"D3RMAP");
        assert_eq!(AnomalyMap::from_raw_bytes(&bytes).unwrap(), m);
        assert!(AnomalyMap::from_raw_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn png_rendering_rounds() {
        let m = AnomalyMap::new(1, 3, vec![0.0, 0.5, 1.5]).unwrap();
        assert_eq!(m.to_luma8().into_raw(), vec![0, 128, 255]);
    }

    #[test]
    fn rejects_negative_values() {
        assert!(AnomalyMap::new(1, 1, vec![-0.1]).is_err());
        assert!(AnomalyMap::new(1, 2, vec![0.1]).is_err());
    }
}
