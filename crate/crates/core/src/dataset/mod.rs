//! Image and mask ingestion for MVTec-AD style category trees, plus a seeded
//! generator of synthetic texture categories in the same layout.
//!
//! Layout consumed and produced:
//!
//! ```text
//! <root>/<category>/train/good/*.png
//! <root>/<category>/test/<defect_type>/*.png      ("good" = normal)
//! <root>/<category>/ground_truth/<defect_type>/<stem>_mask.png
//! ```
//!
//! All enumeration is in lexicographic byte order of the full paths.

mod resize;
pub mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use resize::{bilinear, nearest};
pub use synthetic::{generate_synthetic_category, SyntheticSpec};

pub const CHANNELS: usize = 3;
pub const GOOD: &str = "good";

/// A 3-channel image in planar (channel, row, column) order with every value
/// in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != CHANNELS * height * width {
            return Err(Error::shape(
                &[CHANNELS, height, width],
                &[data.len()],
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "image value {v} outside [0, 1]"
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            data,
        })
    }

    /// Builds an image by clamping arbitrary values into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; CHANNELS * height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [CHANNELS, self.height, self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable access for in-place operators. Callers must keep values in
    /// `[0, 1]`.
    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let plane = self.height * self.width;
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let i = y as usize * self.width + x as usize;
            image::Rgb(std::array::from_fn(|c| quantize(self.data[c * plane + i])))
        })
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let plane = w * h;
        let mut data = vec![0.0; CHANNELS * plane];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..CHANNELS {
                data[c * plane + i] = px.0[c] as f32 / 255.0;
            }
        }
        ImageTensor {
            height: h,
            width: w,
            data,
        }
    }
}

pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Stacks images into an `(n, 3, h, w)` batch.
pub fn stack(images: &[&ImageTensor]) -> Result<Tensor<f32>> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot stack an empty batch".into()))?;
    let mut data = Vec::with_capacity(images.len() * first.data.len());
    for img in images {
        if img.shape() != first.shape() {
            return Err(Error::shape(&first.shape(), &img.shape()));
        }
        data.extend_from_slice(&img.data);
    }
    Tensor::from_vec(&[images.len(), CHANNELS, first.height, first.width], data)
}

/// Splits a `(n, 3, h, w)` batch back into images, clamping into `[0, 1]`.
pub fn unstack(batch: &Tensor<f32>) -> Result<Vec<ImageTensor>> {
    let (n, c, h, w) = batch.dims4()?;
    if c != CHANNELS {
        return Err(Error::shape(&[n, CHANNELS, h, w], batch.shape()));
    }
    (0..n)
        .map(|i| ImageTensor::from_clamped(h, w, batch.sample(i).to_vec()))
        .collect()
}

/// Binary per-pixel ground truth (0 normal, 1 anomalous).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl GroundTruthMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(&[height, width], &[data.len()]));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("mask values must be 0 or 1".into()));
        }
        Ok(GroundTruthMask {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        GroundTruthMask {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn positives(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_luma8(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([self.data[y as usize * self.width + x as usize] * 255])
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSample {
    pub path: PathBuf,
    pub defect_type: String,
    pub mask_path: Option<PathBuf>,
}

impl TestSample {
    pub fn is_anomalous(&self) -> bool {
        self.defect_type != GOOD
    }
}

/// Enumerated contents of one category.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub category: String,
    pub train: Vec<PathBuf>,
    pub test: Vec<TestSample>,
    pub image_side: usize,
}

pub fn validate_side(image_side: usize) -> Result<()> {
    if image_side == 0 || image_side % 16 != 0 {
        return Err(Error::Config(format!(
            "image side {image_side} must be a positive multiple of 16"
        )));
    }
    Ok(())
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    sort_paths(&mut out);
    Ok(out)
}

fn sort_paths(paths: &mut [PathBuf]) {
    paths.sort_by(|a, b| a.as_os_str().as_encoded_bytes().cmp(b.as_os_str().as_encoded_bytes()));
}

/// Enumerates one category of an MVTec-AD style tree.
pub fn load_mvtec_category(root: &Path, category: &str, image_side: usize) -> Result<DatasetIndex> {
    validate_side(image_side)?;
    let base = root.join(category);
    if !base.is_dir() {
        return Err(Error::Config(format!(
            "category directory {} does not exist",
            base.display()
        )));
    }
    let train_dir = base.join("train").join(GOOD);
    if !train_dir.is_dir() {
        return Err(Error::Integrity(format!(
            "missing training directory {}",
            train_dir.display()
        )));
    }
    let train = png_files(&train_dir)?;
    if train.is_empty() {
        return Err(Error::Integrity(format!(
            "training directory {} holds no PNG files",
            train_dir.display()
        )));
    }

    let test_dir = base.join("test");
    if !test_dir.is_dir() {
        return Err(Error::Integrity(format!(
            "missing test directory {}",
            test_dir.display()
        )));
    }
    let mut test = Vec::new();
    for entry in fs::read_dir(&test_dir).map_err(|e| Error::io(&test_dir, e))? {
        let dir = entry.map_err(|e| Error::io(&test_dir, e))?.path();
        if !dir.is_dir() {
            continue;
        }
        let defect_type = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Integrity(format!("non UTF-8 directory {}", dir.display())))?
            .to_string();
        for path in png_files(&dir)? {
            let mask_path = if defect_type == GOOD {
                None
            } else {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let mask = base
                    .join("ground_truth")
                    .join(&defect_type)
                    .join(format!("{stem}_mask.png"));
                if !mask.is_file() {
                    return Err(Error::Integrity(format!(
                        "defective sample {} has no mask at {}",
                        path.display(),
                        mask.display()
                    )));
                }
                Some(mask)
            };
            test.push(TestSample {
                path,
                defect_type: defect_type.clone(),
                mask_path,
            });
        }
    }
    test.sort_by(|a, b| {
        a.path
            .as_os_str()
            .as_encoded_bytes()
            .cmp(b.path.as_os_str().as_encoded_bytes())
    });

    Ok(DatasetIndex {
        category: category.to_string(),
        train,
        test,
        image_side,
    })
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })
}

/// Decodes an 8-bit gray or RGB PNG into a `3 x side x side` tensor.
/// Gray input is replicated across channels; resizing is bilinear.
pub fn decode_and_resize(path: &Path, image_side: usize) -> Result<ImageTensor> {
    let img = open(path)?;
    let (in_w, in_h) = (img.width() as usize, img.height() as usize);
    let planes: Vec<Vec<f32>> = match img {
        DynamicImage::ImageLuma8(g) => {
            let p: Vec<f32> = g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
            vec![p.clone(), p.clone(), p]
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgba8(_) | DynamicImage::ImageRgb8(_) => {
            let rgb = img.into_rgb8();
            let mut planes = vec![Vec::with_capacity(in_w * in_h); CHANNELS];
            for px in rgb.pixels() {
                for (c, plane) in planes.iter_mut().enumerate() {
                    plane.push(px.0[c] as f32 / 255.0);
                }
            }
            planes
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "{}: unsupported pixel format {:?} (8-bit gray or RGB expected)",
                path.display(),
                other.color()
            )))
        }
    };
    let mut data = Vec::with_capacity(CHANNELS * image_side * image_side);
    for plane in &planes {
        data.extend(bilinear(plane, in_h, in_w, image_side, image_side));
    }
    ImageTensor::from_clamped(image_side, image_side, data)
}

/// Loads a ground-truth mask: nearest-neighbour resize, then binarize at
/// `> 127`.
pub fn load_mask(path: &Path, image_side: usize) -> Result<GroundTruthMask> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray: Vec<u8> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageLumaA8(_) => img.into_luma8().into_raw(),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let rgb = img.into_rgb8();
            let mut out = Vec::with_capacity(w * h);
            for px in rgb.pixels() {
                let [r, g, b] = px.0;
                if r != g || g != b {
                    return Err(Error::InvalidInput(format!(
                        "{}: mask channels differ",
                        path.display()
                    )));
                }
                out.push(r);
            }
            out
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "{}: unsupported mask format {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let resized = nearest(&gray, h, w, image_side, image_side);
    let data = resized.into_iter().map(|v| u8::from(v > 127)).collect();
    GroundTruthMask::new(image_side, image_side, data)
}

/// Decodes every training image of the index.
pub fn load_train_images(index: &DatasetIndex) -> Result<Vec<ImageTensor>> {
    index
        .train
        .par_iter()
        .map(|p| decode_and_resize(p, index.image_side))
        .collect()
}

/// Decodes one test sample with its mask; good samples get an all-zero mask.
pub fn load_test_sample(sample: &TestSample, image_side: usize) -> Result<(ImageTensor, GroundTruthMask)> {
    let image = decode_and_resize(&sample.path, image_side)?;
    let mask = match &sample.mask_path {
        Some(m) => load_mask(m, image_side)?,
        None => GroundTruthMask::zeros(image_side, image_side),
    };
    if mask.height() != image.height() || mask.width() != image.width() {
        return Err(Error::Integrity(format!(
            "mask/image size mismatch for {}",
            sample.path.display()
        )));
    }
    Ok((image, mask))
}

/// Decodes the full test split in index order.
pub fn load_test_set(index: &DatasetIndex) -> Result<Vec<(ImageTensor, GroundTruthMask)>> {
    index
        .test
        .par_iter()
        .map(|s| load_test_sample(s, index.image_side))
        .collect()
}
