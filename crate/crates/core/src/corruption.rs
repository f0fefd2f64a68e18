//! On-the-fly synthetic corruption for the healing task.
//!
//! A clean image is corrupted with probability `probability`; when it is, `K`
//! rectangles (uniform on `1..=max_regions`) are sampled and each receives one
//! of three operators: constant occlusion, additive Gaussian noise with
//! clipping, or a convex blend with the same region of another image from the
//! minibatch. Regions may overlap; later operators overwrite earlier ones.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruthMask, ImageTensor, CHANNELS};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    /// Chance that an image is corrupted at all.
    pub probability: f64,
    pub max_regions: usize,
    /// Region side length as a fraction of the image side.
    pub side_fraction_range: (f64, f64),
    pub fill_intensity_range: (f64, f64),
    pub noise_sigma: f64,
    pub blend_alpha_range: (f64, f64),
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            probability: 0.5,
            max_regions: 3,
            side_fraction_range: (0.05, 0.20),
            fill_intensity_range: (0.0, 1.0),
            noise_sigma: 0.2,
            blend_alpha_range: (0.3, 0.9),
        }
    }
}

impl CorruptionConfig {
    /// A configuration that never corrupts anything.
    pub fn disabled() -> Self {
        CorruptionConfig {
            probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("corruption: {msg}")));
        if !(0.0..=1.0).contains(&self.probability) {
            return bad("probability must lie in [0, 1]");
        }
        if self.max_regions < 1 {
            return bad("max_regions must be at least 1");
        }
        let range_ok = |(lo, hi): (f64, f64), max: f64| lo > 0.0 && lo <= hi && hi <= max;
        if !range_ok(self.side_fraction_range, 1.0) {
            return bad("side_fraction_range must satisfy 0 < low <= high <= 1");
        }
        let (flo, fhi) = self.fill_intensity_range;
        if !(0.0 <= flo && flo <= fhi && fhi <= 1.0) {
            return bad("fill_intensity_range must satisfy 0 <= low <= high <= 1");
        }
        if !range_ok(self.blend_alpha_range, 1.0) {
            return bad("blend_alpha_range must satisfy 0 < low <= high <= 1");
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionKind {
    Occlusion { fill: f32 },
    Noise { sigma: f32 },
    /// `donor` counts the *other* images of the batch: slot `k` is the `k`-th
    /// image after skipping the corrupted image itself.
    Foreign { donor: usize, alpha: f32 },
}

/// An axis-aligned region fully inside the image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSpec {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub kind: RegionKind,
}

impl RegionSpec {
    fn check(&self, height: usize, width: usize) {
        assert!(
            self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height,
            "region {self:?} outside {height}x{width} image"
        );
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn side_length<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64), side: usize) -> usize {
    let len = uniform(rng, (range.0 * side as f64, range.1 * side as f64)).round() as usize;
    len.clamp(1, side)
}

/// Samples the regions for one image. `donors` is the number of other images
/// available for foreign patches; with none, the foreign kind falls back to a
/// noise patch.
pub fn sample_regions<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &CorruptionConfig,
    height: usize,
    width: usize,
    donors: usize,
) -> Vec<RegionSpec> {
    if !rng.random_bool(cfg.probability) {
        return Vec::new();
    }
    let k = rng.random_range(1..=cfg.max_regions);
    (0..k)
        .map(|_| {
            let w = side_length(rng, cfg.side_fraction_range, width);
            let h = side_length(rng, cfg.side_fraction_range, height);
            let x = rng.random_range(0..=width - w);
            let y = rng.random_range(0..=height - h);
            let kind = match rng.random_range(0..3u8) {
                0 => RegionKind::Occlusion {
                    fill: uniform(rng, cfg.fill_intensity_range) as f32,
                },
                2 if donors > 0 => RegionKind::Foreign {
                    donor: rng.random_range(0..donors),
                    alpha: uniform(rng, cfg.blend_alpha_range) as f32,
                },
                _ => RegionKind::Noise {
                    sigma: cfg.noise_sigma as f32,
                },
            };
            RegionSpec { x, y, w, h, kind }
        })
        .collect()
}

fn for_region(img: &mut ImageTensor, region: &RegionSpec, mut f: impl FnMut(usize, f32) -> f32) {
    region.check(img.height(), img.width());
    let (h, w) = (img.height(), img.width());
    let data = img.data_mut();
    for c in 0..CHANNELS {
        for y in region.y..region.y + region.h {
            let row = (c * h + y) * w;
            for i in row + region.x..row + region.x + region.w {
                data[i] = f(i, data[i]).clamp(0.0, 1.0);
            }
        }
    }
}

fn occlude(img: &mut ImageTensor, region: &RegionSpec, fill: f32) {
    for_region(img, region, |_, _| fill);
}

fn add_noise<R: Rng + ?Sized>(img: &mut ImageTensor, region: &RegionSpec, sigma: f32, rng: &mut R) {
    let normal = Normal::new(0.0f32, sigma).expect("finite positive sigma");
    for_region(img, region, |_, v| v + normal.sample(rng));
}

fn blend(img: &mut ImageTensor, donor: &ImageTensor, region: &RegionSpec, alpha: f32) {
    assert_eq!(img.shape(), donor.shape(), "donor must match image shape");
    let src = donor.data();
    for_region(img, region, |i, v| (1.0 - alpha) * v + alpha * src[i]);
}

/// Overwrites the region with a constant on every channel.
pub fn apply_occlusion(img: &ImageTensor, region: &RegionSpec, fill: f32) -> ImageTensor {
    let mut out = img.clone();
    occlude(&mut out, region, fill.clamp(0.0, 1.0));
    out
}

/// Adds i.i.d. `N(0, sigma^2)` noise inside the region and clips to `[0, 1]`.
pub fn apply_noise_patch<R: Rng + ?Sized>(
    img: &ImageTensor,
    region: &RegionSpec,
    sigma: f32,
    rng: &mut R,
) -> ImageTensor {
    let mut out = img.clone();
    add_noise(&mut out, region, sigma, rng);
    out
}

/// Convex blend `(1 - alpha) * img + alpha * donor` inside the region, using
/// the same coordinates in the donor.
pub fn apply_foreign_patch(img: &ImageTensor, donor: &ImageTensor, region: &RegionSpec, alpha: f32) -> ImageTensor {
    let mut out = img.clone();
    blend(&mut out, donor, region, alpha);
    out
}

/// Output of [`corrupt_batch`].
#[derive(Clone, Debug)]
pub struct CorruptedBatch {
    pub images: Vec<ImageTensor>,
    /// Union of corrupted regions per image.
    pub masks: Vec<GroundTruthMask>,
    /// Number of region operators applied across the batch.
    pub operators_applied: usize,
}

/// Corrupts each image with its own random stream. Donors are always taken
/// from the clean batch.
pub fn corrupt_batch_with_streams<R: Rng>(
    batch: &[ImageTensor],
    cfg: &CorruptionConfig,
    streams: &mut [R],
) -> CorruptedBatch {
    assert_eq!(batch.len(), streams.len(), "one stream per image");
    let donors = batch.len().saturating_sub(1);
    let mut images = Vec::with_capacity(batch.len());
    let mut masks = Vec::with_capacity(batch.len());
    let mut operators_applied = 0;
    for (i, (clean, rng)) in batch.iter().zip(streams.iter_mut()).enumerate() {
        let (h, w) = (clean.height(), clean.width());
        let regions = sample_regions(rng, cfg, h, w, donors);
        let mut img = clean.clone();
        let mut mask = vec![0u8; h * w];
        for region in &regions {
            match region.kind {
                RegionKind::Occlusion { fill } => occlude(&mut img, region, fill),
                RegionKind::Noise { sigma } => add_noise(&mut img, region, sigma, rng),
                RegionKind::Foreign { donor, alpha } => {
                    let j = if donor >= i { donor + 1 } else { donor };
                    blend(&mut img, &batch[j], region, alpha);
                }
            }
            for y in region.y..region.y + region.h {
                mask[y * w + region.x..y * w + region.x + region.w].fill(1);
            }
            operators_applied += 1;
        }
        images.push(img);
        masks.push(GroundTruthMask::new(h, w, mask).expect("binary mask"));
    }
    CorruptedBatch {
        images,
        masks,
        operators_applied,
    }
}

/// Corrupts a batch, splitting `rng` into one sub-stream per image.
pub fn corrupt_batch<R: RngCore>(batch: &[ImageTensor], cfg: &CorruptionConfig, rng: &mut R) -> CorruptedBatch {
    let mut streams: Vec<_> = (0..batch.len())
        .map(|_| rng::stream(&[rng::tag::CORRUPT, rng.next_u64()]))
        .collect();
    corrupt_batch_with_streams(batch, cfg, &mut streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageTensor {
        ImageTensor::new(h, w, (0..3 * h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
    }

    fn region(x: usize, y: usize, w: usize, h: usize) -> RegionSpec {
        RegionSpec {
            x,
            y,
            w,
            h,
            kind: RegionKind::Occlusion { fill: 0.0 },
        }
    }

    #[test]
    fn probability_zero_never_samples() {
        let cfg = CorruptionConfig::disabled();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(sample_regions(&mut rng, &cfg, 64, 64, 7).is_empty());
        }
    }

    #[test]
    fn single_region_cap() {
        let cfg = CorruptionConfig {
            max_regions: 1,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(sample_regions(&mut rng, &cfg, 64, 48, 3).len() <= 1);
        }
    }

    #[test]
    fn empty_fraction_matches_probability() {
        let cfg = CorruptionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let empty = (0..10_000)
            .filter(|_| sample_regions(&mut rng, &cfg, 64, 64, 7).is_empty())
            .count();
        let frac = empty as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "empty fraction {frac}");
    }

    #[test]
    fn sampled_regions_stay_inside() {
        let cfg = CorruptionConfig {
            probability: 1.0,
            side_fraction_range: (0.5, 1.0),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            for r in sample_regions(&mut rng, &cfg, 17, 33, 0) {
                assert!(r.w >= 1 && r.h >= 1 && r.x + r.w <= 33 && r.y + r.h <= 17);
                assert!(!matches!(r.kind, RegionKind::Foreign { .. }));
            }
        }
    }

    #[test]
    fn occlusion_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = random_image(&mut rng, 16, 16);
        let all = apply_occlusion(&img, &region(0, 0, 16, 16), 0.0);
        assert!(all.data().iter().all(|&v| v == 0.0));

        let one = apply_occlusion(&img, &region(5, 7, 1, 1), 0.0);
        let changed = img.data().iter().zip(one.data()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 3);
        for c in 0..3 {
            assert_eq!(one.at(c, 7, 5), 0.0);
        }

        let half = apply_occlusion(&img, &region(3, 3, 4, 4), 0.5);
        let mut sum = 0.0;
        for c in 0..3 {
            for y in 3..7 {
                for x in 3..7 {
                    sum += half.at(c, y, x);
                }
            }
        }
        assert_eq!(sum / 48.0, 0.5);
    }

    #[test]
    fn noise_patch_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 32, 32);
        let r = region(2, 3, 20, 10);
        let tiny = apply_noise_patch(&img, &r, 1e-9, &mut rng);
        for (a, b) in img.data().iter().zip(tiny.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        let loud = apply_noise_patch(&img, &r, 5.0, &mut rng);
        assert!(loud.data().iter().all(|v| (0.0..=1.0).contains(v)));
        for y in 0..32 {
            for x in 0..32 {
                if !r.contains(y, x) {
                    assert_eq!(loud.at(0, y, x), img.at(0, y, x));
                }
            }
        }

        let flat = ImageTensor::filled(64, 64, 0.5).unwrap();
        let noisy = apply_noise_patch(&flat, &region(0, 0, 64, 64), 0.2, &mut rng);
        let n = noisy.data().len() as f64;
        let mean = noisy.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = noisy.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        assert!((0.18..=0.22).contains(&sd), "sd {sd}");
    }

    #[test]
    fn foreign_patch_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 16, 16);
        let donor = random_image(&mut rng, 16, 16);
        let r = region(4, 4, 8, 6);
        assert_eq!(apply_foreign_patch(&img, &donor, &r, 0.0), img);
        let full = apply_foreign_patch(&img, &donor, &r, 1.0);
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..16 {
                    let expect = if r.contains(y, x) { donor.at(c, y, x) } else { img.at(c, y, x) };
                    assert_eq!(full.at(c, y, x), expect);
                }
            }
        }
        let a = ImageTensor::filled(16, 16, 0.2).unwrap();
        let b = ImageTensor::filled(16, 16, 0.8).unwrap();
        let mid = apply_foreign_patch(&a, &b, &r, 0.5);
        assert!((mid.at(1, 5, 5) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn disabled_batch_is_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch: Vec<_> = (0..4).map(|_| random_image(&mut rng, 16, 16)).collect();
        let out = corrupt_batch(&batch, &CorruptionConfig::disabled(), &mut rng);
        assert_eq!(out.images, batch);
        assert!(out.masks.iter().all(|m| m.positives() == 0));
        assert_eq!(out.operators_applied, 0);
    }

    #[test]
    fn corrupted_area_fraction_is_bracketed() {
        let cfg = CorruptionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch: Vec<_> = (0..2).map(|_| random_image(&mut rng, 64, 64)).collect();
        let mut total = 0.0;
        let mut n = 0.0;
        for _ in 0..500 {
            let out = corrupt_batch(&batch, &cfg, &mut rng);
            for m in &out.masks {
                total += m.positives() as f64 / (64.0 * 64.0);
                n += 1.0;
            }
        }
        let mean = total / n;
        let (lo, hi) = cfg.side_fraction_range;
        assert!(mean >= 0.5 * lo * lo && mean <= 0.5 * 3.0 * hi * hi, "mean fraction {mean}");
    }
}
