//! Seeded synthetic texture categories written in the MVTec layout.
//!
//! Each category owns a fixed family of 2 to 4 sinusoidal gratings (orientation,
//! spatial frequency, amplitude, per-channel gain). Normal images draw fresh
//! phases for the family and add low-amplitude Gaussian noise, which makes the
//! class a stationary texture. Defective images paint 1 to 3 elliptical or
//! rectangular regions that either shift intensity by ±[0.2, 0.5] or redraw
//! the grating phases inside the region.

use std::f32::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{load_mvtec_category, validate_side, DatasetIndex, GroundTruthMask, ImageTensor, CHANNELS, GOOD};
use crate::error::{Error, Result};

const NOISE_SIGMA: f32 = 0.02;
const BASE_LEVEL: f32 = 0.5;
const SHIFT_RANGE: (f32, f32) = (0.2, 0.5);
const DEFECT_SIDE_RANGE: (f32, f32) = (0.10, 0.25);

pub const INTENSITY_SHIFT: &str = "intensity_shift";
pub const PHASE_SCRAMBLE: &str = "phase_scramble";

/// Parameters of one generated category.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub category: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_good_test: usize,
    pub n_defect_test: usize,
    pub image_side: usize,
}

#[derive(Clone, Copy, Debug)]
struct Grating {
    /// unit direction of the wave vector
    dir: (f32, f32),
    /// cycles per image side
    cycles: f32,
    amplitude: f32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DefectShape {
    Rect { x: usize, y: usize, w: usize, h: usize },
    Ellipse { cx: f32, cy: f32, rx: f32, ry: f32 },
}

impl DefectShape {
    /// Pixel membership, sampled at the pixel centre.
    pub fn contains(&self, y: usize, x: usize) -> bool {
        match *self {
            DefectShape::Rect { x: x0, y: y0, w, h } => x >= x0 && x < x0 + w && y >= y0 && y < y0 + h,
            DefectShape::Ellipse { cx, cy, rx, ry } => {
                let dx = (x as f32 + 0.5 - cx) / rx;
                let dy = (y as f32 + 0.5 - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DefectKind {
    Shift(f32),
    Scramble,
}

/// A rendered defective sample together with its defect-free twin.
#[derive(Clone, Debug)]
pub struct DefectiveSample {
    pub clean: ImageTensor,
    pub defective: ImageTensor,
    pub mask: GroundTruthMask,
    pub regions: Vec<DefectShape>,
    pub kind: DefectKind,
}

/// The texture family of one category.
#[derive(Clone, Debug)]
pub struct TextureFamily {
    side: usize,
    gratings: Vec<Grating>,
    gains: [f32; CHANNELS],
    offsets: [f32; CHANNELS],
}

impl TextureFamily {
    pub fn sample<R: Rng>(rng: &mut R, side: usize) -> Self {
        let n = rng.random_range(2..=4);
        let gratings = (0..n)
            .map(|_| {
                let theta = rng.random_range(0.0..std::f32::consts::PI);
                Grating {
                    dir: (theta.cos(), theta.sin()),
                    cycles: rng.random_range(2.0..6.0),
                    amplitude: rng.random_range(0.05..0.12),
                }
            })
            .collect();
        let gains = std::array::from_fn(|_| rng.random_range(0.7..1.0));
        let offsets = std::array::from_fn(|_| rng.random_range(-0.08..0.08));
        TextureFamily {
            side,
            gratings,
            gains,
            offsets,
        }
    }

    fn random_phases<R: Rng>(&self, rng: &mut R) -> Vec<f32> {
        self.gratings.iter().map(|_| rng.random_range(0.0..TAU)).collect()
    }

    fn pattern(&self, phases: &[f32], y: usize, x: usize) -> f32 {
        let s = self.side as f32;
        self.gratings
            .iter()
            .zip(phases)
            .map(|(g, &p)| {
                let proj = (g.dir.0 * x as f32 + g.dir.1 * y as f32) / s;
                g.amplitude * (TAU * g.cycles * proj + p).sin()
            })
            .sum()
    }

    fn pixel(&self, c: usize, pattern: f32, noise: f32) -> f32 {
        (BASE_LEVEL + self.offsets[c] + self.gains[c] * pattern + noise).clamp(0.0, 1.0)
    }

    /// Renders a normal image. Returns the per-pixel noise as well so a
    /// defective twin can reuse it.
    fn render_with_noise<R: Rng>(&self, rng: &mut R) -> (ImageTensor, Vec<f32>, Vec<f32>) {
        let side = self.side;
        let phases = self.random_phases(rng);
        let normal = Normal::new(0.0f32, NOISE_SIGMA).expect("valid sigma");
        let noise: Vec<f32> = (0..CHANNELS * side * side).map(|_| normal.sample(rng)).collect();
        let mut data = vec![0.0; CHANNELS * side * side];
        for y in 0..side {
            for x in 0..side {
                let p = self.pattern(&phases, y, x);
                for c in 0..CHANNELS {
                    let i = (c * side + y) * side + x;
                    data[i] = self.pixel(c, p, noise[i]);
                }
            }
        }
        let img = ImageTensor::new(side, side, data).expect("values clamped");
        (img, phases, noise)
    }

    pub fn render_normal<R: Rng>(&self, rng: &mut R) -> ImageTensor {
        self.render_with_noise(rng).0
    }

    pub fn render_defective<R: Rng>(&self, rng: &mut R) -> DefectiveSample {
        let side = self.side;
        let (clean, phases, noise) = self.render_with_noise(rng);
        let n_regions = rng.random_range(1..=3);
        let regions: Vec<DefectShape> = (0..n_regions).map(|_| sample_shape(rng, side)).collect();
        let kind = if rng.random_bool(0.5) {
            let mag = rng.random_range(SHIFT_RANGE.0..=SHIFT_RANGE.1);
            DefectKind::Shift(if rng.random_bool(0.5) { mag } else { -mag })
        } else {
            DefectKind::Scramble
        };
        // Redrawn phases are pushed at least a quarter turn away so the
        // scrambled texture is visibly different.
        let scrambled: Vec<f32> = phases
            .iter()
            .map(|&p| p + rng.random_range(0.25 * TAU..0.75 * TAU))
            .collect();

        let mut data = clean.data().to_vec();
        let mut mask = vec![0u8; side * side];
        for y in 0..side {
            for x in 0..side {
                if !regions.iter().any(|r| r.contains(y, x)) {
                    continue;
                }
                mask[y * side + x] = 1;
                let p = self.pattern(&scrambled, y, x);
                for c in 0..CHANNELS {
                    let i = (c * side + y) * side + x;
                    data[i] = match kind {
                        DefectKind::Shift(d) => (data[i] + d).clamp(0.0, 1.0),
                        DefectKind::Scramble => self.pixel(c, p, noise[i]),
                    };
                }
            }
        }
        DefectiveSample {
            clean,
            defective: ImageTensor::new(side, side, data).expect("values clamped"),
            mask: GroundTruthMask::new(side, side, mask).expect("binary mask"),
            regions,
            kind,
        }
    }
}

fn sample_shape<R: Rng>(rng: &mut R, side: usize) -> DefectShape {
    let s = side as f32;
    let mut extent = || {
        let e = (rng.random_range(DEFECT_SIDE_RANGE.0..=DEFECT_SIDE_RANGE.1) * s).round() as usize;
        e.clamp(2, side)
    };
    let (w, h) = (extent(), extent());
    let x = rng.random_range(0..=side - w);
    let y = rng.random_range(0..=side - h);
    if rng.random_bool(0.5) {
        DefectShape::Rect { x, y, w, h }
    } else {
        DefectShape::Ellipse {
            cx: x as f32 + w as f32 / 2.0,
            cy: y as f32 + h as f32 / 2.0,
            rx: w as f32 / 2.0,
            ry: h as f32 / 2.0,
        }
    }
}

/// Stable 64-bit FNV-1a, used to give each category name its own stream.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn category_rng(spec: &SyntheticSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(spec.category.as_bytes()))
}

fn save_rgb(img: &ImageTensor, path: &Path) -> Result<()> {
    img.to_rgb8().save(path).map_err(|source| Error::Encode {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes one synthetic category under `out_root/<category>` and returns its
/// index. Output is a pure function of `spec`.
pub fn generate_synthetic_category(out_root: &Path, spec: &SyntheticSpec) -> Result<DatasetIndex> {
    validate_side(spec.image_side)?;
    if spec.n_train == 0 {
        return Err(Error::Config("synthetic category needs at least one training image".into()));
    }
    let mut rng = category_rng(spec);
    let family = TextureFamily::sample(&mut rng, spec.image_side);
    let base = out_root.join(&spec.category);

    let train_dir = base.join("train").join(GOOD);
    create_dir(&train_dir)?;
    for i in 0..spec.n_train {
        save_rgb(&family.render_normal(&mut rng), &train_dir.join(format!("{i:03}.png")))?;
    }

    let good_dir = base.join("test").join(GOOD);
    create_dir(&good_dir)?;
    for i in 0..spec.n_good_test {
        save_rgb(&family.render_normal(&mut rng), &good_dir.join(format!("{i:03}.png")))?;
    }

    for i in 0..spec.n_defect_test {
        let sample = family.render_defective(&mut rng);
        let defect_type = match sample.kind {
            DefectKind::Shift(_) => INTENSITY_SHIFT,
            DefectKind::Scramble => PHASE_SCRAMBLE,
        };
        let img_dir = base.join("test").join(defect_type);
        let mask_dir = base.join("ground_truth").join(defect_type);
        create_dir(&img_dir)?;
        create_dir(&mask_dir)?;
        save_rgb(&sample.defective, &img_dir.join(format!("{i:03}.png")))?;
        let mask_path = mask_dir.join(format!("{i:03}_mask.png"));
        sample.mask.to_luma8().save(&mask_path).map_err(|source| Error::Encode {
            path: mask_path.clone(),
            source,
        })?;
    }

    load_mvtec_category(out_root, &spec.category, spec.image_side)
}
