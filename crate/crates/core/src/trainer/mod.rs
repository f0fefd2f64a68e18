//! Per-category training loop and evaluation pipeline.

mod eval;
mod presets;

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{adam_step, AdamConfig, Architecture, Checkpoint, ModelParams, OptimState};
use crate::corruption::{corrupt_batch_with_streams, CorruptionConfig};
use crate::dataset::{self, DatasetIndex, ImageTensor};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossBreakdown, LossWeights};
use crate::rng;

pub use eval::{evaluate_category, evaluate_scored, Evaluation};
pub use presets::Method;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub corruption: CorruptionConfig,
    pub image_side: usize,
    /// Save a checkpoint every this many epochs; 0 disables periodic saves.
    pub checkpoint_every: usize,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 8,
            lr: 1e-3,
            seed: 0,
            weights: LossWeights {
                w_mse: 1.0,
                w_fft: 1.0,
                w_ssim: 0.0,
            },
            corruption: CorruptionConfig::default(),
            image_side: 256,
            checkpoint_every: 0,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        dataset::validate_side(self.image_side)?;
        self.weights.validate()?;
        self.corruption.validate()
    }

    /// Optimizer steps in one epoch over `n` images.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n / self.batch_size + usize::from(n % self.batch_size >= 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub loss: LossBreakdown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean: LossBreakdown,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Corruption operators applied over the run.
    pub operators_applied: u64,
}

impl TrainLog {
    /// One row per step: `epoch,step,mse,fft,ssim,total`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,step,mse,fft,ssim,total\n");
        for r in &self.steps {
            let l = r.loss;
            writeln!(s, "{},{},{},{},{},{}", r.epoch, r.step, l.mse, l.fft, l.ssim, l.total).expect("string write");
        }
        s
    }

    pub fn summary_json(&self, cfg: &TrainConfig, parameter_count: usize) -> String {
        let summary = serde_json::json!({
            "config": cfg,
            "parameter_count": parameter_count,
            "steps": self.steps.len(),
            "epochs": self.epochs,
            "final_step": self.steps.last(),
            "operators_applied": self.operators_applied,
        });
        serde_json::to_string_pretty(&summary).expect("serializable summary")
    }
}

/// Mutable training state: parameters, optimizer moments and progress.
pub struct Trainer {
    cfg: TrainConfig,
    params: ModelParams<f32>,
    optim: OptimState<f32>,
    epochs_completed: usize,
    log: TrainLog,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(cfg.architecture, cfg.seed);
        let optim = OptimState::new(&params);
        Ok(Trainer {
            cfg,
            params,
            optim,
            epochs_completed: 0,
            log: TrainLog::default(),
        })
    }

    /// Continues from an epoch-boundary checkpoint that carries optimizer
    /// state. The new log only holds steps taken after the resume.
    pub fn resume(cfg: TrainConfig, ck: Checkpoint) -> Result<Self> {
        cfg.validate()?;
        if ck.params.architecture() != cfg.architecture {
            return Err(Error::Checkpoint("checkpoint architecture differs from the configuration".into()));
        }
        let optim = ck
            .optimizer
            .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state to resume from".into()))?;
        Ok(Trainer {
            cfg,
            params: ck.params,
            optim,
            epochs_completed: ck.epochs_completed as usize,
            log: TrainLog::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn epochs_completed(&self) -> usize {
        self.epochs_completed
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_completed >= self.cfg.epochs
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            optimizer: Some(self.optim.clone()),
            epochs_completed: self.epochs_completed as u64,
        }
    }

    pub fn into_parts(self) -> (ModelParams<f32>, TrainLog) {
        (self.params, self.log)
    }

    /// One optimizer step on `batch`; `ids` are the dataset indices of the
    /// images and key their corruption streams.
    pub fn step(&mut self, batch: &[ImageTensor], ids: &[usize], epoch: usize) -> Result<LossBreakdown> {
        let clean = dataset::stack(&batch.iter().collect::<Vec<_>>())?;
        let input = if self.cfg.corruption.probability > 0.0 {
            let mut streams: Vec<_> = ids
                .iter()
                .map(|&id| rng::stream(&[rng::tag::CORRUPT, self.cfg.seed, epoch as u64, id as u64]))
                .collect();
            let corrupted = corrupt_batch_with_streams(batch, &self.cfg.corruption, &mut streams);
            self.log.operators_applied += corrupted.operators_applied as u64;
            dataset::stack(&corrupted.images.iter().collect::<Vec<_>>())?
        } else {
            clean.clone()
        };
        let (recon, cache) = self.params.forward_train(&input)?;
        let (loss, grad) = total_loss(&recon, &clean, &self.cfg.weights)?;
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!("loss became {} at epoch {epoch}", loss.total)));
        }
        let grads = self.params.backward(&cache, &grad)?;
        adam_step(&mut self.params, &grads, &mut self.optim, &AdamConfig::with_lr(self.cfg.lr))?;
        self.log.steps.push(StepRecord {
            epoch,
            step: self.optim.step,
            loss,
        });
        Ok(loss)
    }

    /// Runs the next epoch: seeded shuffle, then full batches plus a trailing
    /// partial batch when it holds at least two images.
    pub fn run_epoch(&mut self, images: &[ImageTensor]) -> Result<EpochRecord> {
        if images.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "training needs at least 2 images, got {}",
                images.len()
            )));
        }
        let epoch = self.epochs_completed;
        let start = Instant::now();
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.shuffle(&mut rng::stream(&[rng::tag::SHUFFLE, self.cfg.seed, epoch as u64]));
        let mut sum = LossBreakdown::default();
        let mut steps = 0usize;
        for ids in order.chunks(self.cfg.batch_size).filter(|c| c.len() >= 2) {
            let batch: Vec<ImageTensor> = ids.iter().map(|&i| images[i].clone()).collect();
            let l = self.step(&batch, ids, epoch)?;
            sum.mse += l.mse;
            sum.fft += l.fft;
            sum.ssim += l.ssim;
            sum.total += l.total;
            steps += 1;
        }
        let n = steps.max(1) as f64;
        let record = EpochRecord {
            epoch,
            mean: LossBreakdown {
                mse: sum.mse / n,
                fft: sum.fft / n,
                ssim: sum.ssim / n,
                total: sum.total / n,
            },
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        self.log.epochs.push(record);
        self.epochs_completed += 1;
        Ok(record)
    }

    /// Trains until the configured epoch count, calling `after_epoch` after
    /// every epoch.
    pub fn run(
        &mut self,
        images: &[ImageTensor],
        mut after_epoch: impl FnMut(&Trainer, &EpochRecord) -> Result<()>,
    ) -> Result<()> {
        check_images(images, self.cfg.image_side)?;
        while !self.is_finished() {
            let rec = self.run_epoch(images)?;
            after_epoch(self, &rec)?;
        }
        Ok(())
    }
}

fn check_images(images: &[ImageTensor], side: usize) -> Result<()> {
    if images.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 images, got {}",
            images.len()
        )));
    }
    if let Some(img) = images.iter().find(|i| i.height() != side || i.width() != side) {
        return Err(Error::shape(&[side, side], &[img.height(), img.width()]));
    }
    Ok(())
}

/// Trains a fresh model on decoded images.
pub fn train_images(images: &[ImageTensor], cfg: &TrainConfig) -> Result<(ModelParams<f32>, TrainLog)> {
    let mut t = Trainer::new(cfg.clone())?;
    t.run(images, |_, _| Ok(()))?;
    Ok(t.into_parts())
}

pub fn train_category(index: &DatasetIndex, cfg: &TrainConfig) -> Result<(ModelParams<f32>, TrainLog)> {
    if index.image_side != cfg.image_side {
        return Err(Error::Config(format!(
            "dataset was indexed at {} px but training expects {} px",
            index.image_side, cfg.image_side
        )));
    }
    let images = dataset::load_train_images(index)?;
    train_images(&images, cfg)
}
