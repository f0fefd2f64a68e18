use std::path::PathBuf;

use clap::Args;

use d3r_core::autoencoder::Checkpoint;
use d3r_core::dataset::{self, load_mvtec_category};
use d3r_core::trainer::{Method, Trainer};

use super::{run_dir, write_file};
use crate::error::{CliError, CliResult};
use crate::manifest;
use crate::settings::Common;

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Continue from a checkpoint saved at an epoch boundary
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

pub struct Trained {
    pub dir: PathBuf,
    pub label: String,
    pub checkpoint: PathBuf,
}

/// Trains one (category, method) pair and writes its artifacts.
pub fn train_one(c: &Common, category: &str, method: Method, resume: Option<&PathBuf>) -> CliResult<Trained> {
    let (cfg, label) = c.train_config(method)?;
    let index = load_mvtec_category(c.root()?, category, cfg.image_side).map_err(|e| CliError::data(e.to_string()))?;
    let images = dataset::load_train_images(&index)?;
    let dir = run_dir(&c.out(), category, &label);
    let mut trainer = match resume {
        Some(p) => Trainer::resume(cfg.clone(), Checkpoint::load(p)?)?,
        None => Trainer::new(cfg.clone())?,
    };
    let mut artifacts = Vec::new();
    let every = cfg.checkpoint_every;
    trainer.run(&images, |t, rec| {
        eprintln!(
            "[{category}/{label}] epoch {}/{}: total {:.6} (mse {:.6}, fft {:.6}, ssim {:.6})",
            rec.epoch + 1,
            cfg.epochs,
            rec.mean.total,
            rec.mean.mse,
            rec.mean.fft,
            rec.mean.ssim
        );
        if every > 0 && t.epochs_completed() % every == 0 {
            let p = dir.join("checkpoints").join(format!("epoch-{:03}.ckpt", t.epochs_completed()));
            t.checkpoint().save(&p)?;
            artifacts.push(p);
        }
        Ok(())
    })?;
    let checkpoint = dir.join("model.ckpt");
    trainer.checkpoint().save(&checkpoint)?;
    artifacts.push(checkpoint.clone());
    let log = trainer.log();
    artifacts.push(write_file(&dir.join("train_log.csv"), log.to_csv())?);
    artifacts.push(write_file(
        &dir.join("train_summary.json"),
        log.summary_json(&cfg, trainer.params().parameter_count()) + "\n",
    )?);
    manifest::write(&dir, "train", c, &artifacts)?;
    println!(
        "trained {category}/{label}: {} steps, final loss {}, checkpoint {}",
        log.steps.len(),
        log.steps.last().map_or_else(|| "n/a".to_string(), |s| format!("{:.6}", s.loss.total)),
        checkpoint.display()
    );
    Ok(Trained { dir, label, checkpoint })
}

pub fn run(args: &TrainArgs, c: &Common) -> CliResult<()> {
    let category = c.single_category()?;
    let methods = c.methods(false)?;
    if methods.len() != 1 {
        return Err(CliError::usage("train expects exactly one --method"));
    }
    train_one(c, &category, methods[0], args.resume.as_ref()).map(|_| ())
}
