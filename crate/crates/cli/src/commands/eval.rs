use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use d3r_core::autoencoder::Checkpoint;
use d3r_core::dataset::{self, load_mvtec_category, TestSample};
use d3r_core::metrics::{throughput_images, write_pro_csv, write_roc_csv, MetricsReport};
use d3r_core::scoring::{reconstruct, score_images};
use d3r_core::trainer::{evaluate_scored, Method};

use super::{fmt_short, run_dir, write_file};
use crate::error::{io_err, CliError, CliResult};
use crate::manifest::{self, Hardware};
use crate::render;
use crate::settings::{Common, Panels};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint to evaluate; defaults to the run directory's model.ckpt
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// `report.json` contents: the metrics plus run context.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub hardware: String,
    pub image_side: usize,
    pub n_thresholds: usize,
    pub checkpoint: String,
}

fn sample_name(s: &TestSample) -> String {
    let stem = s.path.file_stem().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    format!("{}_{stem}", s.defect_type)
}

fn undefined_fields(m: &MetricsReport) -> Vec<&'static str> {
    [
        ("img_auc", m.img_auc),
        ("img_ap", m.img_ap),
        ("px_auc", m.px_auc),
        ("px_ap", m.px_ap),
        ("pro_auc", m.pro_auc),
    ]
    .into_iter()
    .filter(|(_, v)| v.is_none())
    .map(|(n, _)| n)
    .collect()
}

/// Evaluates one checkpoint and writes report, curves, maps and panels into
/// `dir`.
pub fn eval_one(c: &Common, category: &str, label: &str, dir: &Path, checkpoint: &Path) -> CliResult<EvalReport> {
    let ck = Checkpoint::load(checkpoint).map_err(|e| CliError::data(e.to_string()))?;
    let side = c.image_side();
    let index = load_mvtec_category(c.root()?, category, side).map_err(|e| CliError::data(e.to_string()))?;
    let images = dataset::load_test_set(&index)?;
    let labels: Vec<bool> = index.test.iter().map(|s| s.is_anomalous()).collect();
    let scored = score_images(&ck.params, &images, &labels)?;
    let plain: Vec<_> = images.iter().map(|(img, _)| img.clone()).collect();
    let fps = throughput_images(&ck.params, &plain)?;
    let n_thresholds = c.n_thresholds();
    let evaluation = evaluate_scored(category, label, scored, n_thresholds, fps)?;

    let mut artifacts = Vec::new();
    if let Some(roc) = &evaluation.roc {
        let p = dir.join("roc.csv");
        write_roc_csv(roc, &p)?;
        artifacts.push(p);
    }
    if let Some(pro) = &evaluation.pro {
        let p = dir.join("pro.csv");
        write_pro_csv(pro, &p)?;
        artifacts.push(p);
    }
    if c.export_maps.unwrap_or(false) {
        let maps_dir = dir.join("maps");
        std::fs::create_dir_all(&maps_dir).map_err(io_err(&maps_dir))?;
        for (s, sample) in evaluation.scored.iter().zip(&index.test) {
            let p = maps_dir.join(format!("{}.d3rmap", sample_name(sample)));
            s.map.save_raw(&p)?;
            artifacts.push(p);
        }
    }
    let panels = c.panels()?;
    if panels != Panels::None {
        let panel_dir = dir.join("panels");
        std::fs::create_dir_all(&panel_dir).map_err(io_err(&panel_dir))?;
        let mut written = 0usize;
        for (k, ((img, _), sample)) in images.iter().zip(&index.test).enumerate() {
            let keep = match panels {
                Panels::All => true,
                Panels::Defective => sample.is_anomalous(),
                Panels::First(n) => written < n,
                Panels::None => false,
            };
            if !keep {
                continue;
            }
            let recon = reconstruct(&ck.params, img)?;
            let p = panel_dir.join(format!("{}.png", sample_name(sample)));
            render::panel(img, &recon, &evaluation.normalized[k])
                .save(&p)
                .map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
            artifacts.push(p);
            written += 1;
        }
    }
    let report = EvalReport {
        metrics: evaluation.report,
        hardware: Hardware::detect().describe(),
        image_side: side,
        n_thresholds,
        checkpoint: checkpoint.display().to_string(),
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
    artifacts.push(write_file(&dir.join("report.json"), json)?);
    artifacts.push(checkpoint.to_path_buf());
    manifest::write(dir, "eval", c, &artifacts)?;
    let m = &report.metrics;
    println!(
        "{category}/{label}: img AUC {} img AP {} px AUC {} px AP {} PRO {} FPS {:.1}",
        fmt_short(m.img_auc),
        fmt_short(m.img_ap),
        fmt_short(m.px_auc),
        fmt_short(m.px_ap),
        fmt_short(m.pro_auc),
        m.fps
    );
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    Ok(report)
}

/// Fails in strict mode when any metric is undefined.
pub fn check_strict(c: &Common, report: &MetricsReport) -> CliResult<()> {
    let missing = undefined_fields(report);
    if c.strict() && !missing.is_empty() {
        return Err(CliError::data(format!(
            "{}/{}: undefined metrics {missing:?}",
            report.category, report.method
        )));
    }
    Ok(())
}

pub fn run(args: &EvalArgs, c: &Common) -> CliResult<()> {
    let category = c.single_category()?;
    let methods: Vec<Method> = c.methods(false)?;
    if methods.len() != 1 {
        return Err(CliError::usage("eval expects exactly one --method"));
    }
    let (_, label) = c.train_config(methods[0])?;
    let dir = run_dir(&c.out(), &category, &label);
    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| dir.join("model.ckpt"));
    if !checkpoint.is_file() {
        return Err(CliError::data(format!("checkpoint {} not found", checkpoint.display())));
    }
    let report = eval_one(c, &category, &label, &dir, &checkpoint)?;
    check_strict(c, &report.metrics)
}
