//! Run settings: a TOML file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use d3r_core::losses::LossWeights;
use d3r_core::metrics::DEFAULT_THRESHOLDS;
use d3r_core::trainer::{Method, TrainConfig};

use crate::error::{CliError, CliResult};

/// Options shared by every subcommand. Each may also be set in the file
/// given by `--config`; flags win.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// Dataset root in MVTec AD layout
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Categories, comma separated
    #[arg(long = "categories", visible_alias = "category", value_delimiter = ',')]
    pub categories: Option<Vec<String>>,
    /// Methods: ae-mse, d3r-mse, d3r-fft, d3r-fft-ssim
    #[arg(long = "methods", visible_alias = "method", value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub image_side: Option<usize>,
    #[arg(long)]
    pub w_mse: Option<f64>,
    #[arg(long)]
    pub w_fft: Option<f64>,
    #[arg(long)]
    pub w_ssim: Option<f64>,
    #[arg(long)]
    pub corrupt_prob: Option<f64>,
    #[arg(long)]
    pub max_regions: Option<usize>,
    /// Save a checkpoint every N epochs during training
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub n_thresholds: Option<usize>,
    /// Fail when a metric is undefined or a benchmark cell is missing
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict: Option<bool>,
    /// Worker threads for decoding and scoring
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write one raw anomaly map per test image
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub export_maps: Option<bool>,
    /// Heatmap panels: none, all, defective, or a count
    #[arg(long)]
    pub panels: Option<String>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Common {
    /// Loads `path` (if any) and applies `self` on top.
    pub fn resolve(&self, path: Option<&Path>) -> CliResult<Common> {
        let mut merged = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                toml::from_str::<Common>(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
            }
            None => Common::default(),
        };
        overlay!(merged, self; root, out, categories, methods, seed, epochs, batch_size, lr, image_side,
            w_mse, w_fft, w_ssim, corrupt_prob, max_regions, checkpoint_every, n_thresholds, strict,
            threads, export_maps, panels);
        Ok(merged)
    }

    pub fn root(&self) -> CliResult<&Path> {
        self.root.as_deref().ok_or_else(|| CliError::usage("--root is required"))
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn categories(&self) -> CliResult<Vec<String>> {
        match &self.categories {
            Some(c) if !c.is_empty() => Ok(c.clone()),
            _ => Err(CliError::usage("at least one --category is required")),
        }
    }

    pub fn single_category(&self) -> CliResult<String> {
        let c = self.categories()?;
        if c.len() != 1 {
            return Err(CliError::usage("exactly one --category is expected"));
        }
        Ok(c[0].clone())
    }

    pub fn methods(&self, default_all: bool) -> CliResult<Vec<Method>> {
        match &self.methods {
            Some(m) if !m.is_empty() => m.iter().map(|s| s.parse().map_err(CliError::from)).collect(),
            _ if default_all => Ok(Method::ALL.to_vec()),
            _ => Ok(vec![Method::D3rFft]),
        }
    }

    pub fn n_thresholds(&self) -> usize {
        self.n_thresholds.unwrap_or(DEFAULT_THRESHOLDS)
    }

    pub fn strict(&self) -> bool {
        self.strict.unwrap_or(false)
    }

    pub fn image_side(&self) -> usize {
        self.image_side.unwrap_or(TrainConfig::default().image_side)
    }

    fn overrides_preset(&self) -> bool {
        self.w_mse.is_some() || self.w_fft.is_some() || self.w_ssim.is_some() || self.corrupt_prob.is_some()
    }

    /// Training configuration for `method` and the label reports should use.
    /// Overriding a preset's weights or corruption rate relabels the run
    /// `custom`.
    pub fn train_config(&self, method: Method) -> CliResult<(TrainConfig, String)> {
        let mut cfg = method.config();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.image_side {
            cfg.image_side = v;
        }
        if let Some(v) = self.max_regions {
            cfg.corruption.max_regions = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.checkpoint_every = v;
        }
        if let Some(v) = self.corrupt_prob {
            cfg.corruption.probability = v;
        }
        cfg.weights = LossWeights {
            w_mse: self.w_mse.unwrap_or(cfg.weights.w_mse),
            w_fft: self.w_fft.unwrap_or(cfg.weights.w_fft),
            w_ssim: self.w_ssim.unwrap_or(cfg.weights.w_ssim),
        };
        cfg.validate()?;
        let label = if self.overrides_preset() { "custom".to_string() } else { method.name().to_string() };
        Ok((cfg, label))
    }

    pub fn panels(&self) -> CliResult<Panels> {
        match self.panels.as_deref().unwrap_or("none") {
            "none" => Ok(Panels::None),
            "all" => Ok(Panels::All),
            "defective" => Ok(Panels::Defective),
            n => n
                .parse()
                .map(Panels::First)
                .map_err(|_| CliError::usage(format!("--panels expects none, all, defective or a count, got {n:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panels {
    None,
    All,
    Defective,
    First(usize),
}
