use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;

/// Named training recipes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AeMse,
    D3rMse,
    D3rFft,
    D3rFftSsim,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AeMse, Method::D3rMse, Method::D3rFft, Method::D3rFftSsim];

    pub fn name(self) -> &'static str {
        match self {
            Method::AeMse => "ae-mse",
            Method::D3rMse => "d3r-mse",
            Method::D3rFft => "d3r-fft",
            Method::D3rFftSsim => "d3r-fft-ssim",
        }
    }

    /// Display label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::AeMse => "AE-MSE",
            Method::D3rMse => "D3R-MSE",
            Method::D3rFft => "D3R-FFT",
            Method::D3rFftSsim => "D3R-FFT-SSIM",
        }
    }

    pub fn corruption_probability(self) -> f64 {
        match self {
            Method::AeMse => 0.0,
            _ => 0.5,
        }
    }

    pub fn weights(self) -> LossWeights {
        let (m, f, s) = match self {
            Method::AeMse | Method::D3rMse => (1.0, 0.0, 0.0),
            Method::D3rFft => (1.0, 1.0, 0.0),
            Method::D3rFftSsim => (1.0, 1.0, 0.5),
        };
        LossWeights::new(m, f, s).expect("preset weights are valid")
    }

    /// Overwrites the corruption probability and loss weights of `cfg`.
    pub fn apply(self, cfg: &mut TrainConfig) {
        cfg.weights = self.weights();
        cfg.corruption.probability = self.corruption_probability();
    }

    pub fn config(self) -> TrainConfig {
        let mut cfg = TrainConfig::default();
        self.apply(&mut cfg);
        cfg
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}
