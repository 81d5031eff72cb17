//! Scenario files: two covariances, an SNR grid and run settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statbeam::beamform::WeightedObjective;
use statbeam::linalg::Covariance;
use statbeam::montecarlo::{McConfig, DEFAULT_BATCH};
use statbeam::C64;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Complex entries are `[re, im]`, rows in order.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub zeta1: f64,
    pub zeta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            batch: None,
        }
    }
}

impl McSettings {
    pub fn config(&self) -> Result<McConfig, CliError> {
        let batch = self.batch.unwrap_or(DEFAULT_BATCH.min(self.n_samples.max(1)));
        McConfig::new(self.n_samples, self.seed, batch).map_err(|e| CliError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Sumrate,
    Weighted,
    #[serde(rename = "single_user_1")]
    SingleUser1,
    #[serde(rename = "single_user_2")]
    SingleUser2,
}

/// File form, kept verbatim so that saving reproduces the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub sigma1: MatrixRows,
    pub sigma2: MatrixRows,
    pub snr_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub mode: Mode,
}

/// Checked scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub sigma1: Covariance,
    pub sigma2: Covariance,
}

fn covariance(name: &str, rows: &MatrixRows) -> Result<Covariance, CliError> {
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    Covariance::from_rows(&rows).map_err(|e| CliError::Malformed(format!("{name}: {e}")))
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, CliError> {
        let sigma1 = covariance("sigma1", &file.sigma1)?;
        let sigma2 = covariance("sigma2", &file.sigma2)?;
        if sigma1.dim() != 2 || sigma2.dim() != 2 {
            return Err(CliError::Malformed("covariances must be 2x2".into()));
        }
        if file.snr_db.is_empty() {
            return Err(CliError::Malformed("snr_db is empty".into()));
        }
        if file.snr_db.iter().any(|v| !v.is_finite()) || file.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Malformed("snr_db must be finite and strictly increasing".into()));
        }
        if file.mode == Mode::Weighted && file.weights.is_none() {
            return Err(CliError::Malformed("mode weighted needs weights".into()));
        }
        file.mc.config()?;
        Ok(Self {
            file,
            sigma1,
            sigma2,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.file).expect("scenario serializes")
    }

    /// Objective implied by the mode.
    pub fn objective(&self) -> Result<WeightedObjective, CliError> {
        let w = match self.file.mode {
            Mode::Sumrate => return Ok(WeightedObjective::sum()),
            Mode::Weighted => self.file.weights.expect("checked on load"),
            Mode::SingleUser1 => Weights { zeta1: 1.0, zeta2: 0.0 },
            Mode::SingleUser2 => Weights { zeta1: 0.0, zeta2: 1.0 },
        };
        WeightedObjective::new(w.zeta1, w.zeta2).map_err(|e| CliError::Malformed(e.to_string()))
    }
}
