//! Run configuration: the single JSON file driving the CLI.
//!
//! The config is the only source of model and cleaning parameters; command
//! line flags select actions and override paths. Relative paths resolve
//! against the config file's directory so a committed config works from
//! anywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{DodCostTable, DodEntry, EconParams, ThroughputConvention};
use crate::preprocess::{
    CleanParams, DEFAULT_EOL_FRACTION, DEFAULT_IDLE_EPS_NOMINAL_FRACTION, DEFAULT_SPIKE_K,
    DEFAULT_SPIKE_WINDOW,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config '{path}'")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config '{path}': {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Cleaning thresholds as written in the config; unset fields take the
/// built-in defaults, with the idle threshold scaling per cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    pub idle_eps_ah: Option<f64>,
    pub spike_window: Option<usize>,
    pub spike_k: Option<f64>,
    pub eol_fraction: Option<f64>,
}

impl CleanConfig {
    /// Concrete parameters for a cell of the given nominal capacity.
    pub fn resolve(&self, nominal_capacity_ah: f64) -> CleanParams {
        CleanParams {
            idle_eps_ah: self
                .idle_eps_ah
                .unwrap_or(DEFAULT_IDLE_EPS_NOMINAL_FRACTION * nominal_capacity_ah),
            spike_window: self.spike_window.unwrap_or(DEFAULT_SPIKE_WINDOW),
            spike_k: self.spike_k.unwrap_or(DEFAULT_SPIKE_K),
            eol_fraction: self.eol_fraction.unwrap_or(DEFAULT_EOL_FRACTION),
        }
    }

    /// Idle-threshold policy string echoed into reports.
    pub fn idle_eps_spec(&self) -> String {
        match self.idle_eps_ah {
            Some(v) => format!("{v}Ah"),
            None => format!("{DEFAULT_IDLE_EPS_NOMINAL_FRACTION}*nominal"),
        }
    }
}

/// One calibration group: which tests determine the fade at one DOD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalGroup {
    pub dod_percent: f64,
    /// Test ids (as resolved at ingest) whose deltas are pooled.
    pub tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub groups: Vec<CalGroup>,
}

/// Where the DOD model comes from: an explicit table or a calibration spec.
/// Exactly one must be given; the calibration source is never defaulted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DodModelConfig {
    pub table: Option<Vec<DodEntry>>,
    pub calibration: Option<CalibrationSpec>,
}

impl DodModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.table, &self.calibration) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            (Some(_), Some(_)) => Err(ConfigError::Invalid(
                "dod_model: give either 'table' or 'calibration', not both".into(),
            )),
            (None, None) => Err(ConfigError::Invalid(
                "dod_model: either 'table' or 'calibration' is required".into(),
            )),
        }
    }

    /// Human-readable origin of the DOD model, echoed into reports.
    pub fn source_label(&self) -> String {
        match (&self.table, &self.calibration) {
            (Some(_), _) => "explicit-table".to_string(),
            (_, Some(cal)) => {
                let ids: Vec<&str> = cal
                    .groups
                    .iter()
                    .flat_map(|g| g.tests.iter().map(String::as_str))
                    .collect();
                format!("tests:{}", ids.join("+"))
            }
            _ => "unspecified".to_string(),
        }
    }

    /// Build the table directly when one was given inline.
    pub fn explicit_table(&self) -> Result<Option<DodCostTable>, ConfigError> {
        match &self.table {
            Some(entries) => DodCostTable::new(entries.clone())
                .map(Some)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(None),
        }
    }
}

/// SOC integration settings for schedule costing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_soc0")]
    pub soc0: f64,
    #[serde(default = "default_round_trip")]
    pub round_trip_efficiency: f64,
    /// Explicit per-leg efficiencies override the symmetric split.
    pub eta_charge: Option<f64>,
    pub eta_discharge: Option<f64>,
}

fn default_soc0() -> f64 {
    0.5
}

fn default_round_trip() -> f64 {
    1.0
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            soc0: default_soc0(),
            round_trip_efficiency: default_round_trip(),
            eta_charge: None,
            eta_discharge: None,
        }
    }
}

impl ScheduleConfig {
    pub fn efficiencies(&self) -> (f64, f64) {
        let (c, d) = crate::cycles::split_round_trip_efficiency(self.round_trip_efficiency);
        (
            self.eta_charge.unwrap_or(c),
            self.eta_discharge.unwrap_or(d),
        )
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset manifest path, relative to this config file.
    pub manifest: PathBuf,
    /// Output directory, relative to this config file.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub clean: CleanConfig,
    pub econ: EconParams,
    pub dod_model: DodModelConfig,
    #[serde(default)]
    pub throughput_convention: ThroughputConvention,
    #[serde(default)]
    pub schedule: ScheduleConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.econ
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.dod_model.validate()?;
        if let Some(w) = self.clean.spike_window {
            if w < 3 || w % 2 == 0 {
                return Err(ConfigError::Invalid(
                    "clean.spike_window must be an odd integer >= 3".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Load a config and resolve its relative paths against its own directory.
pub fn load_run_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    config.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    if config.manifest.is_relative() {
        config.manifest = base.join(&config.manifest);
    }
    if config.output_dir.is_relative() {
        config.output_dir = base.join(&config.output_dir);
    }
    Ok(config)
}
