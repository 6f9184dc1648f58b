use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::SimulatorConfig;
use crate::error::{Error, Result};
use crate::ml::{Algorithm, Hyperparameters};
use crate::network::bundled_data_dir;
use crate::pmu::{ErrorModelConfig, FeatureSchema};
use crate::scenario::{ConditionOptions, ContingencyOptions, Season};
use crate::security::DEFAULT_TSI_THRESHOLD;

/// Channel error half-widths the sweep may use, degrees.
pub const SWEEP_LEVELS: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::InvalidInput(format!("unknown preset {s:?} (desk, paper)"))),
        }
    }
}

/// Everything the generate and experiment stages read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network_path: PathBuf,
    pub load_csv_path: PathBuf,
    pub season: Season,
    /// Operating conditions; a multiple of 24.
    pub n_oc: usize,
    pub n_c: usize,
    pub k_max: usize,
    /// Solar share of scheduled generation; 0 disables replacement.
    pub solar_target: f64,
    /// Channel angle half-widths, degrees.
    pub error_sweep: Vec<f64>,
    pub n_runs: usize,
    pub feature_schema: FeatureSchema,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    /// Worker threads; 0 uses every available core. Read from config files
    /// but never written, so outputs do not depend on it.
    #[serde(skip_serializing)]
    pub worker_count: usize,
    pub use_zero_injection: bool,
    /// Fixed PMU sites; `None` solves the placement problem.
    pub pmu_buses: Option<Vec<u32>>,
    pub tsi_threshold: f64,
    pub train_frac: f64,
    pub validation_frac_of_train: f64,
    pub simulator: SimulatorConfig,
    pub conditions: ConditionOptions,
    pub contingencies: ContingencyOptions,
    /// Error terms other than the channel half-width, which the sweep sets.
    pub error_model: ErrorModelConfig,
    pub hyperparameters: Hyperparameters,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let data = bundled_data_dir();
        ExperimentConfig {
            network_path: data.join("ieee118.json"),
            load_csv_path: data.join("hourly_load_sample.csv"),
            season: Season::Summer,
            n_oc: 96,
            n_c: 50,
            k_max: 6,
            solar_target: 0.0,
            error_sweep: SWEEP_LEVELS.to_vec(),
            n_runs: 75,
            feature_schema: FeatureSchema::default(),
            algorithms: Algorithm::ALL.to_vec(),
            master_seed: 0,
            worker_count: 0,
            use_zero_injection: true,
            pmu_buses: None,
            tsi_threshold: DEFAULT_TSI_THRESHOLD,
            train_frac: 0.70,
            validation_frac_of_train: 0.10,
            simulator: SimulatorConfig::default(),
            conditions: ConditionOptions::default(),
            contingencies: ContingencyOptions::default(),
            error_model: ErrorModelConfig::default(),
            hyperparameters: Hyperparameters::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => ExperimentConfig::default(),
            Preset::Desk => ExperimentConfig {
                n_oc: 24,
                n_c: 12,
                n_runs: 20,
                ..Default::default()
            },
        }
    }

    /// Parses a config file; relative paths resolve against its directory.
    pub fn from_json(text: &str, location: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("{location}:{}:{}", e.line(), e.column()), e))?;
        if let Some(dir) = base_dir {
            for p in [&mut cfg.network_path, &mut cfg.load_csv_path] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string(), path.parent())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_oc == 0 || !self.n_oc.is_multiple_of(24) {
            return bad(format!("n_oc must be a positive multiple of 24, got {}", self.n_oc));
        }
        if self.n_c == 0 || self.n_runs == 0 {
            return bad("n_c and n_runs must be at least 1".into());
        }
        if self.error_sweep.is_empty() || self.error_sweep.iter().any(|v| !SWEEP_LEVELS.contains(v)) {
            return bad(format!("error_sweep values must be drawn from 0, 1, 2, 3; got {:?}", self.error_sweep));
        }
        let mut sweep = self.error_sweep.clone();
        sweep.sort_by(f64::total_cmp);
        sweep.dedup();
        if sweep.len() != self.error_sweep.len() {
            return bad("error_sweep has repeated levels".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return bad("algorithms has repeated entries".into());
        }
        if !(0.0..0.5).contains(&self.solar_target) {
            return bad(format!("solar_target must be in [0, 0.5), got {}", self.solar_target));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0)
            || !(0.0..1.0).contains(&self.validation_frac_of_train)
        {
            return bad("train_frac must be in (0, 1) and validation_frac_of_train in [0, 1)".into());
        }
        if !self.tsi_threshold.is_finite() {
            return bad("tsi_threshold must be finite".into());
        }
        self.simulator.validate()?;
        self.error_model.validate()
    }

    /// Error model at one sweep level.
    pub fn error_model_at(&self, halfwidth: f64) -> ErrorModelConfig {
        ErrorModelConfig {
            channel_angle_halfwidth: halfwidth,
            ..self.error_model
        }
    }
}
