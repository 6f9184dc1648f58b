use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::generate::{thread_pool, Database, DatasetSummary};
use crate::error::{Error, Result};
use crate::ml::{aggregate_runs, evaluate, split_dataset, train_classifier, Algorithm, ConfidenceInterval, SplitSpec};
use crate::pmu::{inject_errors, MeasurementWindow};
use crate::seed;

pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const PLOT_HEADER: &str = "algorithm,error_halfwidth_deg,mean_accuracy,ci_half_width,n_runs";

/// Allowed rise in mean accuracy between consecutive sweep levels.
pub const MONOTONE_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
}

/// One (algorithm, error level) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub error_halfwidth_deg: f64,
    /// Test accuracy of every successful run, in run order.
    pub accuracies: Vec<f64>,
    pub failures: Vec<RunFailure>,
    /// Absent when fewer than two runs succeeded.
    pub interval: Option<ConfidenceInterval>,
}

impl CellResult {
    pub fn mean(&self) -> Option<f64> {
        if self.accuracies.is_empty() {
            None
        } else {
            Some(self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLeader {
    pub error_halfwidth_deg: f64,
    pub algorithm: Algorithm,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub algorithm: Algorithm,
    /// Largest rise of the mean between consecutive levels (negative when
    /// strictly decreasing); absent with fewer than two levels.
    pub max_rise: Option<f64>,
    pub non_increasing_within_slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timing {
    pub generation_s: Option<f64>,
    pub experiment_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    /// Algorithm-major, sweep order within each algorithm.
    pub cells: Vec<CellResult>,
    pub leaders: Vec<LevelLeader>,
    pub monotonicity: Vec<MonotonicityCheck>,
    pub timing: Timing,
}

/// Seed of the noise drawn for one case at one (run, level).
pub fn noise_seed(master: u64, run: usize, halfwidth: f64, case_id: usize) -> u64 {
    seed::derive(
        master,
        &[seed::stream::MEASUREMENT_ERROR, run as u64, halfwidth.to_bits(), case_id as u64],
    )
}

/// Clean windows with fresh errors for one (run, level).
pub fn noisy_windows(db: &Database, run: usize, halfwidth: f64) -> Result<Vec<MeasurementWindow>> {
    let cfg = db.meta.config.error_model_at(halfwidth);
    let master = db.meta.config.master_seed;
    db.windows
        .iter()
        .zip(&db.meta.cases)
        .map(|(w, c)| inject_errors(w, &cfg, noise_seed(master, run, halfwidth, c.key.case_id)))
        .collect()
}

/// Accuracies of every configured algorithm for one (run, level). The split
/// depends only on the run so levels are compared on the same partition.
fn run_cell(db: &Database, run: usize, halfwidth: f64) -> Result<Vec<std::result::Result<f64, String>>> {
    let cfg = &db.meta.config;
    let windows = noisy_windows(db, run, halfwidth)?;
    let ds = db.dataset_from(&windows, Some(halfwidth))?;
    let spec = SplitSpec {
        train_frac: cfg.train_frac,
        validation_frac_of_train: cfg.validation_frac_of_train,
        stratified: true,
        seed: seed::derive(cfg.master_seed, &[seed::stream::SPLIT, run as u64]),
    };
    let (train, validation, test) = split_dataset(&ds, &spec)?;
    let train_seed = seed::derive(cfg.master_seed, &[seed::stream::TRAINING, run as u64, halfwidth.to_bits()]);
    Ok(cfg
        .algorithms
        .iter()
        .map(|&alg| {
            train_classifier(alg, &train, &validation, &cfg.hyperparameters, train_seed)
                .and_then(|m| evaluate(&m, &test))
                .map(|m| m.accuracy)
                .map_err(|e| e.to_string())
        })
        .collect())
}

/// Stage two: repeated noisy training and evaluation over the error sweep.
pub fn run_experiment(db: &Database) -> Result<ExperimentReport> {
    let cfg = &db.meta.config;
    cfg.validate()?;
    if db.meta.cases.is_empty() {
        return Err(Error::InvalidInput("database has no cases".into()));
    }
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..cfg.n_runs)
        .flat_map(|r| (0..cfg.error_sweep.len()).map(move |l| (r, l)))
        .collect();
    let pool = thread_pool(cfg.worker_count)?;
    let results: Vec<Result<Vec<std::result::Result<f64, String>>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, l)| {
                let out = run_cell(db, r, cfg.error_sweep[l]);
                info!("run {r} level {} done", cfg.error_sweep[l]);
                out
            })
            .collect()
    });

    let mut cells: Vec<CellResult> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| {
            cfg.error_sweep.iter().map(move |&hw| CellResult {
                algorithm: a,
                error_halfwidth_deg: hw,
                accuracies: Vec::new(),
                failures: Vec::new(),
                interval: None,
            })
        })
        .collect();
    let n_levels = cfg.error_sweep.len();
    for (&(r, l), res) in jobs.iter().zip(results) {
        match res {
            Ok(per_alg) => {
                for (a, acc) in per_alg.into_iter().enumerate() {
                    let cell = &mut cells[a * n_levels + l];
                    match acc {
                        Ok(v) => cell.accuracies.push(v),
                        Err(message) => {
                            warn!("{} at ±{}°, run {r}: {message}", cell.algorithm, cell.error_halfwidth_deg);
                            cell.failures.push(RunFailure { run: r, message });
                        }
                    }
                }
            }
            Err(e) => {
                for a in 0..cfg.algorithms.len() {
                    cells[a * n_levels + l].failures.push(RunFailure {
                        run: r,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    for c in &mut cells {
        c.interval = aggregate_runs(&c.accuracies).ok();
    }
    let leaders = leaders(&cells, &cfg.error_sweep);
    let monotonicity = monotonicity(&cells, &cfg.algorithms, n_levels);
    Ok(ExperimentReport {
        config: cfg.clone(),
        dataset: db.meta.summary.clone(),
        cells,
        leaders,
        monotonicity,
        timing: Timing {
            generation_s: None,
            experiment_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Best mean per level; ties go to the algorithm listed first.
fn leaders(cells: &[CellResult], sweep: &[f64]) -> Vec<LevelLeader> {
    sweep
        .iter()
        .filter_map(|&hw| {
            let mut best: Option<LevelLeader> = None;
            for c in cells.iter().filter(|c| c.error_halfwidth_deg == hw) {
                if let Some(m) = c.mean() {
                    if best.as_ref().is_none_or(|b| m > b.mean_accuracy) {
                        best = Some(LevelLeader {
                            error_halfwidth_deg: hw,
                            algorithm: c.algorithm,
                            mean_accuracy: m,
                        });
                    }
                }
            }
            best
        })
        .collect()
}

/// Levels are compared in increasing half-width order.
fn monotonicity(cells: &[CellResult], algorithms: &[Algorithm], n_levels: usize) -> Vec<MonotonicityCheck> {
    algorithms
        .iter()
        .enumerate()
        .map(|(a, &alg)| {
            let mut row: Vec<(f64, f64)> = cells[a * n_levels..(a + 1) * n_levels]
                .iter()
                .filter_map(|c| c.mean().map(|m| (c.error_halfwidth_deg, m)))
                .collect();
            row.sort_by(|x, y| x.0.total_cmp(&y.0));
            let max_rise = row
                .windows(2)
                .map(|w| w[1].1 - w[0].1)
                .reduce(f64::max);
            MonotonicityCheck {
                algorithm: alg,
                max_rise,
                non_increasing_within_slack: max_rise.is_none_or(|r| r <= MONOTONE_SLACK),
            }
        })
        .collect()
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    pub fn from_json(text: &str, location: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("{location}:{}:{}", e.line(), e.column()), e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn cell(&self, algorithm: Algorithm, halfwidth: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.error_halfwidth_deg == halfwidth)
    }

    /// The report with timing cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        ExperimentReport {
            timing: Timing::default(),
            ..self.clone()
        }
    }
}
