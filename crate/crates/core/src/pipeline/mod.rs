//! Dataset generation, the error-sweep experiment and report rendering.

mod config;
mod experiment;
mod generate;
mod report;

use std::path::Path;
use std::time::Instant;

pub use config::{ExperimentConfig, Preset, SWEEP_LEVELS};
pub use experiment::{
    noise_seed, noisy_windows, run_experiment, CellResult, ExperimentReport, LevelLeader, MonotonicityCheck,
    RunFailure, Timing, MONOTONE_SLACK, PLOT_FILE, PLOT_HEADER, REPORT_FILE,
};
pub use generate::{
    build_database, generate_database, pmu_sites, read_windows, write_windows, BuildOptions, BuildOutput, CaseRecord,
    ConditionSummary, Database, DatabaseMeta, DatasetSummary, SkippedCase, DATASET_FILE, METADATA_FILE,
    WINDOWS_FILE,
};
pub use report::{plot_rows, read_plot_csv, render_report, save_plot_csv, write_plot_csv, PlotRow};

use crate::error::{Error, Result};
use crate::network::load_network;
use crate::pmu::{solve_placement, verify_observability, PlacementOptions, PlacementProblem, PlacementReport};

/// Solves the placement problem for a network file and writes the result.
pub fn cmd_placement(network_path: &Path, use_zero_injection: bool, out: &Path) -> Result<PlacementReport> {
    let model = load_network(network_path)?;
    let problem = PlacementProblem::from_network(&model, use_zero_injection);
    let sol = solve_placement(&problem, &PlacementOptions::default())?;
    let obs = verify_observability(&problem, &sol.placed)?;
    if !obs.observable {
        return Err(Error::Infeasible(format!("placement leaves buses {:?} unobserved", obs.unobserved)));
    }
    let report = PlacementReport::new(&model.name, &problem, &sol);
    report.save(out)?;
    Ok(report)
}

/// Generates the database and writes it into `out_dir`.
pub fn cmd_generate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(Database, f64)> {
    let start = Instant::now();
    let db = generate_database(cfg)?;
    db.save(out_dir)?;
    Ok((db, start.elapsed().as_secs_f64()))
}

/// Runs the sweep on an existing database (`dataset_dir`) or on a freshly
/// generated one, then writes the report and plot data into `out_dir`.
pub fn cmd_experiment(cfg: &ExperimentConfig, out_dir: &Path, dataset_dir: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (mut db, generation_s) = match dataset_dir {
        Some(dir) => (Database::load(dir)?, None),
        None => {
            let (db, t) = cmd_generate(cfg, out_dir)?;
            (db, Some(t))
        }
    };
    db.meta.config = db.meta.config.with_experiment_settings(cfg);
    let mut report = run_experiment(&db)?;
    report.timing.generation_s = generation_s;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    report.save(out_dir.join(REPORT_FILE))?;
    save_plot_csv(&plot_rows(&report), out_dir.join(PLOT_FILE))?;
    Ok(report)
}

/// Renders a saved report; optionally rewrites its plot data.
pub fn cmd_report(report_path: &Path, plot_out: Option<&Path>) -> Result<String> {
    let report = ExperimentReport::load(report_path)?;
    if let Some(p) = plot_out {
        save_plot_csv(&plot_rows(&report), p)?;
    }
    Ok(render_report(&report))
}

impl ExperimentConfig {
    /// `self` (the generation settings of a database) with the experiment
    /// stage settings taken from `other`.
    pub fn with_experiment_settings(&self, other: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            error_sweep: other.error_sweep.clone(),
            n_runs: other.n_runs,
            algorithms: other.algorithms.clone(),
            worker_count: other.worker_count,
            train_frac: other.train_frac,
            validation_frac_of_train: other.validation_frac_of_train,
            error_model: other.error_model,
            hyperparameters: other.hyperparameters.clone(),
            ..self.clone()
        }
    }
}
