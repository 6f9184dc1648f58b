//! `dsa`: placement, dataset generation, the error-sweep experiment and
//! report rendering.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsa_core::network::bundled_data_dir;
use dsa_core::pipeline::{
    cmd_experiment, cmd_generate, cmd_placement, cmd_report, render_report, ExperimentConfig, Preset, PLOT_FILE,
    REPORT_FILE,
};

const PLACEMENT_FILE: &str = "placement.json";

#[derive(Parser)]
#[command(name = "dsa", version, about = "Dynamic security assessment workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve optimal PMU placement and write placement.json.
    Placement(PlacementArgs),
    /// Simulate every case and write the clean dataset.
    Generate(RunArgs),
    /// Run the error sweep and write report.json and plot_data.csv.
    Experiment(ExperimentArgs),
    /// Print a saved report as text tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: desk (24 x 12) or paper (full scale, 96 x 50).
    #[arg(long)]
    preset: Option<Preset>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Use a dataset written by `generate` instead of generating one.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct PlacementArgs {
    /// Network file; defaults to the bundled IEEE 118-bus case.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Apply zero-injection observability rules.
    #[arg(long)]
    zero_injection: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by `experiment`.
    report: PathBuf,
    /// Also rewrite the plot-data CSV into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn config_error(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_error(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn resolve_config(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(config_error)?,
        None => ExperimentConfig::preset(args.preset.unwrap_or(Preset::Desk)),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.worker_count = w;
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| runtime_error(format!("cannot create {}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Placement(a) => {
            let network = a.network.unwrap_or_else(|| bundled_data_dir().join("ieee118.json"));
            if !network.is_file() {
                return Err(config_error(format!("network file {} not found", network.display())));
            }
            create_dir(&a.out)?;
            let out = a.out.join(PLACEMENT_FILE);
            let r = cmd_placement(&network, a.zero_injection, &out).map_err(runtime_error)?;
            println!(
                "{}: {} PMUs{} ({}, {} nodes, {:.2} s)",
                r.network,
                r.buses.len(),
                if r.use_zero_injection { " with zero injection" } else { "" },
                if r.proven_optimal { "proven optimal" } else { "best found" },
                r.nodes_explored,
                r.wall_time_s
            );
            println!("buses: {:?}", r.buses);
            println!("wrote {}", out.display());
        }
        Command::Generate(a) => {
            let cfg = resolve_config(&a.config)?;
            create_dir(&a.out)?;
            let (db, secs) = cmd_generate(&cfg, &a.out).map_err(runtime_error)?;
            let s = &db.meta.summary;
            println!(
                "{} cases: {} secure, {} insecure, {} skipped ({} PMUs, {} features, {:.1} s)",
                s.n_cases, s.n_secure, s.n_insecure, s.n_skipped, s.n_pmu, s.n_features, secs
            );
            println!("wrote {}", a.out.display());
        }
        Command::Experiment(a) => {
            let cfg = resolve_config(&a.run.config)?;
            if let Some(d) = &a.dataset {
                if !d.is_dir() {
                    return Err(config_error(format!("dataset directory {} not found", d.display())));
                }
            }
            create_dir(&a.run.out)?;
            let report = cmd_experiment(&cfg, &a.run.out, a.dataset.as_deref()).map_err(runtime_error)?;
            print!("{}", render_report(&report));
            println!(
                "wrote {} and {}",
                a.run.out.join(REPORT_FILE).display(),
                a.run.out.join(PLOT_FILE).display()
            );
        }
        Command::Report(a) => {
            let plot = match &a.out {
                Some(dir) => {
                    create_dir(dir)?;
                    Some(dir.join(PLOT_FILE))
                }
                None => None,
            };
            let text = cmd_report(&a.report, plot.as_deref()).map_err(runtime_error)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
