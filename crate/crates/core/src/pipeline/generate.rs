use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::dynamics::{initialize_dynamics, simulate_case, DynamicModel, SimulatorConfig};
use crate::error::{Error, Result};
use crate::ml::{CaseKey, Dataset, Provenance};
use crate::network::{load_network, NetworkModel};
use crate::pmu::{
    build_features, solve_placement, synthesize_window, FeatureSchema, MeasurementWindow, PlacementOptions,
    PlacementProblem, WINDOW_SAMPLES,
};
use crate::scenario::{
    apply_solar, generate_contingencies, generate_operating_conditions, ingest_hourly_load, solar_penetration,
    Contingency, OperatingCondition, SeasonCalendar, SolarConfig,
};
use crate::security::label_case;

pub const DATASET_FILE: &str = "dataset.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const WINDOWS_FILE: &str = "windows.bin";

const WINDOWS_MAGIC: &[u8; 8] = b"DSAWIN01";

/// Outcome of one simulated case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub key: CaseKey,
    pub secure: bool,
    pub tsi_percent: f64,
    pub delta_max_deg: f64,
    pub voltage_violations: usize,
    pub terminated_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub key: CaseKey,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub id: usize,
    pub hour: usize,
    pub variant: usize,
    pub load_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub season: String,
    pub n_oc_requested: usize,
    pub n_oc_solved: usize,
    pub n_contingencies: usize,
    pub n_cases: usize,
    pub n_secure: usize,
    pub n_insecure: usize,
    /// Cases of the full `n_oc x n_c` grid that produced no row.
    pub n_skipped: usize,
    pub n_pmu: usize,
    pub n_features: usize,
    pub solar_penetration: f64,
}

/// Everything about a generated database except the windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseMeta {
    pub config: ExperimentConfig,
    pub summary: DatasetSummary,
    pub pmu_buses: Vec<u32>,
    pub placement_proven_optimal: Option<bool>,
    pub solar: Option<SolarConfig>,
    pub operating_conditions: Vec<ConditionSummary>,
    pub contingencies: Vec<Contingency>,
    pub cases: Vec<CaseRecord>,
    pub skipped: Vec<SkippedCase>,
}

/// Labels plus clean (noise-free) PMU windows, one per case.
#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    pub meta: DatabaseMeta,
    pub windows: Vec<MeasurementWindow>,
}

/// Settings shared by every case of a build.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub simulator: SimulatorConfig,
    pub tsi_threshold: f64,
    pub schema: FeatureSchema,
}

pub struct BuildOutput {
    pub cases: Vec<CaseRecord>,
    pub windows: Vec<MeasurementWindow>,
    pub skipped: Vec<SkippedCase>,
}

/// Simulates, labels and windows every `(condition, contingency)` pair.
/// Case ids are `oc.id * n_c + cont.id`. Failures are logged and skipped.
pub fn build_database(
    model: &NetworkModel,
    conditions: &[OperatingCondition],
    contingencies: &[Contingency],
    pmu_buses: &[u32],
    opts: &BuildOptions,
) -> BuildOutput {
    let n_c = contingencies.len();
    let dynamics: Vec<std::result::Result<DynamicModel, String>> = conditions
        .par_iter()
        .map(|oc| initialize_dynamics(model, &oc.solved).map_err(|e| e.to_string()))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|o| (0..n_c).map(move |c| (o, c)))
        .collect();
    let results: Vec<std::result::Result<(CaseRecord, MeasurementWindow), SkippedCase>> = jobs
        .par_iter()
        .map(|&(o, c)| {
            let (oc, cont) = (&conditions[o], &contingencies[c]);
            let key = CaseKey {
                case_id: oc.id * n_c + cont.id,
                oc_id: oc.id,
                cont_id: cont.id,
            };
            let skip = |reason: String| {
                warn!("case {} (oc {}, contingency {}) skipped: {reason}", key.case_id, oc.id, cont.id);
                SkippedCase { key, reason }
            };
            let dynamic = dynamics[o].as_ref().map_err(|e| skip(format!("initialization: {e}")))?;
            let trace = simulate_case(dynamic, cont, &opts.simulator).map_err(|e| skip(format!("simulation: {e}")))?;
            if let Some(d) = &trace.diagnostic {
                return Err(skip(format!("simulation: {d}")));
            }
            let label = label_case(&trace, opts.tsi_threshold).map_err(|e| skip(format!("labelling: {e}")))?;
            let t0 = opts.schema.window_start(cont, trace.sample_rate);
            let window = synthesize_window(&trace, pmu_buses, t0).map_err(|e| skip(format!("window: {e}")))?;
            Ok((
                CaseRecord {
                    key,
                    secure: label.secure,
                    tsi_percent: label.tsi_percent,
                    delta_max_deg: label.delta_max,
                    voltage_violations: label.voltage_violations.len(),
                    terminated_early: trace.terminated_early,
                },
                window,
            ))
        })
        .collect();
    let mut out = BuildOutput {
        cases: Vec::new(),
        windows: Vec::new(),
        skipped: Vec::new(),
    };
    for r in results {
        match r {
            Ok((c, w)) => {
                out.cases.push(c);
                out.windows.push(w);
            }
            Err(s) => out.skipped.push(s),
        }
    }
    out
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))
}

/// PMU sites for a network: the configured list, or an optimal placement.
pub fn pmu_sites(model: &NetworkModel, cfg: &ExperimentConfig) -> Result<(Vec<u32>, Option<bool>)> {
    if let Some(b) = &cfg.pmu_buses {
        for id in b {
            if model.bus_index(*id).is_none() {
                return Err(Error::InvalidInput(format!("PMU bus {id} is not in the network")));
            }
        }
        return Ok((b.clone(), None));
    }
    let problem = PlacementProblem::from_network(model, cfg.use_zero_injection);
    let sol = solve_placement(&problem, &PlacementOptions::default())?;
    if !sol.proven_optimal {
        warn!("PMU placement not proven optimal within the node budget");
    }
    Ok((problem.placed_ids(&sol.placed), Some(sol.proven_optimal)))
}

/// Stage one: scenarios, simulations, labels and clean windows.
pub fn generate_database(cfg: &ExperimentConfig) -> Result<Database> {
    cfg.validate()?;
    let base = load_network(&cfg.network_path)?;
    let profiles = ingest_hourly_load(&cfg.load_csv_path, &SeasonCalendar::default())?;
    let profile = profiles
        .iter()
        .find(|p| p.season == cfg.season)
        .ok_or_else(|| Error::InvalidInput(format!("load archive has no {} data", cfg.season)))?;
    let pool = thread_pool(cfg.worker_count)?;
    pool.install(|| {
        let (model, solar) = if cfg.solar_target > 0.0 {
            let (m, s) = apply_solar(&base, cfg.solar_target, cfg.master_seed)?;
            info!("solar: {} units replaced, penetration {:.4}", s.replaced_machines.len(), s.achieved_penetration);
            (m, Some(s))
        } else {
            (base, None)
        };
        let (pmu_buses, proven) = pmu_sites(&model, cfg)?;
        info!("{} PMU sites", pmu_buses.len());
        let set = generate_operating_conditions(&model, profile, cfg.n_oc, cfg.master_seed, &cfg.conditions)?;
        let conts = generate_contingencies(&model, cfg.n_c, cfg.k_max, cfg.master_seed, &cfg.contingencies)?;
        let opts = BuildOptions {
            simulator: cfg.simulator.clone(),
            tsi_threshold: cfg.tsi_threshold,
            schema: cfg.feature_schema,
        };
        let built = build_database(&model, &set.conditions, &conts, &pmu_buses, &opts);
        let n_secure = built.cases.iter().filter(|c| c.secure).count();
        let summary = DatasetSummary {
            season: cfg.season.to_string(),
            n_oc_requested: cfg.n_oc,
            n_oc_solved: set.conditions.len(),
            n_contingencies: conts.len(),
            n_cases: built.cases.len(),
            n_secure,
            n_insecure: built.cases.len() - n_secure,
            n_skipped: cfg.n_oc * cfg.n_c - built.cases.len(),
            n_pmu: pmu_buses.len(),
            n_features: cfg.feature_schema.len(pmu_buses.len(), conts.len()),
            solar_penetration: solar_penetration(&model),
        };
        Ok(Database {
            meta: DatabaseMeta {
                config: cfg.clone(),
                summary,
                pmu_buses,
                placement_proven_optimal: proven,
                solar,
                operating_conditions: set
                    .conditions
                    .iter()
                    .map(|oc| ConditionSummary {
                        id: oc.id,
                        hour: oc.hour,
                        variant: oc.variant,
                        load_scale: oc.load_scale,
                    })
                    .collect(),
                contingencies: conts,
                cases: built.cases,
                skipped: built.skipped,
            },
            windows: built.windows,
        })
    })
}

impl Database {
    pub fn n_contingencies(&self) -> usize {
        self.meta.contingencies.len()
    }

    /// Feature rows from `windows` (clean or noisy, in case order).
    pub fn dataset_from(&self, windows: &[MeasurementWindow], error_halfwidth: Option<f64>) -> Result<Dataset> {
        let schema = self.meta.config.feature_schema;
        let n_c = self.n_contingencies();
        let features: Result<Vec<Vec<f64>>> = self
            .meta
            .cases
            .iter()
            .zip(windows)
            .map(|(c, w)| build_features(w, &self.meta.contingencies[c.key.cont_id], n_c, schema))
            .collect();
        let cfg = &self.meta.config;
        Ok(Dataset {
            keys: self.meta.cases.iter().map(|c| c.key).collect(),
            features: features?,
            labels: self.meta.cases.iter().map(|c| u8::from(c.secure)).collect(),
            feature_names: schema.names(&self.meta.pmu_buses, n_c),
            provenance: Provenance {
                season: Some(cfg.season.to_string()),
                solar_target: cfg.solar_target,
                error_halfwidth_deg: error_halfwidth,
                master_seed: cfg.master_seed,
            },
        })
    }

    pub fn clean_dataset(&self) -> Result<Dataset> {
        self.dataset_from(&self.windows, None)
    }

    /// Writes `dataset.csv`, `metadata.json` and `windows.bin` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.clean_dataset()?.save_csv(dir.join(DATASET_FILE))?;
        let meta_path = dir.join(METADATA_FILE);
        let text = serde_json::to_string_pretty(&self.meta).expect("metadata is serializable");
        std::fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;
        let win_path = dir.join(WINDOWS_FILE);
        let f = std::fs::File::create(&win_path).map_err(|e| Error::io(&win_path, e))?;
        write_windows(BufWriter::new(f), &self.windows).map_err(|e| Error::io(&win_path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Database> {
        let dir = dir.as_ref();
        let meta_path = dir.join(METADATA_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: DatabaseMeta = serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("{}:{}:{}", meta_path.display(), e.line(), e.column()), e))?;
        let win_path = dir.join(WINDOWS_FILE);
        let f = std::fs::File::open(&win_path).map_err(|e| Error::io(&win_path, e))?;
        let windows = read_windows(BufReader::new(f), &meta.pmu_buses, &win_path.display().to_string())?;
        if windows.len() != meta.cases.len() {
            return Err(Error::parse(
                win_path.display().to_string(),
                format!("{} windows for {} cases", windows.len(), meta.cases.len()),
            ));
        }
        Ok(Database { meta, windows })
    }
}

/// Little-endian layout: magic, `n_cases`, `n_pmu`, `n_samples` (u64), then
/// per case `t_start` and the `[bus][sample]` magnitudes and angles (f64).
pub fn write_windows(mut w: impl Write, windows: &[MeasurementWindow]) -> std::io::Result<()> {
    let n_pmu = windows.first().map_or(0, |x| x.pmu_buses.len());
    w.write_all(WINDOWS_MAGIC)?;
    for v in [windows.len(), n_pmu, WINDOW_SAMPLES] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for win in windows {
        w.write_all(&win.t_start.to_le_bytes())?;
        for block in [&win.v_mag, &win.v_ang] {
            for row in block.iter() {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()
}

pub fn read_windows(mut r: impl Read, pmu_buses: &[u32], location: &str) -> Result<Vec<MeasurementWindow>> {
    let io = |e: std::io::Error| Error::parse(location, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != WINDOWS_MAGIC {
        return Err(Error::parse(location, "not a window file"));
    }
    let mut u = [0u8; 8];
    let mut next_u64 = |r: &mut dyn Read| -> Result<usize> {
        r.read_exact(&mut u).map_err(io)?;
        Ok(u64::from_le_bytes(u) as usize)
    };
    let n = next_u64(&mut r)?;
    let n_pmu = next_u64(&mut r)?;
    let n_s = next_u64(&mut r)?;
    if n_s != WINDOW_SAMPLES || (n > 0 && n_pmu != pmu_buses.len()) {
        return Err(Error::parse(location, format!("layout {n_pmu} x {n_s} does not match metadata")));
    }
    let mut buf = [0u8; 8];
    let mut next_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut buf).map_err(io)?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t_start = next_f64(&mut r)?;
        let mut block = || -> Result<Vec<Vec<f64>>> {
            (0..n_pmu)
                .map(|_| (0..n_s).map(|_| next_f64(&mut r)).collect())
                .collect()
        };
        let v_mag = block()?;
        let v_ang = block()?;
        out.push(MeasurementWindow {
            pmu_buses: pmu_buses.to_vec(),
            v_mag,
            v_ang,
            t_start,
            is_noisy: false,
            clamped: 0,
        });
    }
    Ok(out)
}
