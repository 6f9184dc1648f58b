use std::path::Path;

use dsa_core::dynamics::{initialize_dynamics, simulate_case, SimulatorConfig};
use dsa_core::ml::{Algorithm, CaseKey};
use dsa_core::network::{bundled, solve_power_flow, Dispatch, PowerFlowOptions};
use dsa_core::pipeline::*;
use dsa_core::pmu::{FeatureSchema, MeasurementWindow, PlacementReport, WINDOW_SAMPLES};
use dsa_core::scenario::{generate_contingencies, Contingency, ContingencyOptions, OperatingCondition, Season};
use dsa_core::security::{label_case, DEFAULT_TSI_THRESHOLD};
use dsa_core::seed;
use rand::Rng;

fn smib_conditions() -> Vec<OperatingCondition> {
    let model = bundled("smib.json").unwrap();
    [1.0, 0.8]
        .iter()
        .enumerate()
        .map(|(id, &s)| {
            let dispatch = Dispatch {
                machine_p_mw: model.machines.iter().map(|m| m.p_set * s).collect(),
                load_scale: 1.0,
            };
            let solved = solve_power_flow(&model, &dispatch, &PowerFlowOptions::default()).unwrap();
            OperatingCondition {
                id,
                season: Season::Summer,
                hour: 0,
                variant: id,
                load_scale: 1.0,
                dispatch: dispatch.machine_p_mw,
                solved,
            }
        })
        .collect()
}

fn build_opts() -> BuildOptions {
    BuildOptions {
        simulator: SimulatorConfig::default(),
        tsi_threshold: DEFAULT_TSI_THRESHOLD,
        schema: FeatureSchema::PrefaultMeanPlusContingency,
    }
}

#[test]
fn smib_database_matches_individual_cases() {
    let model = bundled("smib.json").unwrap();
    let ocs = smib_conditions();
    let conts = generate_contingencies(&model, 2, 1, 4, &ContingencyOptions::default()).unwrap();
    let out = build_database(&model, &ocs, &conts, &[1, 2], &build_opts());
    assert_eq!(out.cases.len(), 4);
    assert!(out.skipped.is_empty());
    for case in &out.cases {
        let oc = &ocs[case.key.oc_id];
        let cont = &conts[case.key.cont_id];
        let dynamic = initialize_dynamics(&model, &oc.solved).unwrap();
        let trace = simulate_case(&dynamic, cont, &SimulatorConfig::default()).unwrap();
        let label = label_case(&trace, DEFAULT_TSI_THRESHOLD).unwrap();
        assert_eq!(case.secure, label.secure);
        assert_eq!(case.tsi_percent, label.tsi_percent);
        assert_eq!(case.key.case_id, case.key.oc_id * 2 + case.key.cont_id);
    }
}

#[test]
fn failing_cases_are_skipped_not_relabelled() {
    let model = bundled("smib.json").unwrap();
    let ocs = smib_conditions();
    let mut conts = generate_contingencies(&model, 1, 1, 0, &ContingencyOptions::default()).unwrap();
    conts.push(Contingency {
        id: 1,
        faulted_lines: vec![99],
        ..conts[0].clone()
    });
    let out = build_database(&model, &ocs, &conts, &[1, 2], &build_opts());
    assert_eq!(out.cases.len(), 2);
    assert_eq!(out.skipped.len(), 2);
    assert!(out.skipped.iter().all(|s| s.key.cont_id == 1 && !s.reason.is_empty()));
}

fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        n_oc: 24,
        n_c: 2,
        n_runs: 2,
        error_sweep: vec![0.0],
        algorithms: vec![Algorithm::Cart],
        use_zero_injection: false,
        master_seed: 3,
        ..ExperimentConfig::preset(Preset::Desk)
    }
}

fn read_all(dir: &Path) -> Vec<Vec<u8>> {
    [DATASET_FILE, METADATA_FILE, WINDOWS_FILE]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn minimal_experiment_and_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = tiny_config();
    let report = cmd_experiment(&cfg, &a, None).unwrap();
    assert_eq!(report.cells.len(), 1);
    let cell = &report.cells[0];
    assert_eq!(cell.accuracies.len(), 2, "{:?} {:?}", cell.failures, report.dataset);
    assert_eq!(cell.interval.unwrap().n_runs, 2);
    let d = &report.dataset;
    assert_eq!(d.n_secure + d.n_insecure, cfg.n_oc * cfg.n_c - d.n_skipped);
    assert_eq!(d.n_features, 2 * d.n_pmu + 2);

    let again = cmd_experiment(&ExperimentConfig { worker_count: 1, ..cfg.clone() }, &b, None).unwrap();
    assert_eq!(read_all(&a), read_all(&b));
    assert_eq!(again.without_timing(), ExperimentReport { config: again.config.clone(), ..report.without_timing() });

    let db = Database::load(&a).unwrap();
    assert_eq!(db.meta.cases.len(), d.n_cases);
    let reused = cmd_experiment(&cfg, &tmp.path().join("c"), Some(&a)).unwrap();
    assert_eq!(reused.cells, report.cells);

    let text = cmd_report(&a.join(REPORT_FILE), None).unwrap();
    let table_rows = text.lines().filter(|l| l.starts_with("cart ")).count();
    assert_eq!(table_rows, 2, "{text}");
    let plot = read_plot_csv(&std::fs::read_to_string(a.join(PLOT_FILE)).unwrap(), "plot").unwrap();
    assert_eq!(plot, plot_rows(&report));
    assert_eq!(plot[0].mean_accuracy, Some(report.cells[0].interval.unwrap().mean));
}

#[test]
fn solar_penetration_is_reported() {
    let cfg = ExperimentConfig {
        solar_target: 0.10,
        n_c: 1,
        pmu_buses: Some(vec![8, 20, 40]),
        ..tiny_config()
    };
    let db = generate_database(&cfg).unwrap();
    let p = db.meta.summary.solar_penetration;
    assert!((0.08..=0.12).contains(&p), "{p}");
    assert!(!db.meta.solar.as_ref().unwrap().replaced_machines.is_empty());
}

/// Two PMUs; bus 1's mean angle is `±margin` by label, bus 2 is noise.
fn synthetic_database(n: usize, margin: f64) -> Database {
    let mut rng = seed::rng(17);
    let cont = Contingency {
        id: 0,
        faulted_lines: vec![0],
        ..Contingency::none()
    };
    let mut cases = Vec::new();
    let mut windows = Vec::new();
    for i in 0..n {
        let secure = i % 2 == 1;
        let centre = if secure { margin } else { -margin };
        let a1 = centre + rng.random_range(-0.5..0.5);
        let a2 = rng.random_range(-5.0..5.0);
        windows.push(MeasurementWindow {
            pmu_buses: vec![1, 2],
            v_mag: vec![vec![1.0; WINDOW_SAMPLES]; 2],
            v_ang: vec![vec![a1; WINDOW_SAMPLES], vec![a2; WINDOW_SAMPLES]],
            t_start: 4.0,
            is_noisy: false,
            clamped: 0,
        });
        cases.push(CaseRecord {
            key: CaseKey {
                case_id: i,
                oc_id: i,
                cont_id: 0,
            },
            secure,
            tsi_percent: 50.0,
            delta_max_deg: 100.0,
            voltage_violations: 0,
            terminated_early: false,
        });
    }
    let mut config = ExperimentConfig::preset(Preset::Desk);
    config.n_runs = 6;
    config.hyperparameters.rf.n_trees = 30;
    config.hyperparameters.mlp.max_epochs = 150;
    Database {
        meta: DatabaseMeta {
            config,
            summary: DatasetSummary {
                season: "summer".into(),
                n_oc_requested: n,
                n_oc_solved: n,
                n_contingencies: 1,
                n_cases: n,
                n_secure: n / 2,
                n_insecure: n - n / 2,
                n_skipped: 0,
                n_pmu: 2,
                n_features: 5,
                solar_penetration: 0.0,
            },
            pmu_buses: vec![1, 2],
            placement_proven_optimal: None,
            solar: None,
            operating_conditions: Vec::new(),
            contingencies: vec![cont],
            cases,
            skipped: Vec::new(),
        },
        windows,
    }
}

#[test]
fn accuracy_falls_with_channel_error() {
    let db = synthetic_database(240, 2.0);
    let report = run_experiment(&db).unwrap();
    assert_eq!(report.cells.len(), 16);
    for m in &report.monotonicity {
        assert!(m.non_increasing_within_slack, "{m:?}\n{}", render_report(&report));
    }
    for alg in Algorithm::ALL {
        let clean = report.cell(alg, 0.0).unwrap().mean().unwrap();
        let worst = report.cell(alg, 3.0).unwrap().mean().unwrap();
        assert!(clean > 0.95 && worst < clean, "{alg}: {clean} -> {worst}");
    }
    assert_eq!(report.leaders.len(), 4);
}

#[test]
fn noise_is_fresh_per_run_level_and_case() {
    let db = synthetic_database(20, 2.0);
    let a = noisy_windows(&db, 0, 1.0).unwrap();
    assert_eq!(a, noisy_windows(&db, 0, 1.0).unwrap());
    assert_ne!(a, noisy_windows(&db, 1, 1.0).unwrap());
    assert_ne!(a, noisy_windows(&db, 0, 2.0).unwrap());
    assert_ne!(a[0].v_ang[0][0] - db.windows[0].v_ang[0][0], a[2].v_ang[0][0] - db.windows[2].v_ang[0][0]);
}

#[test]
fn window_file_round_trip() {
    let db = synthetic_database(6, 1.0);
    let mut buf = Vec::new();
    write_windows(&mut buf, &db.windows).unwrap();
    assert_eq!(read_windows(&buf[..], &[1, 2], "w").unwrap(), db.windows);
    assert!(read_windows(&buf[..20], &[1, 2], "w").is_err());
}

#[test]
fn placement_command_writes_a_verified_set() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("placement.json");
    let net = dsa_core::network::bundled_data_dir().join("ieee118.json");
    let r = cmd_placement(&net, false, &out).unwrap();
    assert_eq!(PlacementReport::load(&out).unwrap(), r);
    assert!(r.proven_optimal);
    assert_eq!(r.buses.len(), 32);
}

#[test]
fn missing_inputs_fail_before_simulation() {
    let cfg = ExperimentConfig {
        load_csv_path: "/nonexistent/load.csv".into(),
        ..tiny_config()
    };
    let err = generate_database(&cfg).unwrap_err();
    assert!(matches!(err, dsa_core::Error::Io { .. }), "{err}");
    let err = ExperimentReport::from_json("{\"config\": 3}", "r.json").unwrap_err().to_string();
    assert!(err.contains("r.json:1:"), "{err}");
}
