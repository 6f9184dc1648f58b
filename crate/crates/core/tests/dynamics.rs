mod common;

use dsa_core::dynamics::*;
use dsa_core::network::{bundled, solve_power_flow, Dispatch, PowerFlowOptions};
use dsa_core::scenario::{generate_contingencies, Contingency};
use num_complex::Complex64;

use common::*;

#[test]
fn smib_critical_clearing_time_matches_equal_area() {
    let smib = bundled("smib.json").unwrap();
    let dynamic = init(&smib);
    let oracle = eac_oracle();
    // initial angle agrees with the hand calculation
    let sim_delta0 = dynamic.initial[1].delta - dynamic.initial[0].delta;
    assert!((sim_delta0 - oracle.delta0).abs() < 1e-9);
    let cct_oracle = oracle.critical_clearing_time();

    let (mut lo, mut hi) = (0.01, 1.0);
    assert!(smib_is_stable(&dynamic, lo));
    assert!(!smib_is_stable(&dynamic, hi));
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if smib_is_stable(&dynamic, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let cct = 0.5 * (lo + hi);
    let rel = (cct - cct_oracle).abs() / cct_oracle;
    println!("CCT simulated {cct:.4} s, equal-area {cct_oracle:.4} s, rel {rel:.4}");
    assert!(rel < 0.05);

    // before / after the critical time
    let cfg = SimulatorConfig::default();
    let stable = simulate_case(&dynamic, &smib_fault(0.8 * cct_oracle), &cfg).unwrap();
    assert!(!stable.terminated_early);
    let unstable = simulate_case(&dynamic, &smib_fault(1.2 * cct_oracle), &cfg).unwrap();
    assert!(unstable.terminated_early && unstable.t_last < 20.0);
}

#[test]
fn smib_energy_is_conserved_without_damping() {
    let smib = bundled("smib.json").unwrap();
    let dynamic = init(&smib);
    let cfg = SimulatorConfig::default();
    let cont = smib_fault(0.1);
    let phases = case_phases(&dynamic, &cont, &cfg).unwrap();
    let mut at_clear = Vec::new();
    integrate_fixed(&dynamic, phases.fault_on.as_ref().unwrap(), &cfg, &dynamic.initial, 0.1, |_, s| {
        at_clear = s.to_vec()
    });
    let post = phases.postfault.as_ref().unwrap();
    let w0 = dynamic.energy(post, &at_clear, cfg.omega_s());
    let mut worst: f64 = 0.0;
    integrate_fixed(&dynamic, post, &cfg, &at_clear, 20.0, |_, s| {
        worst = worst.max((dynamic.energy(post, s, cfg.omega_s()) - w0).abs());
    });
    println!("energy {w0:.6}, max drift {worst:.3e}");
    assert!(w0.abs() > 1e-3);
    assert!(worst / w0.abs() < 0.01);
}

#[test]
fn ieee118_initialization_reproduces_power_flow() {
    let m = bundled("ieee118.json").unwrap();
    let pf = solve_power_flow(&m, &Dispatch::base(&m), &PowerFlowOptions::default()).unwrap();
    let dynamic = initialize_dynamics(&m, &pf).unwrap();
    let e: Vec<Complex64> = dynamic
        .initial
        .iter()
        .map(|s| Complex64::from_polar(s.e_mag, s.delta))
        .collect();
    let v = dynamic.prefault.bus_voltages(&e);
    for i in 0..118 {
        assert!((v[i] - pf.voltage(i)).norm() < 1e-6);
    }
    // mechanical power equals dispatched power
    for (j, &k) in dynamic.conventional.iter().enumerate() {
        assert!((dynamic.p_mech[j] - pf.p_gen[k]).abs() < 1e-6);
    }
}

#[test]
fn ieee118_equilibrium_holds_without_contingency() {
    let m = bundled("ieee118.json").unwrap();
    let dynamic = init(&m);
    let trace = simulate_case(&dynamic, &Contingency::none(), &SimulatorConfig::default()).unwrap();
    assert_eq!(trace.len(), 601);
    assert!(!trace.terminated_early);
    for (s, row) in trace.rotor_angle.iter().enumerate() {
        assert_eq!(trace.times[s], s as f64 / 30.0);
        for (k, &d) in row.iter().enumerate() {
            let drift = (d - dynamic.initial[k].delta.to_degrees()).to_radians().abs();
            assert!(drift < 1e-6, "sample {s} machine {k}: {drift}");
        }
    }
}

#[test]
fn ieee118_prefault_samples_equal_power_flow_and_step_halving_converges() {
    let m = bundled("ieee118.json").unwrap();
    let pf = solve_power_flow(&m, &Dispatch::base(&m), &PowerFlowOptions::default()).unwrap();
    let dynamic = initialize_dynamics(&m, &pf).unwrap();
    let cs = generate_contingencies(&m, 4, 1, 2, &Default::default()).unwrap();
    let cfg = SimulatorConfig::default();
    let fine = SimulatorConfig {
        dt: cfg.dt / 2.0,
        ..cfg.clone()
    };
    let mut checked_stable = false;
    for c in &cs {
        let a = simulate_case(&dynamic, c, &cfg).unwrap();
        for s in 0..150 {
            assert!(a.times[s] < 5.0);
            for i in 0..118 {
                assert!((a.v_mag[s][i] - pf.v_mag[i]).abs() < 1e-6);
                assert!((a.v_ang[s][i] - pf.v_ang[i].to_degrees()).abs() < 1e-4);
            }
        }
        if a.terminated_early {
            continue;
        }
        let b = simulate_case(&dynamic, c, &fine).unwrap();
        assert_eq!(a.len(), b.len());
        let last = a.len() - 1;
        for k in 0..dynamic.n_machines() {
            let diff = (a.rotor_angle[last][k] - b.rotor_angle[last][k]).abs();
            assert!(diff < 0.1, "machine {k}: {diff} deg");
        }
        checked_stable = true;
    }
    assert!(checked_stable);
}

#[test]
fn trace_csv_header() {
    let smib = bundled("smib.json").unwrap();
    let dynamic = init(&smib);
    let cfg = SimulatorConfig {
        t_end: 0.1,
        ..Default::default()
    };
    let trace = simulate_case(&dynamic, &Contingency::none(), &cfg).unwrap();
    let mut out = Vec::new();
    trace.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,bus_1_vmag,bus_1_vang,bus_2_vmag,bus_2_vang,gen_1_delta,gen_2_delta"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn invalid_config_rejected() {
    let smib = bundled("smib.json").unwrap();
    let dynamic = init(&smib);
    let cfg = SimulatorConfig {
        dt: 0.05,
        ..Default::default()
    };
    assert!(simulate_case(&dynamic, &Contingency::none(), &cfg).is_err());
}

