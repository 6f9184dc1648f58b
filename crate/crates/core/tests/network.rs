mod common;

use dsa_core::network::{
    build_admittance, bundled, bus_injections, power_mismatch, solve_power_flow, Dispatch,
    PowerFlowOptions, TopologyOverrides,
};

use common::*;

#[test]
fn ieee118_counts() {
    let m = bundled("ieee118.json").unwrap();
    assert_eq!(m.n_buses(), 118);
    assert_eq!(m.machines.len(), 54);
    assert_eq!(m.branches.len(), 186);
    let transformers = m.branches.iter().filter(|b| b.tap != 1.0).count();
    assert_eq!(transformers, 9);
    let zi: Vec<u32> = m.buses.iter().filter(|b| b.zero_injection()).map(|b| b.id).collect();
    assert_eq!(zi, vec![5, 9, 30, 37, 38, 63, 64, 68, 71, 81]);
    // dynamic overlay applied
    assert!(m.machines.iter().all(|g| g.h >= 2.0 && g.h <= 8.0 && g.xd_prime > 0.0));
}

#[test]
fn ieee118_matches_independent_power_flow() {
    let m = bundled("ieee118.json").unwrap();
    let opts = PowerFlowOptions {
        enforce_q_limits: false,
        ..Default::default()
    };
    let sol = solve_power_flow(&m, &Dispatch::base(&m), &opts).unwrap();
    assert!(sol.max_mismatch < 1e-8);
    let o = pf_oracle();
    let slack_ang = o.v_ang_deg[o.bus_ids.iter().position(|&b| b == m.slack_bus().id).unwrap()];
    for (k, &id) in o.bus_ids.iter().enumerate() {
        let i = m.bus_index(id).unwrap();
        let ang = sol.v_ang[i].to_degrees();
        let want_ang = o.v_ang_deg[k] - slack_ang;
        assert!((sol.v_mag[i] - o.v_mag[k]).abs() < 1e-5, "bus {id} |V|");
        // compare rectangular phasors in pu
        let got = num_complex::Complex64::from_polar(sol.v_mag[i], ang.to_radians());
        let want = num_complex::Complex64::from_polar(o.v_mag[k], want_ang.to_radians());
        assert!((got - want).norm() < 1e-5, "bus {id}: {got} vs {want}");
    }
}

#[test]
fn ieee118_with_reactive_limits_is_self_consistent() {
    let m = bundled("ieee118.json").unwrap();
    let dispatch = Dispatch::base(&m);
    let sol = solve_power_flow(&m, &dispatch, &PowerFlowOptions::default()).unwrap();
    assert!(sol.max_mismatch < 1e-8);
    assert!(!sol.q_limited.is_empty());
    // Recompute the residual from the returned voltages alone.
    let y = build_admittance(&m, &TopologyOverrides::default());
    let (p, q) = bus_injections(&m, &dispatch);
    let r = power_mismatch(&y, &sol.v_mag, &sol.v_ang, &p, &q);
    for (i, bus) in m.buses.iter().enumerate() {
        if i == m.slack_index() {
            continue;
        }
        assert!(r[i].re.abs() < 1e-8, "P residual at bus {}", bus.id);
        let has_gen = m.machines.iter().any(|g| g.bus == bus.id);
        if !has_gen {
            assert!(r[i].im.abs() < 1e-8, "Q residual at bus {}", bus.id);
        }
    }
    // Limited machines sit at a limit.
    for id in &sol.q_limited {
        let k = m.machines.iter().position(|g| g.bus == *id).unwrap();
        let q_mvar = sol.q_gen[k] * m.base_mva;
        let [lo, hi] = m.machines[k].q_limits;
        assert!((q_mvar - lo).abs() < 1e-6 || (q_mvar - hi).abs() < 1e-6);
    }
}

#[test]
fn ieee118_power_balance() {
    let m = bundled("ieee118.json").unwrap();
    let sol = solve_power_flow(&m, &Dispatch::base(&m), &PowerFlowOptions::default()).unwrap();
    let gen: f64 = sol.p_gen.iter().sum();
    let load = m.total_load_mw() / m.base_mva;
    // Series and shunt losses computed branch by branch.
    let mut losses = 0.0;
    for br in &m.branches {
        let i = m.bus_index(br.from_bus).unwrap();
        let j = m.bus_index(br.to_bus).unwrap();
        let y = dsa_core::network::branch_admittance(br);
        let (vi, vj) = (sol.voltage(i), sol.voltage(j));
        let ii = y[0][0] * vi + y[0][1] * vj;
        let ij = y[1][0] * vi + y[1][1] * vj;
        losses += (vi * ii.conj() + vj * ij.conj()).re;
    }
    for (i, b) in m.buses.iter().enumerate() {
        losses += b.shunt_g / m.base_mva * sol.v_mag[i].powi(2);
    }
    assert!((gen - load - losses).abs() < 1e-6, "{gen} {load} {losses}");
}
