//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::f64::consts::PI;

use dsa_core::dynamics::{initialize_dynamics, simulate_case, DynamicModel, SimulatorConfig};
use dsa_core::ml::mlp::MlpNet;
use dsa_core::ml::Dataset;
use dsa_core::network::{solve_power_flow, Dispatch, NetworkModel, PowerFlowOptions};
use dsa_core::pmu::MeasurementWindow;
use dsa_core::scenario::Contingency;
use dsa_core::seed;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

pub fn init(model: &NetworkModel) -> DynamicModel {
    let pf = solve_power_flow(model, &Dispatch::base(model), &PowerFlowOptions::default()).unwrap();
    initialize_dynamics(model, &pf).unwrap()
}

pub fn smib_fault(clearing: f64) -> Contingency {
    Contingency {
        id: 1,
        faulted_lines: vec![0],
        fault_fraction: 0.1,
        t_fault: 1.0,
        t_clear: 1.0 + clearing,
    }
}

// ---------------------------------------------------------------------------
// Equal-area oracle for the bundled SMIB case, derived by hand from its data:
// generator E' behind xd' = 0.3 on bus 2, two parallel x = 0.5 lines to the
// infinite bus (modelled as xd' = 1e-4), fault on line 0 at 10% from bus 2
// through a -j1e4 shunt, P = 0.9 pu, H = 5 s, both buses held at 1.0 pu.
// ---------------------------------------------------------------------------

pub struct EacOracle {
    pub delta0: f64,
    pub p_mech: f64,
    pub p_fault: f64,
    pub p_post: f64,
    pub h: f64,
}

/// Off-diagonal entry between nodes 0 and `n-1` after eliminating the
/// interior nodes of a small nodal matrix by plain Gaussian elimination.
pub fn transfer(mut y: Vec<Vec<Complex64>>) -> Complex64 {
    let n = y.len();
    for p in (1..n - 1).rev() {
        let piv = y[p][p];
        for i in 0..n {
            for j in 0..n {
                if i != p && j != p {
                    let v = y[i][p] * y[p][j] / piv;
                    y[i][j] -= v;
                }
            }
        }
        for k in 0..n {
            y[p][k] = Complex64::new(0.0, 0.0);
            y[k][p] = Complex64::new(0.0, 0.0);
        }
    }
    y[0][n - 1]
}

pub fn eac_oracle() -> EacOracle {
    let (xd, xl, xinf, pm, h): (f64, f64, f64, f64, f64) = (0.3, 0.5, 1e-4, 0.9, 5.0);
    let theta = (pm * xl / 2.0).asin();
    let v2 = Complex64::from_polar(1.0, theta);
    let v1 = Complex64::new(1.0, 0.0);
    let i = (v2 - v1) / Complex64::new(0.0, xl / 2.0);
    let e = v2 + Complex64::new(0.0, xd) * i;
    let einf = v1 - Complex64::new(0.0, xinf) * i;
    let delta0 = e.arg() - einf.arg();
    let ee = e.norm() * einf.norm();

    // nodes: 0 = E', 1 = bus 2, 2 = fault point, 3 = bus 1, 4 = E_inf
    let z = Complex64::new(0.0, 0.0);
    let y = |x: f64| Complex64::new(0.0, -1.0 / x);
    let mut m = vec![vec![z; 5]; 5];
    let mut add = |a: usize, b: usize, g: Complex64| {
        m[a][a] += g;
        m[b][b] += g;
        m[a][b] -= g;
        m[b][a] -= g;
    };
    add(0, 1, y(xd));
    add(1, 2, y(0.1 * xl));
    add(2, 3, y(0.9 * xl));
    add(1, 3, y(xl));
    add(3, 4, y(xinf));
    m[2][2] += Complex64::new(0.0, -1e4);
    let b_fault = transfer(m).im;

    EacOracle {
        delta0,
        p_mech: pm,
        p_fault: ee * b_fault,
        p_post: ee / (xd + xl + xinf),
        h,
    }
}

impl EacOracle {
    pub fn critical_angle(&self) -> f64 {
        let d_max = PI - (self.p_mech / self.p_post).asin();
        let num = self.p_mech * (d_max - self.delta0) + self.p_post * d_max.cos()
            - self.p_fault * self.delta0.cos();
        (num / (self.p_post - self.p_fault)).acos()
    }

    /// Time for the fault-on swing to reach the critical angle, by fine RK4
    /// on the scalar equation.
    pub fn critical_clearing_time(&self) -> f64 {
        let ws = 2.0 * PI * 60.0;
        let target = self.critical_angle();
        let f = |d: f64| ws / (2.0 * self.h) * (self.p_mech - self.p_fault * d.sin());
        let (mut d, mut v, mut t, dt) = (self.delta0, 0.0f64, 0.0, 1e-5);
        while d < target {
            let (k1d, k1v) = (v, f(d));
            let (k2d, k2v) = (v + 0.5 * dt * k1v, f(d + 0.5 * dt * k1d));
            let (k3d, k3v) = (v + 0.5 * dt * k2v, f(d + 0.5 * dt * k2d));
            let (k4d, k4v) = (v + dt * k3v, f(d + dt * k3d));
            d += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            t += dt;
        }
        t
    }
}

pub fn smib_is_stable(dynamic: &DynamicModel, clearing: f64) -> bool {
    let cfg = SimulatorConfig {
        t_end: 6.0,
        ..Default::default()
    };
    let trace = simulate_case(dynamic, &smib_fault(clearing), &cfg).unwrap();
    !trace.terminated_early
}

// ---------------------------------------------------------------------------
// Exhaustive oracle with its own observability rules.
// ---------------------------------------------------------------------------

pub fn oracle_observable(n: usize, adj: &[Vec<bool>], zi: &[usize], mask: u32) -> bool {
    let mut obs: Vec<bool> = (0..n)
        .map(|i| (0..n).any(|j| mask >> j & 1 == 1 && (i == j || adj[i][j])))
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &z in zi {
            let group: Vec<usize> = (0..n).filter(|&k| k == z || adj[z][k]).collect();
            let missing: Vec<usize> = group.iter().copied().filter(|&k| !obs[k]).collect();
            if missing.len() == 1 {
                obs[missing[0]] = true;
                changed = true;
            }
        }
    }
    obs.iter().all(|&o| o)
}

pub fn oracle_optimum(n: usize, edges: &[(u32, u32)], zi: &[u32]) -> u32 {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a as usize - 1][b as usize - 1] = true;
        adj[b as usize - 1][a as usize - 1] = true;
    }
    let zi: Vec<usize> = zi.iter().map(|&z| z as usize - 1).collect();
    (0u32..1 << n)
        .filter(|&m| oracle_observable(n, &adj, &zi, m))
        .map(|m| m.count_ones())
        .min()
        .unwrap()
}

/// (bus count, edges, zero-injection buses), buses numbered from 1.
pub type ToyGraph = (usize, Vec<(u32, u32)>, Vec<u32>);

pub fn toy_graphs() -> Vec<ToyGraph> {
    let ring = |n: u32| (1..=n).map(|i| (i, i % n + 1)).collect::<Vec<_>>();
    let mut grid = Vec::new();
    for r in 0..3u32 {
        for c in 0..4u32 {
            let k = r * 4 + c + 1;
            if c < 3 {
                grid.push((k, k + 1));
            }
            if r < 2 {
                grid.push((k, k + 4));
            }
        }
    }
    let ieee14 = vec![
        (1, 2), (1, 5), (2, 3), (2, 4), (2, 5), (3, 4), (4, 5), (4, 7), (4, 9), (5, 6), (6, 11),
        (6, 12), (6, 13), (7, 8), (7, 9), (9, 10), (9, 14), (10, 11), (12, 13), (13, 14),
    ];
    vec![
        (3, vec![(1, 2), (2, 3)], vec![]),
        (5, vec![(1, 2), (1, 3), (1, 4), (1, 5)], vec![]),
        (9, ring(9), vec![3]),
        (12, grid, vec![6, 7]),
        (10, vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (9, 10), (2, 7)], vec![4]),
        (12, ieee14.iter().copied().filter(|&(a, b)| a <= 12 && b <= 12).collect(), vec![7]),
    ]
}

#[derive(Deserialize)]
pub struct PlacementOracle {
    pub optimal_count: usize,
}

pub fn placement_oracle() -> PlacementOracle {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/ieee118_placement_oracle.json"
    ))
    .unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Known 29-bus placement that observes IEEE-118 under zero-injection rules.
pub const REFERENCE_ZI_SET: [u32; 29] = [
    3, 8, 11, 12, 17, 20, 23, 28, 34, 37, 40, 45, 49, 52, 56, 62, 65, 72, 75, 77, 80, 85, 86, 91, 94,
    102, 105, 110, 114,
];

// ---------------------------------------------------------------------------
// Measurement statistics.
// ---------------------------------------------------------------------------

pub fn flat_window(n_bus: usize, v: f64) -> MeasurementWindow {
    MeasurementWindow {
        pmu_buses: (1..=n_bus as u32).collect(),
        v_mag: vec![vec![v; 30]; n_bus],
        v_ang: vec![vec![0.0; 30]; n_bus],
        t_start: 0.0,
        is_noisy: false,
        clamped: 0,
    }
}

pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

// ---------------------------------------------------------------------------
// Frozen IEEE-118 power-flow solution from an independent solver.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
pub struct PfOracle {
    pub bus_ids: Vec<u32>,
    pub v_mag: Vec<f64>,
    pub v_ang_deg: Vec<f64>,
}

pub fn pf_oracle() -> PfOracle {
    let text = include_str!("../fixtures/ieee118_pf_oracle.json");
    serde_json::from_str(text).unwrap()
}

// ---------------------------------------------------------------------------
// Learning oracles and benchmark data.
// ---------------------------------------------------------------------------

pub fn oracle_gini(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        0.0
    } else {
        1.0 - (c0 / n).powi(2) - (c1 / n).powi(2)
    }
}

/// Weighted child impurity of a split, computed from scratch.
pub fn oracle_split_impurity(x: &[Vec<f64>], y: &[u8], f: usize, t: f64) -> f64 {
    let mut c = [[0.0; 2]; 2];
    for (r, &l) in x.iter().zip(y) {
        c[usize::from(r[f] > t)][l as usize] += 1.0;
    }
    let n = y.len() as f64;
    let (nl, nr) = (c[0][0] + c[0][1], c[1][0] + c[1][1]);
    nl / n * oracle_gini(c[0][0], c[0][1]) + nr / n * oracle_gini(c[1][0], c[1][1])
}

/// Lowest child impurity over every feature and every cut between
/// distinct values.
pub fn oracle_best_impurity(x: &[Vec<f64>], y: &[u8]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let imp = oracle_split_impurity(x, y, f, (w[0] + w[1]) / 2.0);
            best = Some(best.map_or(imp, |b: f64| b.min(imp)));
        }
    }
    best
}

pub fn noisy_benchmark(n: usize, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let r: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let clean = r[0] * r[0] + r[1] * r[1] < 0.5 || r[2] > 0.6;
        let flip = rng.random_bool(0.1);
        labels.push(u8::from(clean != flip));
        rows.push(r);
    }
    Dataset::from_rows(rows, labels).unwrap()
}

pub fn separable(n: usize, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let l = (i % 2) as u8;
        let centre = if l == 1 { 3.0 } else { -3.0 };
        rows.push(vec![centre + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        labels.push(l);
    }
    Dataset::from_rows(rows, labels).unwrap()
}


/// Relative error between the analytic MLP gradient and central differences
/// for a small random network.
pub fn mlp_gradient_error(seed_value: u64) -> f64 {
    let mut rng = seed::rng(seed_value);
    let net = MlpNet::new(3, &[4, 4, 4], &mut rng);
    let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let labels: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let (_, grad) = net.loss_and_gradient(&refs, &labels);
    let p = net.params();
    let h = 1e-6;
    let mut fd = vec![0.0; p.len()];
    let mut probe = net.clone();
    for k in 0..p.len() {
        let mut q = p.clone();
        q[k] = p[k] + h;
        probe.set_params(&q);
        let up = probe.loss_and_gradient(&refs, &labels).0;
        q[k] = p[k] - h;
        probe.set_params(&q);
        let down = probe.loss_and_gradient(&refs, &labels).0;
        fd[k] = (up - down) / (2.0 * h);
    }
    let num: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt() + fd.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / den
}
