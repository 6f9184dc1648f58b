use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_admittance, BusKind, NetworkModel, TopologyOverrides};
use crate::error::{Error, Result};

/// Generation and load schedule for one operating condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    /// Active output per machine, MW. Slack-bus machines absorb the residual.
    pub machine_p_mw: Vec<f64>,
    /// Multiplier applied to every load's P and Q.
    pub load_scale: f64,
}

impl Dispatch {
    /// The schedule stored in the model itself.
    pub fn base(model: &NetworkModel) -> Self {
        Dispatch {
            machine_p_mw: model.machines.iter().map(|m| m.p_set).collect(),
            load_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub enforce_q_limits: bool,
    /// Slack generation above this (MW) sets `slack_limit_exceeded`.
    pub slack_limit_mw: Option<f64>,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions {
            tolerance: 1e-8,
            max_iterations: 30,
            enforce_q_limits: true,
            slack_limit_mw: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Per-unit, ordered as `model.buses`.
    pub v_mag: Vec<f64>,
    /// Radians, slack at zero.
    pub v_ang: Vec<f64>,
    /// Per-unit, ordered as `model.machines`.
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub max_mismatch: f64,
    /// Mismatch evaluations performed (a flat start that already satisfies
    /// the equations counts as one).
    pub iterations: usize,
    /// Bus ids switched from PV to PQ at a reactive limit.
    pub q_limited: Vec<u32>,
    pub slack_limit_exceeded: bool,
    pub load_scale: f64,
}

impl PowerFlowSolution {
    pub fn voltage(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.v_mag[i], self.v_ang[i])
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        (0..self.v_mag.len()).map(|i| self.voltage(i)).collect()
    }
}

/// Net scheduled injections per bus in per-unit: (P, Q, load P, load Q).
/// Slack P and PV Q are whatever the machines produce, so only the load part
/// is meaningful there.
pub fn bus_injections(model: &NetworkModel, dispatch: &Dispatch) -> (Vec<f64>, Vec<f64>) {
    let n = model.n_buses();
    let base = model.base_mva;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for (k, m) in model.machines.iter().enumerate() {
        let i = model.bus_index(m.bus).expect("validated");
        p[i] += dispatch.machine_p_mw[k] / base;
    }
    for l in &model.loads {
        let i = model.bus_index(l.bus).expect("validated");
        p[i] -= l.p * dispatch.load_scale / base;
        q[i] -= l.q * dispatch.load_scale / base;
    }
    (p, q)
}

/// Complex power injected into every bus by the network, `V conj(Y V)`.
fn calc_power(y: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += y[(i, j)] * v[j];
            }
            v[i] * acc.conj()
        })
        .collect()
}

/// Residual `S_calc - S_sched` for every bus (complex, per-unit).
pub fn power_mismatch(
    y: &DMatrix<Complex64>,
    v_mag: &[f64],
    v_ang: &[f64],
    p_sched: &[f64],
    q_sched: &[f64],
) -> Vec<Complex64> {
    let v: Vec<Complex64> = v_mag
        .iter()
        .zip(v_ang)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    calc_power(y, &v)
        .into_iter()
        .enumerate()
        .map(|(i, s)| s - Complex64::new(p_sched[i], q_sched[i]))
        .collect()
}

/// Solves the AC power flow by Newton-Raphson in polar coordinates.
pub fn solve_power_flow(
    model: &NetworkModel,
    dispatch: &Dispatch,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    if dispatch.machine_p_mw.len() != model.machines.len() {
        return Err(Error::Dimension {
            expected: model.machines.len(),
            got: dispatch.machine_p_mw.len(),
        });
    }
    let n = model.n_buses();
    let base = model.base_mva;
    let y = build_admittance(model, &TopologyOverrides::default());
    let (p_sched, mut q_sched) = bus_injections(model, dispatch);
    let (_, q_load) = bus_injections(
        model,
        &Dispatch {
            machine_p_mw: vec![0.0; model.machines.len()],
            load_scale: dispatch.load_scale,
        },
    );

    let mut has_machine = vec![false; n];
    let mut q_min = vec![0.0; n];
    let mut q_max = vec![0.0; n];
    for m in &model.machines {
        let i = model.bus_index(m.bus).expect("validated");
        has_machine[i] = true;
        q_min[i] += m.q_limits[0] / base;
        q_max[i] += m.q_limits[1] / base;
    }
    let mut kind: Vec<BusKind> = model
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| match b.kind {
            BusKind::Pv if !has_machine[i] => BusKind::Pq,
            k => k,
        })
        .collect();

    let mut v_mag: Vec<f64> = model
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| match kind[i] {
            BusKind::Pq => 1.0,
            _ => b.voltage_setpoint.unwrap_or(1.0),
        })
        .collect();
    let mut v_ang = vec![0.0; n];
    let mut iterations = 0;
    let mut q_limited = Vec::new();

    loop {
        let (its, mismatch) =
            newton(&y, &kind, &mut v_mag, &mut v_ang, &p_sched, &q_sched, opts)?;
        iterations += its;
        if !opts.enforce_q_limits {
            break;
        }
        let s = calc_power(&y, &v_mag.iter().zip(&v_ang).map(|(&m, &a)| Complex64::from_polar(m, a)).collect::<Vec<_>>());
        let mut switched = false;
        for i in 0..n {
            if kind[i] != BusKind::Pv {
                continue;
            }
            let q_gen = s[i].im - q_load[i];
            let limit = if q_gen > q_max[i] + 1e-9 {
                Some(q_max[i])
            } else if q_gen < q_min[i] - 1e-9 {
                Some(q_min[i])
            } else {
                None
            };
            if let Some(lim) = limit {
                debug!("bus {} hits reactive limit {:.4} pu", model.buses[i].id, lim);
                kind[i] = BusKind::Pq;
                q_sched[i] = lim + q_load[i];
                q_limited.push(model.buses[i].id);
                switched = true;
            }
        }
        if !switched {
            debug!("power flow converged, mismatch {mismatch:.2e}");
            break;
        }
    }

    let v: Vec<Complex64> = v_mag
        .iter()
        .zip(&v_ang)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    let s = calc_power(&y, &v);
    let max_mismatch = (0..n)
        .map(|i| match kind[i] {
            BusKind::Slack => 0.0,
            BusKind::Pv => (s[i].re - p_sched[i]).abs(),
            BusKind::Pq => (s[i].re - p_sched[i]).abs().max((s[i].im - q_sched[i]).abs()),
        })
        .fold(0.0, f64::max);

    let (p_gen, q_gen) = machine_outputs(model, dispatch, &s, &q_load);
    let slack = model.slack_index();
    let slack_mw = (s[slack].re - (p_sched[slack] - slack_machine_p(model, dispatch))) * base;
    let slack_limit_exceeded = opts.slack_limit_mw.is_some_and(|lim| slack_mw > lim);
    if slack_limit_exceeded {
        warn!("slack generation {slack_mw:.1} MW exceeds configured limit");
    }
    q_limited.sort_unstable();

    Ok(PowerFlowSolution {
        v_mag,
        v_ang,
        p_gen,
        q_gen,
        max_mismatch,
        iterations,
        q_limited,
        slack_limit_exceeded,
        load_scale: dispatch.load_scale,
    })
}

fn slack_machine_p(model: &NetworkModel, dispatch: &Dispatch) -> f64 {
    let slack_id = model.slack_bus().id;
    model
        .machines
        .iter()
        .zip(&dispatch.machine_p_mw)
        .filter(|(m, _)| m.bus == slack_id)
        .map(|(_, p)| p / model.base_mva)
        .sum()
}

/// Splits bus-level generation among the machines on each bus.
fn machine_outputs(
    model: &NetworkModel,
    dispatch: &Dispatch,
    s: &[Complex64],
    q_load: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let base = model.base_mva;
    let n = model.n_buses();
    let slack = model.slack_index();
    let mut by_bus: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, m) in model.machines.iter().enumerate() {
        by_bus[model.bus_index(m.bus).expect("validated")].push(k);
    }
    let mut p_gen: Vec<f64> = dispatch.machine_p_mw.iter().map(|p| p / base).collect();
    let mut q_gen = vec![0.0; model.machines.len()];
    for (i, ks) in by_bus.iter().enumerate() {
        if ks.is_empty() {
            continue;
        }
        let p_load: f64 = model
            .loads
            .iter()
            .filter(|l| l.bus == model.buses[i].id)
            .map(|l| l.p * dispatch.load_scale / base)
            .sum();
        if i == slack {
            let total = s[i].re + p_load;
            let sched: f64 = ks.iter().map(|&k| dispatch.machine_p_mw[k].max(0.0)).sum();
            for &k in ks {
                let w = if sched > 0.0 {
                    dispatch.machine_p_mw[k].max(0.0) / sched
                } else {
                    1.0 / ks.len() as f64
                };
                p_gen[k] = total * w;
            }
        }
        let q_total = s[i].im - q_load[i];
        let span: f64 = ks
            .iter()
            .map(|&k| model.machines[k].q_limits[1] - model.machines[k].q_limits[0])
            .sum();
        for &k in ks {
            let m = &model.machines[k];
            let w = if span > 0.0 {
                (m.q_limits[1] - m.q_limits[0]) / span
            } else {
                1.0 / ks.len() as f64
            };
            q_gen[k] = q_total * w;
        }
    }
    (p_gen, q_gen)
}

/// Newton iterations for a fixed bus-type assignment. Returns the number of
/// mismatch evaluations and the final mismatch.
fn newton(
    y: &DMatrix<Complex64>,
    kind: &[BusKind],
    v_mag: &mut [f64],
    v_ang: &mut [f64],
    p_sched: &[f64],
    q_sched: &[f64],
    opts: &PowerFlowOptions,
) -> Result<(usize, f64)> {
    let n = v_mag.len();
    let pvpq: Vec<usize> = (0..n).filter(|&i| kind[i] != BusKind::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| kind[i] == BusKind::Pq).collect();
    let (npvpq, npq) = (pvpq.len(), pq.len());
    let dim = npvpq + npq;
    let mut evals = 0;
    let mut mismatch = f64::INFINITY;

    for _ in 0..=opts.max_iterations {
        let v: Vec<Complex64> = v_mag
            .iter()
            .zip(v_ang.iter())
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect();
        let current: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|j| y[(i, j)] * v[j]).sum())
            .collect();
        let s: Vec<Complex64> = (0..n).map(|i| v[i] * current[i].conj()).collect();
        let mut f = DVector::zeros(dim);
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = s[i].re - p_sched[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[npvpq + r] = s[i].im - q_sched[i];
        }
        evals += 1;
        mismatch = f.amax();
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < opts.tolerance {
            return Ok((evals, mismatch));
        }
        if evals > opts.max_iterations {
            break;
        }

        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let unit: Vec<Complex64> = v.iter().map(|x| x / x.norm()).collect();
        let j_unit = Complex64::new(0.0, 1.0);
        let ds_dva = |i: usize, k: usize| -> Complex64 {
            let mut t = -(y[(i, k)] * v[k]).conj();
            if i == k {
                t += current[i].conj();
            }
            j_unit * v[i] * t
        };
        let ds_dvm = |i: usize, k: usize| -> Complex64 {
            let mut t = v[i] * (y[(i, k)] * unit[k]).conj();
            if i == k {
                t += current[i].conj() * unit[i];
            }
            t
        };
        let mut jac = DMatrix::zeros(dim, dim);
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(r, c)] = ds_dva(i, k).re;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(r, npvpq + c)] = ds_dvm(i, k).re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(npvpq + r, c)] = ds_dva(i, k).im;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(npvpq + r, npvpq + c)] = ds_dvm(i, k).im;
            }
        }
        let dx = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::Singular("power-flow Jacobian".into()))?;
        for (r, &i) in pvpq.iter().enumerate() {
            v_ang[i] -= dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            v_mag[i] -= dx[npvpq + r];
        }
    }
    Err(Error::NotConverged {
        iterations: evals,
        mismatch,
    })
}
