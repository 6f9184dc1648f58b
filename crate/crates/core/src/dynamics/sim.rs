use std::io::Write;

use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::init::{DynamicModel, MachineState};
use super::network::ReducedNetwork;
use crate::error::{Error, Result};
use crate::network::{BranchFault, TopologyOverrides};
use crate::scenario::Contingency;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    /// Integration step, seconds.
    pub dt: f64,
    pub t_end: f64,
    /// Samples per second of the recorded trace.
    pub sample_rate: f64,
    /// Magnitude of the reactive shunt admittance at the fault point, pu.
    pub fault_admittance: f64,
    /// Pairwise rotor separation (degrees) that ends a run early.
    pub divergence_cutoff: f64,
    pub frequency_hz: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            dt: 1.0 / 150.0,
            t_end: 20.0,
            sample_rate: 30.0,
            fault_admittance: 1e4,
            divergence_cutoff: 720.0,
            frequency_hz: 60.0,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1.0 / (2.0 * self.sample_rate)) {
            return Err(Error::InvalidInput(format!(
                "dt = {} must be positive and at most half the sample period",
                self.dt
            )));
        }
        if !(self.fault_admittance > 0.0) {
            return Err(Error::InvalidInput("fault_admittance must be positive".into()));
        }
        if !(self.t_end > 0.0 && self.sample_rate > 0.0) {
            return Err(Error::InvalidInput("t_end and sample_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }
}

/// Rotor angles and bus voltages sampled at `sample_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    /// `times[i] = i / sample_rate`.
    pub times: Vec<f64>,
    /// Degrees, `[sample][machine]`, conventional machines only.
    pub rotor_angle: Vec<Vec<f64>>,
    /// Per-unit, `[sample][bus]`.
    pub v_mag: Vec<Vec<f64>>,
    /// Degrees, `[sample][bus]`.
    pub v_ang: Vec<Vec<f64>>,
    pub terminated_early: bool,
    pub t_last: f64,
    pub bus_ids: Vec<u32>,
    pub machine_buses: Vec<u32>,
    pub sample_rate: f64,
    pub t_fault: f64,
    /// Set when the run stopped on a non-finite state.
    pub diagnostic: Option<String>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Debug dump: `t,<bus_i_vmag>,<bus_i_vang>,...,<gen_j_delta>,...`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for b in &self.bus_ids {
            header.push(format!("bus_{b}_vmag"));
            header.push(format!("bus_{b}_vang"));
        }
        for g in &self.machine_buses {
            header.push(format!("gen_{g}_delta"));
        }
        writeln!(w, "{}", header.join(","))?;
        for s in 0..self.len() {
            let mut row = vec![self.times[s].to_string()];
            for i in 0..self.bus_ids.len() {
                row.push(self.v_mag[s][i].to_string());
                row.push(self.v_ang[s][i].to_string());
            }
            row.extend(self.rotor_angle[s].iter().map(|d| d.to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Pre-fault, fault-on and post-fault reduced networks of one contingency.
pub struct CasePhases {
    pub prefault: ReducedNetwork,
    pub fault_on: Option<ReducedNetwork>,
    pub postfault: Option<ReducedNetwork>,
}

pub fn case_phases(
    dynamic: &DynamicModel,
    cont: &Contingency,
    cfg: &SimulatorConfig,
) -> Result<CasePhases> {
    if cont.faulted_lines.is_empty() {
        return Ok(CasePhases {
            prefault: dynamic.prefault.clone(),
            fault_on: None,
            postfault: None,
        });
    }
    let n_branches = dynamic.model.branches.len();
    if let Some(&bad) = cont.faulted_lines.iter().find(|&&k| k >= n_branches) {
        return Err(Error::InvalidInput(format!("contingency {} names unknown branch {bad}", cont.id)));
    }
    if !(cont.t_clear > cont.t_fault) {
        return Err(Error::InvalidInput("t_clear must follow t_fault".into()));
    }
    let y_fault = Complex64::new(0.0, -cfg.fault_admittance);
    let during = TopologyOverrides {
        faults: cont
            .faulted_lines
            .iter()
            .map(|&branch| BranchFault {
                branch,
                fraction: cont.fault_fraction,
                admittance: y_fault,
            })
            .collect(),
        ..Default::default()
    };
    let after = TopologyOverrides {
        out_of_service: cont.faulted_lines.iter().copied().collect(),
        ..Default::default()
    };
    Ok(CasePhases {
        prefault: dynamic.prefault.clone(),
        fault_on: Some(dynamic.reduce(&during)?),
        postfault: Some(dynamic.reduce(&after)?),
    })
}

/// Simulates one contingency from the operating condition's equilibrium.
pub fn simulate_case(
    dynamic: &DynamicModel,
    cont: &Contingency,
    cfg: &SimulatorConfig,
) -> Result<SimulationTrace> {
    simulate_from(dynamic, cont, cfg, &dynamic.initial)
}

/// Like [`simulate_case`] but starting from arbitrary machine states.
pub fn simulate_from(
    dynamic: &DynamicModel,
    cont: &Contingency,
    cfg: &SimulatorConfig,
    start: &[MachineState],
) -> Result<SimulationTrace> {
    cfg.validate()?;
    let phases = case_phases(dynamic, cont, cfg)?;
    let mut sim = Integrator::new(dynamic, cfg, start);
    let faulted = phases.fault_on.is_some();
    let network_at = |t: f64| -> &ReducedNetwork {
        if !faulted || t < cont.t_fault {
            &phases.prefault
        } else if t < cont.t_clear {
            phases.fault_on.as_ref().unwrap()
        } else {
            phases.postfault.as_ref().unwrap()
        }
    };
    let events: Vec<f64> = if faulted {
        vec![cont.t_fault, cont.t_clear]
    } else {
        vec![]
    };

    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let n_samples = (cfg.t_end * cfg.sample_rate).round() as usize + 1;
    let sample_step: Vec<usize> = (0..n_samples)
        .map(|i| ((i as f64 / cfg.sample_rate) / cfg.dt).round() as usize)
        .collect();

    let mut trace = SimulationTrace {
        times: Vec::with_capacity(n_samples),
        rotor_angle: Vec::with_capacity(n_samples),
        v_mag: Vec::with_capacity(n_samples),
        v_ang: Vec::with_capacity(n_samples),
        terminated_early: false,
        t_last: 0.0,
        bus_ids: dynamic.model.buses.iter().map(|b| b.id).collect(),
        machine_buses: dynamic.machine_buses(),
        sample_rate: cfg.sample_rate,
        t_fault: if faulted { cont.t_fault } else { f64::INFINITY },
        diagnostic: None,
    };

    let mut next_sample = 0;
    let mut step = 0;
    loop {
        let t = step as f64 * cfg.dt;
        while next_sample < n_samples && sample_step[next_sample] == step {
            let ts = next_sample as f64 / cfg.sample_rate;
            sim.record(network_at(t), ts, &mut trace);
            next_sample += 1;
            if let Some(reason) = sim.non_finite() {
                trace.terminated_early = true;
                trace.diagnostic = Some(reason);
                break;
            }
            if sim.separation_deg() > cfg.divergence_cutoff {
                debug!("contingency {}: divergence at t = {ts:.3}", cont.id);
                trace.terminated_early = true;
                break;
            }
        }
        if trace.terminated_early || step >= n_steps || next_sample >= n_samples {
            break;
        }
        let t_next = (step + 1) as f64 * cfg.dt;
        // Split the step at topology switching instants.
        let mut t0 = t;
        for &te in &events {
            if te > t0 && te < t_next {
                sim.rk4(network_at(t0), te - t0);
                t0 = te;
            }
        }
        sim.rk4(network_at(t0), t_next - t0);
        step += 1;
    }
    trace.t_last = trace.times.last().copied().unwrap_or(0.0);
    if trace.terminated_early && trace.t_last >= cfg.t_end {
        trace.terminated_early = false;
    }
    Ok(trace)
}

/// Fixed-step RK4 on the swing equations of the reduced classical model.
pub(crate) struct Integrator<'a> {
    dynamic: &'a DynamicModel,
    omega_s: f64,
    delta: Vec<f64>,
    omega: Vec<f64>,
    e_mag: Vec<f64>,
    // scratch
    e_re: Vec<f64>,
    e_im: Vec<f64>,
    pe: Vec<f64>,
    k_d: [Vec<f64>; 4],
    k_w: [Vec<f64>; 4],
    d_tmp: Vec<f64>,
    w_tmp: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub(crate) fn new(dynamic: &'a DynamicModel, cfg: &SimulatorConfig, start: &[MachineState]) -> Self {
        let m = dynamic.n_machines();
        let z = || vec![0.0; m];
        Integrator {
            dynamic,
            omega_s: cfg.omega_s(),
            delta: start.iter().map(|s| s.delta).collect(),
            omega: start.iter().map(|s| s.omega).collect(),
            e_mag: start.iter().map(|s| s.e_mag).collect(),
            e_re: z(),
            e_im: z(),
            pe: z(),
            k_d: [z(), z(), z(), z()],
            k_w: [z(), z(), z(), z()],
            d_tmp: z(),
            w_tmp: z(),
        }
    }

    pub(crate) fn states(&self) -> Vec<MachineState> {
        (0..self.delta.len())
            .map(|k| MachineState {
                delta: self.delta[k],
                omega: self.omega[k],
                e_mag: self.e_mag[k],
            })
            .collect()
    }

    fn derivative(&mut self, net: &ReducedNetwork, delta: &[f64], omega: &[f64], stage: usize) {
        let dynamic = self.dynamic;
        for k in 0..delta.len() {
            let (s, c) = delta[k].sin_cos();
            self.e_re[k] = self.e_mag[k] * c;
            self.e_im[k] = self.e_mag[k] * s;
        }
        net.electrical_power(&self.e_re, &self.e_im, &mut self.pe);
        for k in 0..delta.len() {
            self.k_d[stage][k] = self.omega_s * omega[k];
            self.k_w[stage][k] = (dynamic.p_mech[k] - self.pe[k] - dynamic.damping[k] * omega[k])
                / (2.0 * dynamic.h[k]);
        }
    }

    pub(crate) fn rk4(&mut self, net: &ReducedNetwork, h: f64) {
        let m = self.delta.len();
        let delta = std::mem::take(&mut self.delta);
        let omega = std::mem::take(&mut self.omega);
        let mut d_tmp = std::mem::take(&mut self.d_tmp);
        let mut w_tmp = std::mem::take(&mut self.w_tmp);

        self.derivative(net, &delta, &omega, 0);
        for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for k in 0..m {
                d_tmp[k] = delta[k] + frac * h * self.k_d[stage - 1][k];
                w_tmp[k] = omega[k] + frac * h * self.k_w[stage - 1][k];
            }
            self.derivative(net, &d_tmp, &w_tmp, stage);
        }
        let mut delta = delta;
        let mut omega = omega;
        for k in 0..m {
            delta[k] += h / 6.0
                * (self.k_d[0][k] + 2.0 * self.k_d[1][k] + 2.0 * self.k_d[2][k] + self.k_d[3][k]);
            omega[k] += h / 6.0
                * (self.k_w[0][k] + 2.0 * self.k_w[1][k] + 2.0 * self.k_w[2][k] + self.k_w[3][k]);
        }
        self.delta = delta;
        self.omega = omega;
        self.d_tmp = d_tmp;
        self.w_tmp = w_tmp;
    }

    fn separation_deg(&self) -> f64 {
        let (lo, hi) = self
            .delta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        (hi - lo).to_degrees()
    }

    fn non_finite(&self) -> Option<String> {
        self.delta
            .iter()
            .chain(&self.omega)
            .any(|v| !v.is_finite())
            .then(|| "non-finite machine state".to_string())
    }

    fn record(&self, net: &ReducedNetwork, t: f64, trace: &mut SimulationTrace) {
        let e: Vec<Complex64> = self
            .delta
            .iter()
            .zip(&self.e_mag)
            .map(|(&d, &m)| Complex64::from_polar(m, d))
            .collect();
        let v = net.bus_voltages(&e);
        trace.times.push(t);
        trace.rotor_angle.push(self.delta.iter().map(|d| d.to_degrees()).collect());
        trace.v_mag.push(v.iter().map(|x| x.norm()).collect());
        trace.v_ang.push(v.iter().map(|x| x.arg().to_degrees()).collect());
    }
}

/// Runs the swing equations on a fixed network and hands every step's
/// states to `observe`; used for energy and convergence diagnostics.
pub fn integrate_fixed(
    dynamic: &DynamicModel,
    net: &ReducedNetwork,
    cfg: &SimulatorConfig,
    start: &[MachineState],
    duration: f64,
    mut observe: impl FnMut(f64, &[MachineState]),
) {
    let mut sim = Integrator::new(dynamic, cfg, start);
    let n = (duration / cfg.dt).round() as usize;
    observe(0.0, &sim.states());
    for s in 1..=n {
        sim.rk4(net, cfg.dt);
        observe(s as f64 * cfg.dt, &sim.states());
    }
}
