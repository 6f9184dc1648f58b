use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::network::{ReducedNetwork, ReductionInputs};
use crate::error::{Error, Result};
use crate::network::{NetworkModel, PowerFlowSolution, TopologyOverrides};

/// Tolerance for reproducing the power-flow voltages at t = 0.
pub const INIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    /// Rotor angle, radians.
    pub delta: f64,
    /// Speed deviation, per-unit.
    pub omega: f64,
    /// Internal EMF magnitude, per-unit (constant during a run).
    pub e_mag: f64,
}

/// EMF behind transient reactance: `E = V + j xd' I` with `I = conj(S / V)`.
pub fn internal_emf(terminal: Complex64, power: Complex64, xd_prime: f64) -> Complex64 {
    let current = (power / terminal).conj();
    terminal + Complex64::new(0.0, xd_prime) * current
}

/// Classical-model dynamic data of one operating condition.
#[derive(Debug, Clone)]
pub struct DynamicModel {
    pub(crate) model: NetworkModel,
    pub(crate) inputs: ReductionInputs,
    /// Indices into `model.machines` of the conventional units.
    pub conventional: Vec<usize>,
    pub initial: Vec<MachineState>,
    /// Mechanical power, per-unit, equal to the t = 0 electrical power.
    pub p_mech: Vec<f64>,
    pub h: Vec<f64>,
    pub damping: Vec<f64>,
    pub prefault: ReducedNetwork,
    /// Power-flow voltages, for reference.
    pub v_prefault: Vec<Complex64>,
}

/// Converts a solved operating point into classical machine states, load
/// admittances and solar current injections, and reduces the pre-fault
/// network.
pub fn initialize_dynamics(model: &NetworkModel, pf: &PowerFlowSolution) -> Result<DynamicModel> {
    let n = model.n_buses();
    let base = model.base_mva;
    let v = pf.voltages();
    let mut diagonal = vec![Complex64::new(0.0, 0.0); n];
    let mut injection = vec![Complex64::new(0.0, 0.0); n];
    for l in &model.loads {
        let i = model.bus_index(l.bus).expect("validated");
        let s = Complex64::new(l.p, l.q) * pf.load_scale / base;
        diagonal[i] += s.conj() / pf.v_mag[i].powi(2);
    }

    let mut conventional = Vec::new();
    let mut machine_bus = Vec::new();
    let mut machine_y = Vec::new();
    let mut emf = Vec::new();
    for (k, mach) in model.machines.iter().enumerate() {
        let i = model.bus_index(mach.bus).expect("validated");
        if v[i].norm() < 1e-9 {
            return Err(Error::Initialization {
                bus: mach.bus,
                reason: "zero terminal voltage".into(),
            });
        }
        let s = Complex64::new(pf.p_gen[k], pf.q_gen[k]);
        if mach.is_solar {
            injection[i] += (s / v[i]).conj();
            continue;
        }
        let e = internal_emf(v[i], s, mach.xd_prime);
        let y = Complex64::new(0.0, mach.xd_prime).inv();
        diagonal[i] += y;
        conventional.push(k);
        machine_bus.push(i);
        machine_y.push(y);
        emf.push(e);
    }
    if conventional.is_empty() {
        return Err(Error::InvalidInput("no conventional machines to simulate".into()));
    }

    let inputs = ReductionInputs {
        diagonal,
        machine_bus,
        machine_y,
        injection,
    };
    let prefault = ReducedNetwork::build(model, &TopologyOverrides::default(), &inputs)?;

    let v_check = prefault.bus_voltages(&emf);
    let (worst, err) = v_check
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b).norm())
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    if err > INIT_TOLERANCE {
        return Err(Error::Initialization {
            bus: model.buses[worst].id,
            reason: format!("network solution at t=0 deviates from power flow by {err:.3e} pu"),
        });
    }

    let m = conventional.len();
    let e_re: Vec<f64> = emf.iter().map(|e| e.re).collect();
    let e_im: Vec<f64> = emf.iter().map(|e| e.im).collect();
    let mut p_mech = vec![0.0; m];
    prefault.electrical_power(&e_re, &e_im, &mut p_mech);

    let initial = emf
        .iter()
        .map(|e| MachineState {
            delta: e.arg(),
            omega: 0.0,
            e_mag: e.norm(),
        })
        .collect();
    Ok(DynamicModel {
        model: model.clone(),
        h: conventional.iter().map(|&k| model.machines[k].h).collect(),
        damping: conventional.iter().map(|&k| model.machines[k].d).collect(),
        inputs,
        conventional,
        initial,
        p_mech,
        prefault,
        v_prefault: v,
    })
}

impl DynamicModel {
    pub fn network(&self) -> &NetworkModel {
        &self.model
    }

    pub fn n_machines(&self) -> usize {
        self.conventional.len()
    }

    /// Bus ids of the conventional machines, in state order.
    pub fn machine_buses(&self) -> Vec<u32> {
        self.conventional
            .iter()
            .map(|&k| self.model.machines[k].bus)
            .collect()
    }

    /// Reduces an arbitrary topology of this operating condition.
    pub fn reduce(&self, overrides: &TopologyOverrides) -> Result<ReducedNetwork> {
        ReducedNetwork::build(&self.model, overrides, &self.inputs)
    }

    /// Energy function of the reduced classical model (kinetic plus
    /// potential, relative to the initial equilibrium).
    ///
    /// Transfer conductances are left out, so the value is exactly conserved
    /// only for networks whose reduced matrix has no off-diagonal
    /// conductance (lossless SMIB-type systems).
    pub fn energy(&self, net: &ReducedNetwork, states: &[MachineState], omega_s: f64) -> f64 {
        let m = self.n_machines();
        let mut w = 0.0;
        for k in 0..m {
            let s = &states[k];
            let s0 = &self.initial[k];
            let g_kk = net.admittance(k, k).re;
            w += self.h[k] * omega_s * s.omega * s.omega;
            w -= (self.p_mech[k] - s.e_mag * s.e_mag * g_kk) * (s.delta - s0.delta);
            for j in (k + 1)..m {
                let b = net.admittance(k, j).im;
                let now = (s.delta - states[j].delta).cos();
                let then = (s0.delta - self.initial[j].delta).cos();
                w -= s.e_mag * states[j].e_mag * b * (now - then);
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unloaded_machine_emf_equals_terminal() {
        let e = internal_emf(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 0.3);
        assert_eq!(e, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn loaded_machine_emf_by_hand() {
        let e = internal_emf(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 0.3);
        assert!((e - Complex64::new(1.0, 0.3)).norm() < 1e-12);
        assert!((e.norm() - 1.0440).abs() < 1e-4);
        assert!((e.arg().to_degrees() - 16.699).abs() < 1e-3);
    }
}
