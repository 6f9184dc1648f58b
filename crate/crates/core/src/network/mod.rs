//! Static network model, admittance matrices and Newton-Raphson power flow.
//!
//! Network files are JSON documents with top-level keys `base_mva`, `buses`,
//! `branches`, `machines` and `loads`. An optional `machines_file` key names a
//! sibling file whose per-bus dynamic data (`h`, `xd_prime`, `d`,
//! `rating_mva`) overrides the entries of `machines`.

mod admittance;
mod powerflow;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use admittance::{branch_admittance, build_admittance, BranchFault, TopologyOverrides};
pub use powerflow::{
    bus_injections, power_mismatch, solve_power_flow, Dispatch, PowerFlowOptions,
    PowerFlowSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub base_kv: f64,
    /// Per-unit voltage magnitude setpoint, PV and slack buses only.
    #[serde(default)]
    pub voltage_setpoint: Option<f64>,
    /// Absent in a file means "detect from attached load and generation".
    #[serde(default)]
    pub is_zero_injection: Option<bool>,
    /// Shunt conductance in MW consumed at 1.0 pu.
    #[serde(default)]
    pub shunt_g: f64,
    /// Shunt susceptance in MVAr injected at 1.0 pu.
    #[serde(default)]
    pub shunt_b: f64,
}

impl Bus {
    pub fn zero_injection(&self) -> bool {
        self.is_zero_injection.unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, per-unit.
    #[serde(default)]
    pub b_shunt: f64,
    #[serde(default = "one")]
    pub tap: f64,
    #[serde(default = "yes")]
    pub in_service: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub bus: u32,
    pub rating_mva: f64,
    /// Scheduled active power, MW.
    pub p_set: f64,
    /// (min, max) reactive output, MVAr.
    pub q_limits: [f64; 2],
    /// Inertia constant on the system base, seconds.
    #[serde(default)]
    pub h: f64,
    /// Transient reactance on the system base, per-unit.
    #[serde(default)]
    pub xd_prime: f64,
    /// Damping, per-unit torque per per-unit speed.
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub is_solar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: u32,
    /// MW
    pub p: f64,
    /// MVAr
    pub q: f64,
}

/// Dynamic data overlay (`machines118.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineDynamics {
    pub bus: u32,
    #[serde(default)]
    pub rating_mva: Option<f64>,
    pub h: f64,
    pub xd_prime: f64,
    pub d: f64,
}

#[derive(Debug, Deserialize)]
struct MachineFile {
    machines: Vec<MachineDynamics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    #[serde(default)]
    name: String,
    base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    machines_file: Option<String>,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    #[serde(default)]
    machines: Vec<Machine>,
    #[serde(default)]
    loads: Vec<Load>,
}

/// Validated, immutable network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub machines: Vec<Machine>,
    pub loads: Vec<Load>,
    index: HashMap<u32, usize>,
    slack: usize,
}

impl NetworkModel {
    /// Validates the data and resolves zero-injection flags. Buses whose
    /// `is_zero_injection` is unset are flagged when nothing is attached.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        mut buses: Vec<Bus>,
        branches: Vec<Branch>,
        machines: Vec<Machine>,
        loads: Vec<Load>,
    ) -> Result<Self> {
        if !(base_mva > 0.0) {
            return Err(Error::Validation(format!("base_mva must be positive, got {base_mva}")));
        }
        if buses.is_empty() {
            return Err(Error::Validation("network has no buses".into()));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus {}", b.id)));
            }
            if !(b.base_kv > 0.0) {
                return Err(Error::Validation(format!("bus {}: base_kv must be positive", b.id)));
            }
            if b.kind != BusKind::Pq {
                if let Some(v) = b.voltage_setpoint {
                    if !(v > 0.0) {
                        return Err(Error::Validation(format!(
                            "bus {}: voltage_setpoint must be positive",
                            b.id
                        )));
                    }
                }
            }
        }
        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack)
            .map(|(i, _)| i)
            .collect();
        let slack = match slacks.as_slice() {
            [s] => *s,
            [] => return Err(Error::Validation("no slack bus".into())),
            _ => {
                return Err(Error::Validation(format!(
                    "{} slack buses (buses {:?}); exactly one is required",
                    slacks.len(),
                    slacks.iter().map(|&i| buses[i].id).collect::<Vec<_>>()
                )))
            }
        };
        let lookup = |id: u32, what: &str| -> Result<usize> {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{what} references unknown bus {id}")))
        };
        for (k, br) in branches.iter().enumerate() {
            let what = format!("branch {k} ({}-{})", br.from_bus, br.to_bus);
            lookup(br.from_bus, &what)?;
            lookup(br.to_bus, &what)?;
            if br.from_bus == br.to_bus {
                return Err(Error::Validation(format!("{what}: from_bus equals to_bus")));
            }
            if br.x == 0.0 {
                return Err(Error::Validation(format!("{what}: zero reactance")));
            }
            if !(br.tap > 0.0) {
                return Err(Error::Validation(format!("{what}: tap must be positive")));
            }
        }
        let mut attached = vec![false; buses.len()];
        for (k, m) in machines.iter().enumerate() {
            let i = lookup(m.bus, &format!("machine {k}"))?;
            attached[i] = true;
            if !m.is_solar && !(m.h > 0.0 && m.xd_prime > 0.0) {
                return Err(Error::Validation(format!(
                    "machine {k} on bus {}: conventional machines need h > 0 and xd_prime > 0",
                    m.bus
                )));
            }
        }
        for (k, l) in loads.iter().enumerate() {
            let i = lookup(l.bus, &format!("load {k}"))?;
            if l.p != 0.0 || l.q != 0.0 {
                attached[i] = true;
            }
        }
        for (i, b) in buses.iter_mut().enumerate() {
            match b.is_zero_injection {
                None => b.is_zero_injection = Some(!attached[i]),
                Some(true) if attached[i] => {
                    return Err(Error::Validation(format!(
                        "bus {} is flagged zero-injection but has load or generation attached",
                        b.id
                    )))
                }
                Some(_) => {}
            }
        }
        let model = NetworkModel {
            name: name.into(),
            base_mva,
            buses,
            branches,
            machines,
            loads,
            index,
            slack,
        };
        let islands = model.unreached_buses(&BTreeSet::new());
        if !islands.is_empty() {
            return Err(Error::Validation(format!(
                "in-service branches leave buses {:?} disconnected from slack bus {}",
                islands.iter().map(|&i| model.buses[i].id).collect::<Vec<_>>(),
                model.buses[slack].id
            )));
        }
        Ok(model)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in `buses`.
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> usize {
        self.slack
    }

    pub fn slack_bus(&self) -> &Bus {
        &self.buses[self.slack]
    }

    /// Bus indices not connected to the slack once `removed` branches are
    /// taken out of service.
    pub fn unreached_buses(&self, removed: &BTreeSet<usize>) -> Vec<usize> {
        let adj = self.adjacency_excluding(removed);
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([self.slack]);
        seen[self.slack] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_connected_without(&self, removed: &BTreeSet<usize>) -> bool {
        self.unreached_buses(removed).is_empty()
    }

    fn adjacency_excluding(&self, removed: &BTreeSet<usize>) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (k, br) in self.branches.iter().enumerate() {
            if !br.in_service || removed.contains(&k) {
                continue;
            }
            let (i, j) = (self.index[&br.from_bus], self.index[&br.to_bus]);
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Sorted, deduplicated neighbor lists over in-service branches.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = self.adjacency_excluding(&BTreeSet::new());
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Total base-case load, MW.
    pub fn total_load_mw(&self) -> f64 {
        self.loads.iter().map(|l| l.p).sum()
    }

    pub fn conventional_machines(&self) -> impl Iterator<Item = (usize, &Machine)> {
        self.machines.iter().enumerate().filter(|(_, m)| !m.is_solar)
    }

    /// Returns a copy with machine flags replaced; used by solar replacement.
    pub fn with_machines(&self, machines: Vec<Machine>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.base_mva,
            self.buses.clone(),
            self.branches.clone(),
            machines,
            self.loads.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            name: self.name.clone(),
            base_mva: self.base_mva,
            machines_file: None,
            buses: self.buses.clone(),
            branches: self.branches.clone(),
            machines: self.machines.clone(),
            loads: self.loads.clone(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Parses a network document. `machines_file` references are resolved
    /// against `base_dir`.
    pub fn from_json(text: &str, location: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::parse(location, e))?;
        let mut machines = file.machines;
        if let Some(rel) = &file.machines_file {
            let path = match base_dir {
                Some(dir) => dir.join(rel),
                None => rel.into(),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let overlay: MachineFile = serde_json::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            apply_machine_dynamics(&mut machines, &overlay.machines)?;
        }
        NetworkModel::new(file.name, file.base_mva, file.buses, file.branches, machines, file.loads)
    }
}

fn apply_machine_dynamics(machines: &mut [Machine], overlay: &[MachineDynamics]) -> Result<()> {
    for dynamics in overlay {
        let target = machines
            .iter_mut()
            .find(|m| m.bus == dynamics.bus)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "machine data references bus {} which has no machine",
                    dynamics.bus
                ))
            })?;
        target.h = dynamics.h;
        target.xd_prime = dynamics.xd_prime;
        target.d = dynamics.d;
        if let Some(r) = dynamics.rating_mva {
            target.rating_mva = r;
        }
    }
    Ok(())
}

/// Reads and validates a network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkModel::from_json(&text, &path.display().to_string(), path.parent())
}

/// Directory holding the bundled data files (IEEE-118, SMIB, load sample).
pub fn bundled_data_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn bundled(name: &str) -> Result<NetworkModel> {
    load_network(bundled_data_dir().join(name))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn bus(id: u32, kind: BusKind) -> Bus {
        Bus {
            id,
            kind,
            base_kv: 138.0,
            voltage_setpoint: if kind == BusKind::Pq { None } else { Some(1.0) },
            is_zero_injection: None,
            shunt_g: 0.0,
            shunt_b: 0.0,
        }
    }

    pub fn line(from: u32, to: u32, r: f64, x: f64) -> Branch {
        Branch {
            from_bus: from,
            to_bus: to,
            r,
            x,
            b_shunt: 0.0,
            tap: 1.0,
            in_service: true,
        }
    }

    /// Slack at bus 1 feeding a PQ load at bus 2 through one branch.
    pub fn two_bus(x: f64, load_mw: f64) -> NetworkModel {
        NetworkModel::new(
            "two-bus",
            100.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
            vec![line(1, 2, 0.0, x)],
            vec![],
            vec![Load {
                bus: 2,
                p: load_mw,
                q: 0.0,
            }],
        )
        .unwrap()
    }

    /// Four buses in a ring, slack at bus 1.
    pub fn ring4() -> NetworkModel {
        NetworkModel::new(
            "ring4",
            100.0,
            vec![
                bus(1, BusKind::Slack),
                bus(2, BusKind::Pq),
                bus(3, BusKind::Pq),
                bus(4, BusKind::Pq),
            ],
            vec![
                line(1, 2, 0.01, 0.1),
                line(2, 3, 0.01, 0.1),
                line(3, 4, 0.01, 0.1),
                line(4, 1, 0.01, 0.1),
            ],
            vec![],
            vec![
                Load { bus: 2, p: 20.0, q: 5.0 },
                Load { bus: 3, p: 30.0, q: 5.0 },
                Load { bus: 4, p: 10.0, q: 2.0 },
            ],
        )
        .unwrap()
    }
}
