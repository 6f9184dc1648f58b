use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkModel;
use crate::seed;

/// Simultaneous three-phase faults on `faulted_lines`, all cleared at
/// `t_clear` by tripping every faulted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub id: usize,
    /// Branch indices into `NetworkModel::branches`.
    pub faulted_lines: Vec<usize>,
    pub fault_fraction: f64,
    pub t_fault: f64,
    pub t_clear: f64,
}

impl Contingency {
    /// A "contingency" that never disturbs the system.
    pub fn none() -> Self {
        Contingency {
            id: 0,
            faulted_lines: Vec::new(),
            fault_fraction: 0.1,
            t_fault: 5.0,
            t_clear: 5.0 + 5.0 / 60.0,
        }
    }

    pub fn order(&self) -> usize {
        self.faulted_lines.len()
    }
}

pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ContingencyOptions {
    pub fault_fraction: f64,
    pub t_fault: f64,
    /// Seconds between inception and clearing (5 cycles at 60 Hz).
    pub clearing_delay: f64,
}

impl Default for ContingencyOptions {
    fn default() -> Self {
        ContingencyOptions {
            fault_fraction: 0.10,
            t_fault: 5.0,
            clearing_delay: 5.0 / 60.0,
        }
    }
}

/// Branches whose loss alone keeps every bus connected to the slack.
pub fn non_islanding_lines(model: &NetworkModel) -> Vec<usize> {
    (0..model.branches.len())
        .filter(|&k| model.branches[k].in_service)
        .filter(|&k| model.is_connected_without(&BTreeSet::from([k])))
        .collect()
}

/// Draws `n_c` contingencies: `ceil(n_c / 2)` single-line outages and the
/// rest spread evenly over orders 2..=k_max (lower orders take the
/// remainder). Multi-line sets that island any bus are rejected.
pub fn generate_contingencies(
    model: &NetworkModel,
    n_c: usize,
    k_max: usize,
    seed: u64,
    opts: &ContingencyOptions,
) -> Result<Vec<Contingency>> {
    if n_c == 0 {
        return Err(Error::InvalidInput("n_c must be at least 1".into()));
    }
    if !(1..=MAX_ORDER).contains(&k_max) {
        return Err(Error::InvalidInput(format!("k_max must be in 1..=6, got {k_max}")));
    }
    let candidates = non_islanding_lines(model);
    let n_single = if k_max == 1 { n_c } else { n_c.div_ceil(2) };
    if n_single > candidates.len() {
        return Err(Error::Infeasible(format!(
            "{n_single} single-line contingencies requested but only {} non-islanding lines exist (maximum n_c is {})",
            candidates.len(),
            if k_max == 1 { candidates.len() } else { 2 * candidates.len() }
        )));
    }
    let mut orders = vec![1; n_single];
    let multi = n_c - n_single;
    if multi > 0 {
        let n_orders = k_max - 1;
        for (j, k) in (2..=k_max).enumerate() {
            let share = multi / n_orders + usize::from(j < multi % n_orders);
            orders.extend(std::iter::repeat_n(k, share));
        }
    }

    let mut rng = seed::derived_rng(seed, &[seed::stream::CONTINGENCIES]);
    let mut singles = candidates.clone();
    singles.shuffle(&mut rng);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::with_capacity(n_c);
    let mut next_single = 0;
    for (id, &k) in orders.iter().enumerate() {
        let lines = if k == 1 {
            let l = vec![singles[next_single]];
            next_single += 1;
            l
        } else {
            let mut found = None;
            for _ in 0..10_000 {
                let mut pick: Vec<usize> = candidates.choose_multiple(&mut rng, k).copied().collect();
                pick.sort_unstable();
                if seen.contains(&pick) {
                    continue;
                }
                if model.is_connected_without(&pick.iter().copied().collect()) {
                    found = Some(pick);
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::Infeasible(format!("no non-islanding set of {k} lines found"))
            })?
        };
        seen.insert(lines.clone());
        out.push(Contingency {
            id,
            faulted_lines: lines,
            fault_fraction: opts.fault_fraction,
            t_fault: opts.t_fault,
            t_clear: opts.t_fault + opts.clearing_delay,
        });
    }
    Ok(out)
}
