use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkModel;
use crate::seed;

/// Achieved penetration must land within this many fraction points.
pub const PENETRATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarConfig {
    pub penetration_target: f64,
    pub achieved_penetration: f64,
    /// Machine indices flipped to solar, in selection order.
    pub replaced_machines: Vec<usize>,
}

/// Share of total scheduled generation carried by solar machines.
pub fn solar_penetration(model: &NetworkModel) -> f64 {
    let total: f64 = model.machines.iter().map(|m| m.p_set.max(0.0)).sum();
    let solar: f64 = model
        .machines
        .iter()
        .filter(|m| m.is_solar)
        .map(|m| m.p_set.max(0.0))
        .fold(0.0, |a, b| a + b);
    if total > 0.0 {
        solar / total
    } else {
        0.0
    }
}

/// Replaces conventional machines by solar PV until the solar share of
/// scheduled generation is within two points of `target`.
///
/// Candidates are the non-slack machines with positive output, visited in a
/// seeded random order; a candidate that would overshoot the band is passed
/// over. A positive target always replaces at least one unit. Active
/// injections are untouched, so total dispatch is preserved.
pub fn apply_solar(model: &NetworkModel, target: f64, seed: u64) -> Result<(NetworkModel, SolarConfig)> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::InvalidInput(format!("solar target must be in (0, 0.5), got {target}")));
    }
    let slack_id = model.slack_bus().id;
    let total: f64 = model.machines.iter().map(|m| m.p_set.max(0.0)).sum();
    let mut order: Vec<usize> = model
        .machines
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_solar && m.bus != slack_id && m.p_set > 0.0)
        .map(|(k, _)| k)
        .collect();
    let mut rng = seed::derived_rng(seed, &[seed::stream::SOLAR]);
    order.shuffle(&mut rng);

    let mut machines = model.machines.clone();
    let mut share = solar_penetration(model);
    let mut replaced = Vec::new();
    for k in order {
        if (share - target).abs() <= PENETRATION_TOLERANCE && !replaced.is_empty() {
            break;
        }
        let add = machines[k].p_set / total;
        if share + add > target + PENETRATION_TOLERANCE {
            continue;
        }
        machines[k].is_solar = true;
        share += add;
        replaced.push(k);
    }
    if (share - target).abs() > PENETRATION_TOLERANCE || replaced.is_empty() {
        return Err(Error::Infeasible(format!(
            "solar target {target} unreachable without the slack machine (best {share:.4})"
        )));
    }
    let out = model.with_machines(machines)?;
    let achieved = solar_penetration(&out);
    Ok((
        out,
        SolarConfig {
            penetration_target: target,
            achieved_penetration: achieved,
            replaced_machines: replaced,
        },
    ))
}
