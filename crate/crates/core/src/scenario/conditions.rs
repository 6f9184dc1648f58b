use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Season, SeasonProfile};
use crate::error::{Error, Result};
use crate::network::{solve_power_flow, Dispatch, NetworkModel, PowerFlowOptions, PowerFlowSolution};
use crate::seed;

/// One load/generation combination with its solved pre-fault state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub id: usize,
    pub season: Season,
    pub hour: usize,
    pub variant: usize,
    pub load_scale: f64,
    /// MW per machine.
    pub dispatch: Vec<f64>,
    pub solved: PowerFlowSolution,
}

impl OperatingCondition {
    pub fn dispatch(&self) -> Dispatch {
        Dispatch {
            machine_p_mw: self.dispatch.clone(),
            load_scale: self.load_scale,
        }
    }

    pub fn total_load_mw(&self, model: &NetworkModel) -> f64 {
        model.total_load_mw() * self.load_scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ConditionOptions {
    /// Range of the multiplicative perturbation `u`; `None` disables it.
    pub perturbation: Option<(f64, f64)>,
    pub max_redraws: usize,
    pub power_flow: PowerFlowOptions,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            perturbation: Some((0.95, 1.05)),
            max_redraws: 5,
            power_flow: PowerFlowOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConditionSet {
    pub conditions: Vec<OperatingCondition>,
    /// Conditions dropped after exhausting redraws.
    pub skipped: usize,
}

/// Samples `count` operating conditions, `count / 24` variants per hour.
///
/// Load is scaled uniformly to `hourly_mw[h] * u`; every machine's output is
/// scaled by the same factor and the slack absorbs losses. A condition whose
/// power flow fails is redrawn with a fresh `u`, then skipped.
pub fn generate_operating_conditions(
    model: &NetworkModel,
    profile: &SeasonProfile,
    count: usize,
    seed: u64,
    opts: &ConditionOptions,
) -> Result<ConditionSet> {
    if count == 0 || !count.is_multiple_of(24) {
        return Err(Error::InvalidInput(format!(
            "operating condition count must be a positive multiple of 24, got {count}"
        )));
    }
    if profile.hourly_mw.len() != 24 || profile.hourly_mw.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("season profile needs 24 positive entries".into()));
    }
    let base_load = model.total_load_mw();
    if !(base_load > 0.0) {
        return Err(Error::InvalidInput("network has no load to scale".into()));
    }
    let variants = count / 24;
    let jobs: Vec<(usize, usize)> = (0..24)
        .flat_map(|h| (0..variants).map(move |v| (h, v)))
        .collect();
    let results: Vec<Option<OperatingCondition>> = jobs
        .par_iter()
        .map(|&(hour, variant)| {
            let mut rng = seed::derived_rng(
                seed,
                &[seed::stream::OPERATING_CONDITIONS, hour as u64, variant as u64],
            );
            for attempt in 0..=opts.max_redraws {
                let u = match opts.perturbation {
                    Some((lo, hi)) => rng.random_range(lo..=hi),
                    None => 1.0,
                };
                let load_scale = profile.hourly_mw[hour] / base_load * u;
                let dispatch = Dispatch {
                    machine_p_mw: model.machines.iter().map(|m| m.p_set * load_scale).collect(),
                    load_scale,
                };
                match solve_power_flow(model, &dispatch, &opts.power_flow) {
                    Ok(solved) => {
                        return Some(OperatingCondition {
                            id: hour * variants + variant,
                            season: profile.season,
                            hour,
                            variant,
                            load_scale,
                            dispatch: dispatch.machine_p_mw,
                            solved,
                        })
                    }
                    Err(e) => {
                        warn!("hour {hour} variant {variant} attempt {attempt}: {e}");
                        if opts.perturbation.is_none() {
                            break;
                        }
                    }
                }
            }
            warn!("hour {hour} variant {variant}: skipped after redraws");
            None
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    Ok(ConditionSet {
        conditions: results.into_iter().flatten().collect(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::ring4;

    fn flat_profile(mw: f64) -> SeasonProfile {
        SeasonProfile {
            season: Season::Summer,
            hourly_mw: (0..24).map(|h| mw * (0.8 + 0.01 * h as f64)).collect(),
            source_years: vec![2015],
        }
    }

    #[test]
    fn unperturbed_loads_follow_profile() {
        let m = ring4();
        let p = flat_profile(60.0);
        let opts = ConditionOptions {
            perturbation: None,
            ..Default::default()
        };
        let set = generate_operating_conditions(&m, &p, 24, 1, &opts).unwrap();
        assert_eq!(set.conditions.len(), 24);
        for oc in &set.conditions {
            assert!((oc.total_load_mw(&m) - p.hourly_mw[oc.hour]).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_loads_are_deterministic_and_bounded() {
        let m = ring4();
        let p = flat_profile(60.0);
        let opts = ConditionOptions::default();
        let a = generate_operating_conditions(&m, &p, 48, 9, &opts).unwrap();
        let b = generate_operating_conditions(&m, &p, 48, 9, &opts).unwrap();
        assert_eq!(a.conditions, b.conditions);
        for oc in &a.conditions {
            let u = oc.total_load_mw(&m) / p.hourly_mw[oc.hour];
            assert!((0.95..=1.05).contains(&u));
        }
        let c = generate_operating_conditions(&m, &p, 48, 10, &opts).unwrap();
        assert_ne!(a.conditions[0].load_scale, c.conditions[0].load_scale);
    }

    #[test]
    fn count_must_be_multiple_of_24() {
        let m = ring4();
        assert!(generate_operating_conditions(&m, &flat_profile(60.0), 30, 1, &Default::default()).is_err());
    }
}
