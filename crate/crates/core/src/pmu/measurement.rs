use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::SimulationTrace;
use crate::error::{Error, Result};
use crate::scenario::Contingency;
use crate::seed;

/// Samples per measurement window.
pub const WINDOW_SAMPLES: usize = 30;

/// Voltage phasors reported by the PMUs over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    pub pmu_buses: Vec<u32>,
    /// `[bus][sample]`, per-unit.
    pub v_mag: Vec<Vec<f64>>,
    /// `[bus][sample]`, degrees.
    pub v_ang: Vec<Vec<f64>>,
    pub t_start: f64,
    pub is_noisy: bool,
    /// Magnitudes clamped at zero during error injection.
    #[serde(default)]
    pub clamped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelErrorMode {
    /// One draw per channel, held across the window.
    PerChannelBias,
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModelConfig {
    /// Degrees.
    pub pmu_angle_sigma: f64,
    pub pmu_mag_sigma_rel: f64,
    /// Degrees; the channel angle error is uniform on `±halfwidth`.
    pub channel_angle_halfwidth: f64,
    /// Standard deviation of the uniform channel magnitude error, relative.
    pub channel_mag_sigma_rel: f64,
    pub channel_error_mode: ChannelErrorMode,
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        ErrorModelConfig {
            pmu_angle_sigma: 0.104,
            pmu_mag_sigma_rel: 0.0015,
            channel_angle_halfwidth: 0.0,
            channel_mag_sigma_rel: 0.0020,
            channel_error_mode: ChannelErrorMode::PerChannelBias,
        }
    }
}

impl ErrorModelConfig {
    pub fn with_halfwidth(hw: f64) -> Self {
        ErrorModelConfig {
            channel_angle_halfwidth: hw,
            ..Default::default()
        }
    }

    /// Every error term switched off.
    pub fn noiseless() -> Self {
        ErrorModelConfig {
            pmu_angle_sigma: 0.0,
            pmu_mag_sigma_rel: 0.0,
            channel_angle_halfwidth: 0.0,
            channel_mag_sigma_rel: 0.0,
            channel_error_mode: ChannelErrorMode::PerChannelBias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.pmu_angle_sigma,
            self.pmu_mag_sigma_rel,
            self.channel_angle_halfwidth,
            self.channel_mag_sigma_rel,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("error model parameters must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Copies the 30 samples starting nearest `t_start` at the PMU buses.
pub fn synthesize_window(trace: &SimulationTrace, pmu_buses: &[u32], t_start: f64) -> Result<MeasurementWindow> {
    if pmu_buses.is_empty() {
        return Err(Error::InvalidInput("no PMU buses".into()));
    }
    let first = (t_start * trace.sample_rate).round();
    if first < 0.0 || first as usize + WINDOW_SAMPLES > trace.len() {
        return Err(Error::InvalidInput(format!(
            "window at t = {t_start} s needs {WINDOW_SAMPLES} samples but the trace ends at {:.4} s",
            trace.times.last().copied().unwrap_or(0.0)
        )));
    }
    let first = first as usize;
    let cols: Vec<usize> = pmu_buses
        .iter()
        .map(|b| {
            trace
                .bus_ids
                .iter()
                .position(|x| x == b)
                .ok_or_else(|| Error::InvalidInput(format!("PMU bus {b} not in trace")))
        })
        .collect::<Result<_>>()?;
    let take = |data: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        cols.iter()
            .map(|&c| (first..first + WINDOW_SAMPLES).map(|s| data[s][c]).collect())
            .collect()
    };
    Ok(MeasurementWindow {
        pmu_buses: pmu_buses.to_vec(),
        v_mag: take(&trace.v_mag),
        v_ang: take(&trace.v_ang),
        t_start: trace.times[first],
        is_noisy: false,
        clamped: 0,
    })
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Adds PMU (Gaussian, per sample) and instrumentation-channel (uniform)
/// errors to a clean window. Terms with zero spread are skipped, so a fully
/// noiseless configuration returns the input unchanged.
pub fn inject_errors(window: &MeasurementWindow, cfg: &ErrorModelConfig, seed: u64) -> Result<MeasurementWindow> {
    if window.is_noisy {
        return Err(Error::InvalidInput("window already carries errors".into()));
    }
    cfg.validate()?;
    let mut rng = seed::derived_rng(seed, &[seed::stream::MEASUREMENT_ERROR]);
    let mut out = window.clone();
    out.is_noisy = true;
    let sqrt3 = 3f64.sqrt();
    let per_channel = cfg.channel_error_mode == ChannelErrorMode::PerChannelBias;
    for b in 0..window.pmu_buses.len() {
        let bias_ang: f64 = rng.random_range(-1.0..=1.0);
        let bias_mag: f64 = rng.random_range(-1.0..=1.0);
        for s in 0..window.v_mag[b].len() {
            let (u_ang, u_mag) = if per_channel {
                (bias_ang, bias_mag)
            } else {
                (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
            };
            let (g_ang, g_mag) = (gauss(&mut rng), gauss(&mut rng));
            let v_true = window.v_mag[b][s];
            let ang = &mut out.v_ang[b][s];
            if cfg.channel_angle_halfwidth > 0.0 {
                *ang += u_ang * cfg.channel_angle_halfwidth;
            }
            if cfg.pmu_angle_sigma > 0.0 {
                *ang += g_ang * cfg.pmu_angle_sigma;
            }
            let mag = &mut out.v_mag[b][s];
            if cfg.channel_mag_sigma_rel > 0.0 {
                *mag += u_mag * sqrt3 * cfg.channel_mag_sigma_rel * v_true;
            }
            if cfg.pmu_mag_sigma_rel > 0.0 {
                *mag += g_mag * cfg.pmu_mag_sigma_rel * v_true;
            }
            if *mag < 0.0 {
                *mag = 0.0;
                out.clamped += 1;
            }
        }
    }
    if out.clamped > 0 {
        log::warn!("{} negative magnitudes clamped to zero", out.clamped);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSchema {
    /// Per PMU bus: mean magnitude, mean angle; then a one-hot contingency
    /// code of length `n_contingencies`.
    #[default]
    PrefaultMeanPlusContingency,
    /// Per PMU bus: the 30 magnitudes then the 30 angles.
    PostfaultFull,
}

impl FeatureSchema {
    pub fn len(self, n_pmu: usize, n_contingencies: usize) -> usize {
        match self {
            FeatureSchema::PrefaultMeanPlusContingency => 2 * n_pmu + n_contingencies,
            FeatureSchema::PostfaultFull => 2 * n_pmu * WINDOW_SAMPLES,
        }
    }

    pub fn names(self, pmu_buses: &[u32], n_contingencies: usize) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            FeatureSchema::PrefaultMeanPlusContingency => {
                for b in pmu_buses {
                    out.push(format!("vmag_{b}"));
                    out.push(format!("vang_{b}"));
                }
                out.extend((0..n_contingencies).map(|k| format!("cont_{k}")));
            }
            FeatureSchema::PostfaultFull => {
                for b in pmu_buses {
                    out.extend((0..WINDOW_SAMPLES).map(|s| format!("vmag_{b}_{s}")));
                    out.extend((0..WINDOW_SAMPLES).map(|s| format!("vang_{b}_{s}")));
                }
            }
        }
        out
    }

    /// Start of the window this schema reads for a contingency.
    pub fn window_start(self, cont: &Contingency, sample_rate: f64) -> f64 {
        match self {
            FeatureSchema::PrefaultMeanPlusContingency => {
                (cont.t_fault - 1.0).max(0.0)
            }
            FeatureSchema::PostfaultFull => (cont.t_clear * sample_rate).ceil() / sample_rate,
        }
    }
}

/// Feature vector of one case.
pub fn build_features(
    window: &MeasurementWindow,
    cont: &Contingency,
    n_contingencies: usize,
    schema: FeatureSchema,
) -> Result<Vec<f64>> {
    let end = window.t_start + (WINDOW_SAMPLES - 1) as f64 / 30.0;
    match schema {
        FeatureSchema::PrefaultMeanPlusContingency => {
            if cont.id >= n_contingencies {
                return Err(Error::InvalidInput(format!(
                    "contingency {} outside 0..{n_contingencies}",
                    cont.id
                )));
            }
            if end >= cont.t_fault && !cont.faulted_lines.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "pre-fault schema needs a window ending before {} s, got one ending at {end:.4} s",
                    cont.t_fault
                )));
            }
            let mut f = Vec::with_capacity(2 * window.pmu_buses.len() + n_contingencies);
            for b in 0..window.pmu_buses.len() {
                f.push(mean(&window.v_mag[b]));
                f.push(mean(&window.v_ang[b]));
            }
            let mut onehot = vec![0.0; n_contingencies];
            onehot[cont.id] = 1.0;
            f.extend(onehot);
            Ok(f)
        }
        FeatureSchema::PostfaultFull => {
            if window.t_start < cont.t_fault {
                return Err(Error::InvalidInput(format!(
                    "post-fault schema needs a window starting after {} s, got {:.4} s",
                    cont.t_fault, window.t_start
                )));
            }
            let mut f = Vec::with_capacity(2 * window.pmu_buses.len() * WINDOW_SAMPLES);
            for b in 0..window.pmu_buses.len() {
                f.extend_from_slice(&window.v_mag[b]);
                f.extend_from_slice(&window.v_ang[b]);
            }
            Ok(f)
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_window() -> MeasurementWindow {
        MeasurementWindow {
            pmu_buses: vec![7],
            v_mag: vec![vec![1.0; 30]],
            v_ang: vec![vec![10.0; 30]],
            t_start: 4.0,
            is_noisy: false,
            clamped: 0,
        }
    }

    #[test]
    fn constant_window_features() {
        let c = Contingency { id: 1, ..Contingency::none() };
        let f = build_features(&constant_window(), &c, 3, FeatureSchema::default()).unwrap();
        assert_eq!(f, vec![1.0, 10.0, 0.0, 1.0, 0.0]);
        assert_eq!(FeatureSchema::default().len(29, 50), 108);
    }

    #[test]
    fn schema_window_mismatch() {
        let c = Contingency::none();
        let w = constant_window();
        assert!(build_features(&w, &Contingency { faulted_lines: vec![0], ..c.clone() }, 3, FeatureSchema::PostfaultFull).is_err());
        let late = MeasurementWindow { t_start: 5.2, ..w };
        assert!(build_features(&late, &Contingency { faulted_lines: vec![0], ..c }, 3, FeatureSchema::default()).is_err());
    }

    #[test]
    fn noiseless_injection_is_identity() {
        let mut w = constant_window();
        w.v_ang[0][3] = -0.0;
        let out = inject_errors(&w, &ErrorModelConfig::noiseless(), 5).unwrap();
        assert!(out.is_noisy);
        for s in 0..30 {
            assert_eq!(out.v_mag[0][s].to_bits(), w.v_mag[0][s].to_bits());
            assert_eq!(out.v_ang[0][s].to_bits(), w.v_ang[0][s].to_bits());
        }
        assert!(inject_errors(&out, &ErrorModelConfig::default(), 5).is_err());
    }

    #[test]
    fn per_channel_bias_is_constant_over_window() {
        let cfg = ErrorModelConfig {
            channel_angle_halfwidth: 2.0,
            pmu_angle_sigma: 0.0,
            ..ErrorModelConfig::noiseless()
        };
        let out = inject_errors(&constant_window(), &cfg, 9).unwrap();
        let d0 = out.v_ang[0][0] - 10.0;
        assert!(d0.abs() <= 2.0 && d0 != 0.0);
        assert!(out.v_ang[0].iter().all(|a| (a - 10.0 - d0).abs() < 1e-12));
    }
}
