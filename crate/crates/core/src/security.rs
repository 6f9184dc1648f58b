//! Transient stability index, short-term voltage criterion and the binary
//! security label.

use serde::{Deserialize, Serialize};

use crate::dynamics::SimulationTrace;
use crate::error::{Error, Result};

pub const DEFAULT_TSI_THRESHOLD: f64 = 10.0;
pub const VOLTAGE_LOW: f64 = 0.8;
pub const VOLTAGE_HIGH: f64 = 1.1;
/// Longest tolerated continuous excursion, seconds.
pub const VOLTAGE_MAX_DURATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageViolation {
    pub bus: u32,
    pub start: f64,
    pub duration: f64,
    /// Sample furthest from the allowed band.
    pub extreme: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityLabel {
    pub secure: bool,
    pub tsi_percent: f64,
    pub delta_max: f64,
    pub voltage_violations: Vec<VoltageViolation>,
}

/// TSI in percent from the maximum angle separation in degrees.
pub fn tsi_from_delta(delta_max: f64) -> f64 {
    (360.0 - delta_max) / (360.0 + delta_max) * 100.0
}

/// Largest pairwise rotor-angle separation over all samples, degrees.
pub fn max_angle_separation(trace: &SimulationTrace) -> Result<f64> {
    if trace.is_empty() || trace.machine_buses.is_empty() {
        return Err(Error::InvalidInput("empty trace".into()));
    }
    let mut best: f64 = 0.0;
    for row in &trace.rotor_angle {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        best = best.max(hi - lo);
    }
    Ok(best)
}

/// Returns `(tsi_percent, delta_max)`.
pub fn compute_tsi(trace: &SimulationTrace) -> Result<(f64, f64)> {
    let d = max_angle_separation(trace)?;
    Ok((tsi_from_delta(d), d))
}

/// Continuous excursions outside `[0.8, 1.1]` pu lasting more than 0.5 s,
/// considering only samples at or after the fault.
///
/// A run still open at the last sample of an early-terminated trace ends at
/// `t_last`.
pub fn check_voltage_security(trace: &SimulationTrace) -> Vec<VoltageViolation> {
    let first = trace
        .times
        .iter()
        .position(|&t| t >= trace.t_fault - 1e-9)
        .unwrap_or(trace.len());
    let mut out = Vec::new();
    for (b, &bus) in trace.bus_ids.iter().enumerate() {
        let mut run: Option<(usize, f64)> = None;
        let close = |start: usize, end_time: f64, extreme: f64, out: &mut Vec<VoltageViolation>| {
            let t0 = trace.times[start];
            let duration = end_time - t0;
            if duration > VOLTAGE_MAX_DURATION + 1e-9 {
                out.push(VoltageViolation {
                    bus,
                    start: t0,
                    duration,
                    extreme,
                });
            }
        };
        for s in first..trace.len() {
            let v = trace.v_mag[s][b];
            let outside = !(VOLTAGE_LOW..=VOLTAGE_HIGH).contains(&v);
            match (&mut run, outside) {
                (None, true) => run = Some((s, v)),
                (Some((_, ext)), true) => {
                    if band_distance(v) > band_distance(*ext) {
                        *ext = v;
                    }
                }
                (Some((start, ext)), false) => {
                    close(*start, trace.times[s - 1], *ext, &mut out);
                    run = None;
                }
                (None, false) => {}
            }
        }
        if let Some((start, ext)) = run {
            let end = if trace.terminated_early {
                trace.t_last.max(trace.times[trace.len() - 1])
            } else {
                trace.times[trace.len() - 1]
            };
            close(start, end, ext, &mut out);
        }
    }
    out
}

fn band_distance(v: f64) -> f64 {
    (VOLTAGE_LOW - v).max(v - VOLTAGE_HIGH)
}

/// Secure iff TSI reaches the threshold and no voltage violation occurs.
pub fn label_case(trace: &SimulationTrace, tsi_threshold: f64) -> Result<SecurityLabel> {
    let (tsi, delta_max) = compute_tsi(trace)?;
    let violations = check_voltage_security(trace);
    Ok(SecurityLabel {
        secure: tsi >= tsi_threshold && violations.is_empty(),
        tsi_percent: tsi,
        delta_max,
        voltage_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(angles: Vec<Vec<f64>>, vmag: Vec<Vec<f64>>) -> SimulationTrace {
        let n = angles.len();
        let nb = vmag[0].len();
        SimulationTrace {
            times: (0..n).map(|i| i as f64 / 30.0).collect(),
            rotor_angle: angles.clone(),
            v_ang: vec![vec![0.0; nb]; n],
            v_mag: vmag,
            terminated_early: false,
            t_last: (n - 1) as f64 / 30.0,
            bus_ids: (1..=nb as u32).collect(),
            machine_buses: (1..=angles[0].len() as u32).collect(),
            sample_rate: 30.0,
            t_fault: 0.0,
            diagnostic: None,
        }
    }

    #[test]
    fn endpoints() {
        assert_eq!(tsi_from_delta(0.0), 100.0);
        assert_eq!(tsi_from_delta(360.0), 0.0);
    }

    #[test]
    fn flat_trace_is_secure() {
        let t = trace(vec![vec![5.0, 5.0]; 10], vec![vec![1.0; 3]; 10]);
        let l = label_case(&t, DEFAULT_TSI_THRESHOLD).unwrap();
        assert!(l.secure);
        assert_eq!(l.tsi_percent, 100.0);
    }

    #[test]
    fn short_sample_run_boundary() {
        // 16 samples = 0.5 s exactly: not a violation; 17 samples is.
        for (len, expect) in [(16usize, 0usize), (17, 1)] {
            let mut v = vec![vec![1.0]; 40];
            for row in v.iter_mut().skip(5).take(len) {
                row[0] = 0.7;
            }
            let t = trace(vec![vec![0.0]; 40], v);
            assert_eq!(check_voltage_security(&t).len(), expect, "len {len}");
        }
    }
}
