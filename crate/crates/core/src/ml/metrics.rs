use serde::{Deserialize, Serialize};

use super::dataset::INSECURE;
use crate::error::{Error, Result};

/// Confusion counts with insecure as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == INSECURE, p == INSECURE) {
                (true, true) => c.true_positive += 1,
                (false, true) => c.false_positive += 1,
                (true, false) => c.false_negative += 1,
                (false, false) => c.true_negative += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::InvalidInput("cannot score an empty set".into()));
        }
        let confusion = Confusion::from_predictions(truth, predicted);
        let correct = confusion.true_positive + confusion.true_negative;
        Ok(Metrics {
            accuracy: correct as f64 / truth.len() as f64,
            confusion,
        })
    }
}

/// Mean with a normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub std: f64,
    pub half_width: f64,
    pub n_runs: usize,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// `mean ± 1.96 s / sqrt(n)` with the sample standard deviation.
pub fn aggregate_runs(values: &[f64]) -> Result<ConfidenceInterval> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "a confidence interval needs at least 2 runs, got {n}"
        )));
    }
    // Shifted by the first run so identical runs give exactly zero spread.
    let v0 = values[0];
    let mean = v0 + values.iter().map(|v| v - v0).sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    Ok(ConfidenceInterval {
        mean,
        std,
        half_width: 1.96 * std / (n as f64).sqrt(),
        n_runs: n,
        level: 0.95,
    })
}
