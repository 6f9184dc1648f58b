//! Soft-margin RBF support vector machine trained by sequential minimal
//! optimization with second-order working set selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::scaling::Standardizer;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub standardizer: Standardizer,
    pub gamma: f64,
    pub c: f64,
    /// Standardized support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Outcome of one SMO solve on standardized rows.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Dense RBF Gram matrix.
pub fn gram(rows: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(n, d, |i, k| rows[i][k]);
    let dot = &x * x.transpose();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let d2 = (dot[(i, i)] + dot[(j, j)] - 2.0 * dot[(i, j)]).max(0.0);
            (-gamma * d2).exp()
        }
    })
}

fn sign(label: u8) -> f64 {
    if label == 1 { 1.0 } else { -1.0 }
}

/// Solves the dual for labels in {0, 1} (mapped to -1 / +1) given the
/// kernel matrix. Stops when the maximal violating pair gap is below `tol`.
pub fn smo(k: &DMatrix<f64>, labels: &[u8], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&l| sign(l)).collect();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * g[t];
            let movable = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if movable && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let movable = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !movable {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = (k[(i, i)] + k[(t, t)] - 2.0 * k[(i, t)]).max(TAU);
                let obj = -diff * diff / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k[(i, j)];
        if y[i] != y[j] {
            let quad = (k[(i, i)] + k[(j, j)] + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[(i, i)] + k[(j, j)] - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += y[t] * (y[i] * k[(i, t)] * di + y[j] * k[(j, t)] * dj);
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution {
        alpha,
        bias: -rho,
        converged,
        iterations,
    }
}

impl SvmModel {
    /// Assembles a model from a solved dual on standardized `rows`.
    pub fn from_solution(
        standardizer: Standardizer,
        rows: &[Vec<f64>],
        labels: &[u8],
        sol: &SmoSolution,
        c: f64,
        gamma: f64,
    ) -> Self {
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(rows[t].clone());
                dual_coef.push(a * sign(labels[t]));
            }
        }
        SvmModel {
            standardizer,
            gamma,
            c,
            support_vectors,
            dual_coef,
            bias: sol.bias,
            converged: sol.converged,
            iterations: sol.iterations,
        }
    }

    /// Fits one `(C, gamma)` pair on raw rows.
    pub fn fit(x: &[Vec<f64>], labels: &[u8], c: f64, gamma: f64, tol: f64, max_iter: usize) -> (Self, SmoSolution) {
        let st = Standardizer::fit(x);
        let z = st.apply_all(x);
        let k = gram(&z, gamma);
        let sol = smo(&k, labels, c, tol, max_iter);
        (Self::from_solution(st, &z, labels, &sol, c, gamma), sol)
    }

    pub fn decision_standardized(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(sv, z, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.decision_standardized(&self.standardizer.apply(row))
    }

    /// Positive decision values are secure; zero goes to insecure.
    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}

/// Default SMO iteration cap for `n` training rows.
pub fn default_max_iter(n: usize) -> usize {
    10_000_000usize.max(100 * n)
}
