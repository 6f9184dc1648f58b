//! Fully connected network with SELU hidden layers and a sigmoid output.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scaling::Standardizer;
use crate::seed;

pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

pub fn selu(z: f64) -> f64 {
    if z > 0.0 {
        SELU_LAMBDA * z
    } else {
        SELU_LAMBDA * SELU_ALPHA * z.exp_m1()
    }
}

pub fn selu_grad(z: f64) -> f64 {
    if z > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * z.exp()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) - y z`, the cross-entropy of a logit.
fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_layers: usize,
    pub width: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layers: 5,
            width: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            patience: 20,
            max_epochs: 500,
        }
    }
}

/// Network on already standardized inputs. The last layer has one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

impl MlpNet {
    /// LeCun-normal weights (std `1/sqrt(fan_in)`), zero biases.
    pub fn new<R: Rng>(n_in: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut w = Vec::new();
        let mut b = Vec::new();
        for win in sizes.windows(2) {
            let std = 1.0 / (win[0].max(1) as f64).sqrt();
            let m = DMatrix::from_row_iterator(
                win[1],
                win[0],
                (0..win[0] * win[1]).map(|_| std * rng.sample::<f64, _>(StandardNormal)),
            );
            w.push(m);
            b.push(DVector::zeros(win[1]));
        }
        MlpNet { w, b }
    }

    pub fn n_inputs(&self) -> usize {
        self.w[0].ncols()
    }

    pub fn n_params(&self) -> usize {
        self.w.iter().map(|m| m.len()).sum::<usize>() + self.b.iter().map(|v| v.len()).sum::<usize>()
    }

    /// Layer weights (row-major) then bias, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.w.iter().zip(&self.b) {
            for i in 0..w.nrows() {
                out.extend(w.row(i).iter());
            }
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for (w, b) in self.w.iter_mut().zip(self.b.iter_mut()) {
            let (r, c) = w.shape();
            for i in 0..r {
                for j in 0..c {
                    w[(i, j)] = p[k];
                    k += 1;
                }
            }
            for v in b.iter_mut() {
                *v = p[k];
                k += 1;
            }
        }
    }

    /// Pre-activations per layer for a column batch.
    fn forward(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut zs = Vec::with_capacity(self.w.len());
        let mut a = x.clone();
        for (l, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let mut z = w * &a;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l + 1 < self.w.len() {
                a = z.map(selu);
            }
            zs.push(z);
        }
        zs
    }

    pub fn logit(&self, z: &[f64]) -> f64 {
        let x = DMatrix::from_column_slice(z.len(), 1, z);
        self.forward(&x).last().unwrap()[(0, 0)]
    }

    fn columns(rows: &[&[f64]]) -> DMatrix<f64> {
        let d = rows.first().map_or(0, |r| r.len());
        DMatrix::from_fn(d, rows.len(), |k, i| rows[i][k])
    }

    /// Mean cross-entropy and its gradient (in `params()` order).
    pub fn loss_and_gradient(&self, rows: &[&[f64]], labels: &[f64]) -> (f64, Vec<f64>) {
        let x = Self::columns(rows);
        let n = rows.len() as f64;
        let zs = self.forward(&x);
        let out = zs.last().unwrap();
        let mut loss = 0.0;
        let mut delta = DMatrix::zeros(1, rows.len());
        for i in 0..rows.len() {
            let z = out[(0, i)];
            loss += bce_logit(z, labels[i]);
            delta[(0, i)] = (sigmoid(z) - labels[i]) / n;
        }
        let nl = self.w.len();
        let mut gw = vec![DMatrix::zeros(0, 0); nl];
        let mut gb = vec![DVector::zeros(0); nl];
        for l in (0..nl).rev() {
            let a_prev = if l == 0 { x.clone() } else { zs[l - 1].map(selu) };
            gw[l] = &delta * a_prev.transpose();
            gb[l] = delta.column_sum();
            if l > 0 {
                let back = self.w[l].transpose() * &delta;
                delta = back.zip_map(&zs[l - 1], |g, z| g * selu_grad(z));
            }
        }
        let mut grad = Vec::with_capacity(self.n_params());
        for (w, b) in gw.iter().zip(&gb) {
            for i in 0..w.nrows() {
                grad.extend(w.row(i).iter());
            }
            grad.extend(b.iter());
        }
        (loss / n, grad)
    }

    fn to_layers(&self) -> Vec<DenseLayer> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(w, b)| DenseLayer {
                n_in: w.ncols(),
                n_out: w.nrows(),
                weights: (0..w.nrows()).flat_map(|i| w.row(i).iter().copied().collect::<Vec<_>>()).collect(),
                bias: b.iter().copied().collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub standardizer: Standardizer,
    pub layers: Vec<DenseLayer>,
    pub epochs_trained: usize,
    pub best_epoch: usize,
    pub best_validation_accuracy: f64,
}

impl MlpModel {
    /// Probability of the secure class.
    pub fn score(&self, row: &[f64]) -> f64 {
        let mut a = self.standardizer.apply(row);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.clone();
            for (o, v) in next.iter_mut().enumerate() {
                let w = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                *v += w.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>();
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = selu(*v));
            }
            a = next;
        }
        sigmoid(a[0])
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.score(row) > 0.5)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, p: &mut [f64], g: &[f64], h: &MlpParams) {
        self.t += 1;
        let c1 = 1.0 - h.beta1.powi(self.t);
        let c2 = 1.0 - h.beta2.powi(self.t);
        for k in 0..p.len() {
            self.m[k] = h.beta1 * self.m[k] + (1.0 - h.beta1) * g[k];
            self.v[k] = h.beta2 * self.v[k] + (1.0 - h.beta2) * g[k] * g[k];
            p[k] -= h.learning_rate * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + h.epsilon);
        }
    }
}

fn accuracy(net: &MlpNet, rows: &[Vec<f64>], labels: &[u8]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let zs = net.forward(&MlpNet::columns(&refs));
    let out = zs.last().unwrap();
    let hits = (0..rows.len()).filter(|&i| u8::from(out[(0, i)] > 0.0) == labels[i]).count();
    hits as f64 / rows.len() as f64
}

/// Mini-batch Adam on cross-entropy with early stopping on validation
/// accuracy. The best epoch's weights are kept. With an empty validation set
/// the training accuracy drives early stopping.
pub fn train_mlp(
    x: &[Vec<f64>],
    y: &[u8],
    vx: &[Vec<f64>],
    vy: &[u8],
    h: &MlpParams,
    seed_value: u64,
) -> MlpModel {
    let st = Standardizer::fit(x);
    let z = st.apply_all(x);
    let (vz, vy) = if vx.is_empty() {
        (z.clone(), y.to_vec())
    } else {
        (st.apply_all(vx), vy.to_vec())
    };
    let mut init_rng = seed::derived_rng(seed_value, &[seed::stream::TRAINING, 3]);
    let mut shuffle_rng = seed::derived_rng(seed_value, &[seed::stream::TRAINING, 4]);
    let hidden = vec![h.width; h.hidden_layers];
    let mut net = MlpNet::new(st.dim(), &hidden, &mut init_rng);
    let mut params = net.params();
    let mut adam = Adam {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let labels: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut epochs = 0;
    for epoch in 1..=h.max_epochs {
        epochs = epoch;
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(h.batch_size.max(1)) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| z[i].as_slice()).collect();
            let lab: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, g) = net.loss_and_gradient(&rows, &lab);
            adam.step(&mut params, &g, h);
            net.set_params(&params);
        }
        let acc = accuracy(&net, &vz, &vy);
        if acc > best.0 {
            best = (acc, epoch, params.clone());
        } else if epoch - best.1 >= h.patience {
            break;
        }
    }
    net.set_params(&best.2);
    MlpModel {
        standardizer: st,
        layers: net.to_layers(),
        epochs_trained: epochs,
        best_epoch: best.1,
        best_validation_accuracy: best.0,
    }
}
