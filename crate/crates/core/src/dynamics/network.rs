//! Network reduction onto the machine internal nodes.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{build_admittance, NetworkModel, TopologyOverrides};

/// One network topology reduced to the conventional machines' internal
/// EMFs.
///
/// Machine currents are `I = Y E + c` and bus voltages `V = R E + v0`, where
/// `c` and `v0` carry the constant solar current injections.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    pub(crate) m: usize,
    pub(crate) n: usize,
    /// Row-major m x m, split into real and imaginary parts.
    pub(crate) y_re: Vec<f64>,
    pub(crate) y_im: Vec<f64>,
    pub(crate) c: Vec<Complex64>,
    /// Row-major n x m.
    pub(crate) r: Vec<Complex64>,
    pub(crate) v0: Vec<Complex64>,
}

/// Static data needed to reduce any topology of one operating condition.
#[derive(Debug, Clone)]
pub(crate) struct ReductionInputs {
    /// Constant-impedance load plus machine admittances added to the bus
    /// diagonal (per bus index).
    pub diagonal: Vec<Complex64>,
    /// Bus index of each conventional machine.
    pub machine_bus: Vec<usize>,
    /// 1 / (j xd') of each conventional machine.
    pub machine_y: Vec<Complex64>,
    /// Constant current injected at each bus by solar units.
    pub injection: Vec<Complex64>,
}

impl ReducedNetwork {
    pub(crate) fn build(
        model: &NetworkModel,
        overrides: &TopologyOverrides,
        inputs: &ReductionInputs,
    ) -> Result<Self> {
        let n = model.n_buses();
        let m = inputs.machine_bus.len();
        let mut ybb = build_admittance(model, overrides);
        for (i, d) in inputs.diagonal.iter().enumerate() {
            ybb[(i, i)] += d;
        }
        // Right-hand sides: -Y_bg columns, then the solar injections.
        let mut rhs = DMatrix::from_element(n, m + 1, Complex64::new(0.0, 0.0));
        for k in 0..m {
            rhs[(inputs.machine_bus[k], k)] = inputs.machine_y[k];
        }
        for i in 0..n {
            rhs[(i, m)] = inputs.injection[i];
        }
        let lu = ybb.lu();
        let x = lu
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
            .ok_or_else(|| Error::Singular("bus admittance matrix (islanded topology?)".into()))?;
        let mut r = vec![Complex64::new(0.0, 0.0); n * m];
        let mut v0 = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for k in 0..m {
                r[i * m + k] = x[(i, k)];
            }
            v0[i] = x[(i, m)];
        }
        let mut y_re = vec![0.0; m * m];
        let mut y_im = vec![0.0; m * m];
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let yk = inputs.machine_y[k];
            let b = inputs.machine_bus[k];
            for j in 0..m {
                let delta = if j == k { 1.0 } else { 0.0 };
                let v = yk * (Complex64::new(delta, 0.0) - r[b * m + j]);
                y_re[k * m + j] = v.re;
                y_im[k * m + j] = v.im;
            }
            c[k] = -yk * v0[b];
        }
        Ok(ReducedNetwork {
            m,
            n,
            y_re,
            y_im,
            c,
            r,
            v0,
        })
    }

    pub fn n_machines(&self) -> usize {
        self.m
    }

    /// Reduced admittance entry between machines `k` and `j`.
    pub fn admittance(&self, k: usize, j: usize) -> Complex64 {
        Complex64::new(self.y_re[k * self.m + j], self.y_im[k * self.m + j])
    }

    /// Electrical power of every machine for EMF components `(e_re, e_im)`.
    #[inline]
    pub(crate) fn electrical_power(&self, e_re: &[f64], e_im: &[f64], pe: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let row_re = &self.y_re[k * m..(k + 1) * m];
            let row_im = &self.y_im[k * m..(k + 1) * m];
            let mut i_re = self.c[k].re;
            let mut i_im = self.c[k].im;
            for j in 0..m {
                i_re += row_re[j] * e_re[j] - row_im[j] * e_im[j];
                i_im += row_re[j] * e_im[j] + row_im[j] * e_re[j];
            }
            pe[k] = e_re[k] * i_re + e_im[k] * i_im;
        }
    }

    /// Bus voltage phasors for the given internal EMFs.
    pub fn bus_voltages(&self, e: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let row = &self.r[i * self.m..(i + 1) * self.m];
                row.iter().zip(e).map(|(a, b)| a * b).sum::<Complex64>() + self.v0[i]
            })
            .collect()
    }
}
