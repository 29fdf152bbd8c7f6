//! Analytic reference targets for sampler and variational checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LogDensity;

/// Unnormalized standard normal, `-|x|^2 / 2`.
#[derive(Clone, Copy, Debug)]
pub struct StdGaussian {
    pub dim: usize,
}

impl LogDensity for StdGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        -0.5 * u.iter().map(|x| x * x).sum::<f64>()
    }

    fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        for (g, x) in grad.iter_mut().zip(u) {
            *g = -x;
        }
        self.log_density(u)
    }
}

/// Normalized multivariate normal `N(mean, cov)`, so its log evidence is 0.
#[derive(Clone, Debug)]
pub struct MvnTarget {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl MvnTarget {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = cov.clone().cholesky().ok_or_else(|| Error::InvalidParams("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self { mean: DVector::from_vec(mean), precision: chol.inverse(), cov, log_norm })
    }
}

impl LogDensity for MvnTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let z = DVector::from_column_slice(u) - &self.mean;
        self.log_norm - 0.5 * z.dot(&(&self.precision * &z))
    }

    fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let z = DVector::from_column_slice(u) - &self.mean;
        let pz = &self.precision * &z;
        for (g, v) in grad.iter_mut().zip(pz.iter()) {
            *g = -v;
        }
        self.log_norm - 0.5 * z.dot(&pz)
    }
}
