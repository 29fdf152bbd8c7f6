//! Bijections between bounded parameter spaces and R^n.
//!
//! Each coordinate is mapped by a [`Bijector`] that may depend on an earlier
//! coordinate (ordering constraints such as `t_min < t_max`), so the Jacobian
//! is lower triangular and its log-determinant is a plain sum.

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bijector {
    Identity,
    /// `x = lo + exp(u)`
    Lower(f64),
    /// `x = lo + (hi - lo) * sigmoid(u)`
    Interval(f64, f64),
    /// `x = x[j] + exp(u)`
    AboveParam(usize),
    /// `x = x[j] * sigmoid(u)`, i.e. `0 < x < x[j]`
    FractionOf(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTransform {
    pub bijectors: Vec<Bijector>,
}

impl ParamTransform {
    pub fn new(bijectors: Vec<Bijector>) -> Self {
        Self { bijectors }
    }

    pub fn dim(&self) -> usize {
        self.bijectors.len()
    }

    /// Maps an unconstrained vector to the constrained space and returns the
    /// log absolute Jacobian determinant of that map.
    pub fn constrain<S: Scalar>(&self, u: &[S]) -> (Vec<S>, S) {
        let mut x: Vec<S> = Vec::with_capacity(u.len());
        let mut log_jac = S::cst(0.0);
        for (b, &ui) in self.bijectors.iter().zip(u) {
            let xi = match *b {
                Bijector::Identity => ui,
                Bijector::Lower(lo) => {
                    log_jac += ui;
                    ui.exp() + lo
                }
                Bijector::Interval(lo, hi) => {
                    log_jac += -(-ui).softplus() - ui.softplus() + (hi - lo).ln();
                    ui.sigmoid() * (hi - lo) + lo
                }
                Bijector::AboveParam(j) => {
                    log_jac += ui;
                    x[j] + ui.exp()
                }
                Bijector::FractionOf(j) => {
                    log_jac += x[j].ln() - (-ui).softplus() - ui.softplus();
                    x[j] * ui.sigmoid()
                }
            };
            x.push(xi);
        }
        (x, log_jac)
    }

    /// Inverse of [`constrain`](Self::constrain).
    pub fn unconstrain(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::InvalidParams(format!("expected {} values, got {}", self.dim(), x.len())));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter {v}")));
        }
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let mut u = Vec::with_capacity(x.len());
        for (i, b) in self.bijectors.iter().enumerate() {
            let xi = x[i];
            let out_of_support = || Error::InvalidParams(format!("coordinate {i} = {xi} outside {b:?}"));
            let ui = match *b {
                Bijector::Identity => xi,
                Bijector::Lower(lo) => {
                    if xi <= lo {
                        return Err(out_of_support());
                    }
                    (xi - lo).ln()
                }
                Bijector::Interval(lo, hi) => {
                    if xi <= lo || xi >= hi {
                        return Err(out_of_support());
                    }
                    logit((xi - lo) / (hi - lo))
                }
                Bijector::AboveParam(j) => {
                    if xi <= x[j] {
                        return Err(out_of_support());
                    }
                    (xi - x[j]).ln()
                }
                Bijector::FractionOf(j) => {
                    if xi <= 0.0 || xi >= x[j] {
                        return Err(out_of_support());
                    }
                    logit(xi / x[j])
                }
            };
            u.push(ui);
        }
        Ok(u)
    }

    pub fn constrain_f64(&self, u: &[f64]) -> (Vec<f64>, f64) {
        self.constrain::<f64>(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn sample_transform() -> ParamTransform {
        ParamTransform::new(vec![
            Bijector::Interval(0.0, 1.0),
            Bijector::Lower(1.0),
            Bijector::Lower(0.0),
            Bijector::AboveParam(2),
            Bijector::FractionOf(0),
            Bijector::Identity,
        ])
    }

    #[test]
    fn logit_of_half_is_zero() {
        let t = ParamTransform::new(vec![Bijector::Interval(0.0, 1.0)]);
        assert_eq!(t.unconstrain(&[0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn rejects_out_of_support() {
        let t = sample_transform();
        assert!(t.unconstrain(&[0.5, 0.9, 1.0, 2.0, 0.1, 0.0]).is_err());
        assert!(t.unconstrain(&[0.5, 1.5, 3.0, 2.0, 0.1, 0.0]).is_err());
        assert!(t.unconstrain(&[0.5, 1.5, 1.0, 2.0, 0.7, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_log_jacobian(u in prop::collection::vec(-4.0f64..4.0, 6)) {
            let t = sample_transform();
            let (x, lj) = t.constrain_f64(&u);
            let back = t.unconstrain(&x).unwrap();
            for (a, b) in u.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
            let n = u.len();
            let mut jac = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                let h = 1e-6;
                let mut up = u.clone();
                let mut dn = u.clone();
                up[j] += h;
                dn[j] -= h;
                let (xu, _) = t.constrain_f64(&up);
                let (xd, _) = t.constrain_f64(&dn);
                for i in 0..n {
                    jac[(i, j)] = (xu[i] - xd[i]) / (2.0 * h);
                }
            }
            let numeric = jac.determinant().abs().ln();
            prop_assert!((numeric - lj).abs() <= 1e-6 * (1.0 + lj.abs()), "{} vs {}", numeric, lj);
        }
    }
}
