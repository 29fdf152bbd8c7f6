//! Prior densities and the default prior table.
//!
//! Gamma priors are parametrized by shape and **rate**: `Gamma(a, b)` has
//! density `b^a x^(a-1) e^(-b x) / Gamma(a)`. Inverse-gamma priors use shape
//! and scale.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::curves::CurveFamily;
use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::obs::ObsFamily;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    Uniform { lo: f64, hi: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGamma { shape: f64, scale: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Prior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Prior::InverseGamma { shape, scale } => shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior hyperparameters {self:?}")))
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn log_density<S: Scalar>(&self, x: S) -> S {
        let v = x.value();
        match *self {
            Prior::Uniform { lo, hi } => {
                if v >= lo && v <= hi {
                    S::cst(-(hi - lo).ln())
                } else {
                    S::cst(f64::NEG_INFINITY)
                }
            }
            Prior::Gamma { shape, rate } => {
                if v <= 0.0 {
                    return S::cst(f64::NEG_INFINITY);
                }
                x.ln() * (shape - 1.0) - x * rate + (shape * rate.ln() - ln_gamma(shape))
            }
            Prior::InverseGamma { shape, scale } => {
                if v <= 0.0 {
                    return S::cst(f64::NEG_INFINITY);
                }
                x.ln() * (-shape - 1.0) - x.recip() * scale + (shape * scale.ln() - ln_gamma(shape))
            }
        }
    }
}

/// Priors for the curve parameters (in storage order) and the observation
/// parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub curve: Vec<Prior>,
    pub obs: Prior,
}

impl PriorSet {
    /// The default weakly informative priors for each curve and observation family.
    pub fn default_for(curve: CurveFamily, obs: ObsFamily) -> Self {
        use Prior::*;
        let g = |shape, rate| Gamma { shape, rate };
        let curve_priors = match curve {
            CurveFamily::Bieri => vec![Uniform { lo: 0.0, hi: 1.0 }, g(0.2, 0.1), g(0.1, 0.01), g(0.1, 0.01)],
            CurveFamily::Briere => vec![g(0.1, 0.01), g(0.01, 0.01), g(0.01, 0.001)],
            CurveFamily::Analytis => vec![g(0.1, 0.01), g(0.1, 0.1), g(0.1, 0.1), g(0.01, 0.01), g(0.01, 0.001)],
            CurveFamily::Lactin => vec![g(0.1, 0.1), Uniform { lo: 0.0, hi: 1.0 }, g(0.01, 0.001), Uniform { lo: 0.0, hi: 1.0 }],
        };
        let obs_prior = match obs {
            ObsFamily::Gaussian => InverseGamma { shape: 1e-3, scale: 1e-3 },
            ObsFamily::InverseGamma | ObsFamily::ZeroInflatedInverseGamma => g(0.1, 0.01),
        };
        Self { curve: curve_priors, obs: obs_prior }
    }

    pub fn validate(&self, curve: CurveFamily) -> Result<()> {
        if self.curve.len() != curve.n_params() {
            return Err(Error::Config(format!(
                "{curve} needs {} curve priors, got {}",
                curve.n_params(),
                self.curve.len()
            )));
        }
        self.curve.iter().chain(std::iter::once(&self.obs)).try_for_each(Prior::validate)
    }

    /// Sum of log prior densities at constrained values `[curve..., obs]`.
    pub fn log_prior<S: Scalar>(&self, constrained: &[S]) -> S {
        let mut lp = S::cst(0.0);
        for (p, &x) in self.curve.iter().chain(std::iter::once(&self.obs)).zip(constrained) {
            lp += p.log_density(x);
        }
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_unit_interval_is_flat() {
        let p = Prior::Uniform { lo: 0.0, hi: 1.0 };
        assert_eq!(p.log_density(0.3), 0.0);
        assert_eq!(p.log_density(1.3), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_density_at_one() {
        // oracle: 0.1 ln 0.01 - lnGamma(0.1) - 0.01, lnGamma(0.1) = 2.252712651734206
        let want = 0.1 * 0.01f64.ln() - 2.252712651734206 - 0.01;
        let got = Prior::Gamma { shape: 0.1, rate: 0.01 }.log_density(1.0);
        assert!((got - want).abs() < 1e-12);
        assert!((got + 2.72322967).abs() < 1e-7);
    }

    #[test]
    fn inverse_gamma_density() {
        // InvGamma(3, 2) at 0.5: 3 ln 2 - ln 2 - 4 ln 0.5 - 4
        let want = 3.0 * 2f64.ln() - 2f64.ln() - 4.0 * 0.5f64.ln() - 4.0;
        let got = Prior::InverseGamma { shape: 3.0, scale: 2.0 }.log_density(0.5);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn defaults_match_parameter_counts() {
        for c in CurveFamily::ALL {
            for o in ObsFamily::ALL {
                PriorSet::default_for(c, o).validate(c).unwrap();
            }
        }
    }
}
