//! Observation models linking the rate curve to observed rates.
//!
//! * Gaussian: `y ~ N(r(T), sigma^2)`
//! * Inverse-gamma: `y ~ InvGamma(zeta, (zeta - 1) r(T))`, so `E[y] = r(T)`
//!   and `Var[y] = r(T)^2 / (zeta - 2)` for `zeta > 2`
//! * Zero-inflated inverse-gamma: `y = 0` with probability
//!   `p = 1 / (exp(c (r - k)) + 1)`, otherwise inverse-gamma as above.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::curves::CurveParams;
use crate::data::Dataset;
use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::transform::Bijector;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ObsFamily {
    Gaussian,
    InverseGamma,
    #[serde(rename = "zi_inverse_gamma", alias = "zero_inflated_inverse_gamma")]
    ZeroInflatedInverseGamma,
}

impl ObsFamily {
    pub const ALL: [ObsFamily; 3] = [ObsFamily::Gaussian, ObsFamily::InverseGamma, ObsFamily::ZeroInflatedInverseGamma];

    pub fn name(self) -> &'static str {
        match self {
            ObsFamily::Gaussian => "gaussian",
            ObsFamily::InverseGamma => "inverse_gamma",
            ObsFamily::ZeroInflatedInverseGamma => "zi_inverse_gamma",
        }
    }

    /// Name of the sampled observation parameter.
    pub fn param_name(self) -> &'static str {
        match self {
            ObsFamily::Gaussian => "sigma",
            _ => "zeta",
        }
    }

    pub fn bijector(self) -> Bijector {
        match self {
            ObsFamily::Gaussian => Bijector::Lower(0.0),
            _ => Bijector::Lower(1.0),
        }
    }

    pub fn allows_zeros(self) -> bool {
        !matches!(self, ObsFamily::InverseGamma)
    }
}

impl std::str::FromStr for ObsFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" | "normal" => Ok(ObsFamily::Gaussian),
            "inverse_gamma" | "invgamma" | "inv_gamma" => Ok(ObsFamily::InverseGamma),
            "zi_inverse_gamma" | "ziig" | "zero_inflated_inverse_gamma" => Ok(ObsFamily::ZeroInflatedInverseGamma),
            other => Err(Error::Config(format!("unknown observation family `{other}`"))),
        }
    }
}

impl std::fmt::Display for ObsFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed slope `c` and midpoint `k` of the zero-probability logit link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZiConstants {
    pub c: f64,
    pub k: f64,
}

impl Default for ZiConstants {
    fn default() -> Self {
        Self { c: 100.0, k: 0.005 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianObs {
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvGammaObs {
    pub zeta: f64,
}

impl InvGammaObs {
    /// Variance is finite only for `zeta > 2`.
    pub fn has_finite_variance(&self) -> bool {
        self.zeta > 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZiigObs {
    pub zeta: f64,
    pub c: f64,
    pub k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ObsParams {
    Gaussian(GaussianObs),
    InverseGamma(InvGammaObs),
    ZeroInflatedInverseGamma(ZiigObs),
}

impl ObsParams {
    pub fn new(family: ObsFamily, value: f64, zi: ZiConstants) -> Self {
        match family {
            ObsFamily::Gaussian => ObsParams::Gaussian(GaussianObs { sigma: value }),
            ObsFamily::InverseGamma => ObsParams::InverseGamma(InvGammaObs { zeta: value }),
            ObsFamily::ZeroInflatedInverseGamma => {
                ObsParams::ZeroInflatedInverseGamma(ZiigObs { zeta: value, c: zi.c, k: zi.k })
            }
        }
    }

    pub fn family(&self) -> ObsFamily {
        match self {
            ObsParams::Gaussian(_) => ObsFamily::Gaussian,
            ObsParams::InverseGamma(_) => ObsFamily::InverseGamma,
            ObsParams::ZeroInflatedInverseGamma(_) => ObsFamily::ZeroInflatedInverseGamma,
        }
    }

    /// The sampled parameter (`sigma` or `zeta`).
    pub fn value(&self) -> f64 {
        match *self {
            ObsParams::Gaussian(g) => g.sigma,
            ObsParams::InverseGamma(g) => g.zeta,
            ObsParams::ZeroInflatedInverseGamma(g) => g.zeta,
        }
    }

    pub fn zi(&self) -> ZiConstants {
        match *self {
            ObsParams::ZeroInflatedInverseGamma(z) => ZiConstants { c: z.c, k: z.k },
            _ => ZiConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ObsParams::Gaussian(g) => g.sigma > 0.0,
            ObsParams::InverseGamma(g) => g.zeta > 1.0,
            ObsParams::ZeroInflatedInverseGamma(z) => z.zeta > 1.0 && z.c > 0.0 && z.k > 0.0,
        };
        if ok && self.value().is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid observation parameters {self:?}")))
        }
    }
}

/// Probability of an exact zero at curve value `r`.
pub fn zero_prob(r: f64, c: f64, k: f64) -> f64 {
    log_zero_prob(r, c, k).exp()
}

/// `ln p` for the zero probability, computed as `-softplus(c (r - k))`.
pub fn log_zero_prob<S: Scalar>(r: S, c: f64, k: f64) -> S {
    -((r - k) * c).softplus()
}

/// `ln(1 - p)`.
pub fn log_nonzero_prob<S: Scalar>(r: S, c: f64, k: f64) -> S {
    -(-((r - k) * c)).softplus()
}

/// Inverse-gamma log density with shape `zeta` and scale `(zeta - 1) r`.
fn inv_gamma_mean_log_density<S: Scalar>(zeta: S, r: S, y: f64) -> S {
    let scale = (zeta - 1.0) * r;
    zeta * scale.ln() - zeta.ln_gamma() - (zeta + 1.0) * y.ln() - scale / y
}

/// Log density of one observation, `-inf` where the model gives zero
/// density (non-positive inverse-gamma scale, a zero under the plain
/// inverse-gamma model).
pub fn log_obs_density<S: Scalar>(family: ObsFamily, obs_param: S, r: S, y: f64, zi: ZiConstants) -> S {
    match family {
        ObsFamily::Gaussian => {
            let z = (-r + y) / obs_param;
            -(z * z) * 0.5 - obs_param.ln() - LN_SQRT_2PI
        }
        ObsFamily::InverseGamma => {
            if y <= 0.0 || r.value() <= 0.0 {
                S::cst(f64::NEG_INFINITY)
            } else {
                inv_gamma_mean_log_density(obs_param, r, y)
            }
        }
        ObsFamily::ZeroInflatedInverseGamma => {
            if y == 0.0 {
                log_zero_prob(r, zi.c, zi.k)
            } else if y < 0.0 || r.value() <= 0.0 {
                S::cst(f64::NEG_INFINITY)
            } else {
                log_nonzero_prob(r, zi.c, zi.k) + inv_gamma_mean_log_density(obs_param, r, y)
            }
        }
    }
}

/// Log-likelihood of a dataset under a curve and observation model.
pub fn log_likelihood(obs: &ObsParams, curve: &CurveParams, data: &Dataset) -> Result<f64> {
    obs.validate()?;
    let family = obs.family();
    let zi = obs.zi();
    let mut total = 0.0;
    for (t, y) in data.iter() {
        let r = curve.rate(t)?;
        match family {
            ObsFamily::InverseGamma if y == 0.0 => return Err(Error::UnsupportedZero { temperature: t }),
            ObsFamily::InverseGamma | ObsFamily::ZeroInflatedInverseGamma if y > 0.0 && r <= 0.0 => {
                return Err(Error::InvalidScale { temperature: t })
            }
            _ => {}
        }
        if y < 0.0 && family != ObsFamily::Gaussian {
            return Err(Error::Data { line: 0, msg: format!("negative rate {y} at temperature {t}") });
        }
        total += log_obs_density(family, obs.value(), r, y, zi);
    }
    Ok(total)
}

/// Draws one observation given the curve value `r`.
pub fn sample_obs<R: Rng + ?Sized>(rng: &mut R, obs: &ObsParams, r: f64) -> Result<f64> {
    match *obs {
        ObsParams::Gaussian(g) => {
            if g.sigma == 0.0 {
                return Ok(r);
            }
            let n = Normal::new(r, g.sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
            Ok(n.sample(rng))
        }
        ObsParams::InverseGamma(g) => sample_inv_gamma(rng, g.zeta, r),
        ObsParams::ZeroInflatedInverseGamma(z) => {
            let p = zero_prob(r, z.c, z.k);
            if rng.random::<f64>() < p {
                Ok(0.0)
            } else {
                sample_inv_gamma(rng, z.zeta, r)
            }
        }
    }
}

fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, zeta: f64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::InvalidScale { temperature: f64::NAN });
    }
    let g = Gamma::new(zeta, 1.0).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok((zeta - 1.0) * r / g.sample(rng))
}
