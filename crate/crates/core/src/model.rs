//! Model specifications and their log densities on the unconstrained space.
//!
//! [`BayesModel`] is the interface every estimator works against: it splits
//! the unnormalized log posterior into `log prior + log|J|` and the log
//! likelihood, because tempered targets and evidence estimators need the two
//! parts separately. [`LogDensity`] is the narrower interface the samplers
//! see.

use serde::{Deserialize, Serialize};

use crate::curves::{rate_generic, CurveFamily, CurveOptions, CurveParams};
use crate::data::Dataset;
use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::numeric::{nelder_mead, NelderMeadOptions};
use crate::obs::{log_obs_density, ObsFamily, ObsParams, ZiConstants};
use crate::priors::PriorSet;
use crate::transform::ParamTransform;

/// A target density over `R^dim` with gradient.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density; `-inf` outside the support.
    fn log_density(&self, u: &[f64]) -> f64;

    /// Log density with its gradient written into `grad`. The gradient is
    /// unspecified when the returned value is not finite.
    fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> f64;
}

/// The two parts of an unnormalized log posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    /// Log prior plus the log Jacobian of the constraining transform.
    pub log_prior: f64,
    pub log_lik: f64,
}

impl Split {
    pub fn total(&self) -> f64 {
        let t = self.log_prior + self.log_lik;
        if t.is_nan() {
            f64::NEG_INFINITY
        } else {
            t
        }
    }

    pub fn is_finite(&self) -> bool {
        self.log_prior.is_finite() && self.log_lik.is_finite()
    }

    const NEG_INF: Split = Split { log_prior: f64::NEG_INFINITY, log_lik: f64::NEG_INFINITY };
}

/// A Bayesian model with a likelihood over a dataset.
pub trait BayesModel: Sync + Send {
    fn dim(&self) -> usize;

    /// Names of the constrained parameters.
    fn param_names(&self) -> Vec<String>;

    fn n_obs(&self) -> usize;

    fn constrain(&self, u: &[f64]) -> Vec<f64>;

    fn unconstrain(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn eval(&self, u: &[f64]) -> Split;

    /// [`eval`](Self::eval) plus the gradients of both parts.
    fn eval_grad(&self, u: &[f64], g_prior: &mut [f64], g_lik: &mut [f64]) -> Split;

    /// Per-observation log likelihood at constrained parameters.
    fn pointwise_log_lik(&self, x: &[f64]) -> Vec<f64>;

    fn log_lik(&self, x: &[f64]) -> f64 {
        self.pointwise_log_lik(x).iter().sum()
    }

    /// The same model with observation `index` removed.
    fn leave_one_out(&self, index: usize) -> Self
    where
        Self: Sized;

    /// Center of the box sampler chains are initialized in.
    fn init_center(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Closed-form log evidence, when the model has one.
    fn analytic_log_evidence(&self) -> Option<f64> {
        None
    }
}

/// `log prior + t * log likelihood`, the power posterior at temperature `t`.
///
/// The likelihood's support is kept at every `t`, including `t = 0`:
/// parameters under which the data are impossible stay excluded.
pub struct Tempered<'a, M: ?Sized> {
    pub model: &'a M,
    pub t: f64,
}

impl<'a, M: BayesModel + ?Sized> Tempered<'a, M> {
    pub fn new(model: &'a M, t: f64) -> Self {
        Self { model, t }
    }

    pub fn posterior(model: &'a M) -> Self {
        Self { model, t: 1.0 }
    }

    fn combine(&self, s: Split) -> f64 {
        if !s.is_finite() {
            return f64::NEG_INFINITY;
        }
        s.log_prior + self.t * s.log_lik
    }
}

impl<M: BayesModel + ?Sized> LogDensity for Tempered<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        self.combine(self.model.eval(u))
    }

    fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let mut gl = vec![0.0; u.len()];
        let s = self.model.eval_grad(u, grad, &mut gl);
        for (g, l) in grad.iter_mut().zip(&gl) {
            *g += self.t * l;
        }
        self.combine(s)
    }
}

/// Curve family, observation family, priors and support options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub curve: CurveFamily,
    pub obs: ObsFamily,
    pub priors: PriorSet,
    #[serde(default)]
    pub curve_options: CurveOptions,
    #[serde(default)]
    pub zi: ZiConstants,
}

impl ModelSpec {
    /// Default priors, Analytis restrictions and zero-inflation constants.
    pub fn new(curve: CurveFamily, obs: ObsFamily) -> Self {
        Self {
            curve,
            obs,
            priors: PriorSet::default_for(curve, obs),
            curve_options: CurveOptions::default(),
            zi: ZiConstants::default(),
        }
    }

    /// Short label such as `briere/inverse_gamma`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.curve, self.obs)
    }

    pub fn dim(&self) -> usize {
        self.curve.n_params() + 1
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.curve.param_names().iter().map(|s| s.to_string()).collect();
        names.push(self.obs.param_name().to_string());
        names
    }

    pub fn transform(&self) -> ParamTransform {
        let mut b = self.curve.bijectors(&self.curve_options);
        b.push(self.obs.bijector());
        ParamTransform::new(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate(self.curve)?;
        if !(self.zi.c > 0.0 && self.zi.k > 0.0) {
            return Err(Error::Config("zero-inflation constants c and k must be positive".into()));
        }
        if !(self.curve_options.analytis_cap > 0.0) {
            return Err(Error::Config("analytis exponent cap must be positive".into()));
        }
        Ok(())
    }

    /// Splits a constrained vector into curve and observation parameters.
    pub fn split_params(&self, x: &[f64]) -> Result<(CurveParams, ObsParams)> {
        let n = self.curve.n_params();
        if x.len() != n + 1 {
            return Err(Error::InvalidParams(format!("expected {} values, got {}", n + 1, x.len())));
        }
        Ok((CurveParams::from_slice(self.curve, &x[..n])?, ObsParams::new(self.obs, x[n], self.zi)))
    }

    /// Checks that a dataset can be fitted by this observation model.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.len() < 3 {
            return Err(Error::DegenerateDataset(format!("need at least 3 observations, got {}", data.len())));
        }
        data.validate_rates()?;
        if !self.obs.allows_zeros() {
            if let Some((t, _)) = data.iter().find(|&(_, y)| y == 0.0) {
                return Err(Error::UnsupportedZero { temperature: t });
            }
        }
        Ok(())
    }
}

/// A [`ModelSpec`] bound to a dataset.
#[derive(Clone, Debug)]
pub struct EcoModel {
    pub spec: ModelSpec,
    pub data: Dataset,
    transform: ParamTransform,
}

impl EcoModel {
    pub fn new(spec: ModelSpec, data: Dataset) -> Result<Self> {
        spec.validate()?;
        let transform = spec.transform();
        Ok(Self { spec, data, transform })
    }

    fn eval_generic<S: Scalar>(&self, u: &[S]) -> (S, S) {
        let (x, log_jac) = self.transform.constrain(u);
        let log_prior = self.spec.priors.log_prior(&x) + log_jac;
        if !log_prior.value().is_finite() {
            return (S::cst(f64::NEG_INFINITY), S::cst(f64::NEG_INFINITY));
        }
        let n = self.spec.curve.n_params();
        let (curve, obs_param) = (&x[..n], x[n]);
        let mut ll = S::cst(0.0);
        for (t, y) in self.data.iter() {
            let r = rate_generic(self.spec.curve, curve, t);
            let term = log_obs_density(self.spec.obs, obs_param, r, y, self.spec.zi);
            if !term.value().is_finite() {
                return (log_prior, S::cst(f64::NEG_INFINITY));
            }
            ll += term;
        }
        (log_prior, ll)
    }
}

impl BayesModel for EcoModel {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn param_names(&self) -> Vec<String> {
        self.spec.param_names()
    }

    fn n_obs(&self) -> usize {
        self.data.len()
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        self.transform.constrain_f64(u).0
    }

    fn unconstrain(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transform.unconstrain(x)
    }

    fn eval(&self, u: &[f64]) -> Split {
        let (log_prior, log_lik) = self.eval_generic::<f64>(u);
        let s = Split { log_prior, log_lik };
        if s.log_prior.is_nan() || s.log_lik.is_nan() {
            Split::NEG_INF
        } else {
            s
        }
    }

    fn eval_grad(&self, u: &[f64], g_prior: &mut [f64], g_lik: &mut [f64]) -> Split {
        let seeded = Dual::seed(u);
        let (lp, ll) = self.eval_generic::<Dual>(&seeded);
        let d = u.len();
        g_prior[..d].copy_from_slice(&lp.d[..d]);
        g_lik[..d].copy_from_slice(&ll.d[..d]);
        let s = Split { log_prior: lp.v, log_lik: ll.v };
        if s.log_prior.is_nan() || s.log_lik.is_nan() {
            Split::NEG_INF
        } else {
            s
        }
    }

    fn pointwise_log_lik(&self, x: &[f64]) -> Vec<f64> {
        let n = self.spec.curve.n_params();
        self.data
            .iter()
            .map(|(t, y)| {
                let r = rate_generic(self.spec.curve, &x[..n], t);
                let v = log_obs_density(self.spec.obs, x[n], r, y, self.spec.zi);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            })
            .collect()
    }

    fn leave_one_out(&self, index: usize) -> Self {
        Self { spec: self.spec.clone(), data: self.data.without(index), transform: self.transform.clone() }
    }

    /// A data-informed starting curve, polished towards the posterior mode.
    /// Falls back to the origin when no finite guess is found.
    fn init_center(&self) -> Vec<f64> {
        let origin = vec![0.0; self.dim()];
        let Some(u0) = initial_guess(&self.spec, &self.data).and_then(|x| self.unconstrain(&x).ok()) else {
            return origin;
        };
        if !self.eval(&u0).total().is_finite() {
            return origin;
        }
        let opts = NelderMeadOptions { max_evals: 3000, restarts: 1, ..Default::default() };
        let best = nelder_mead(|u| -self.eval(u).total(), &u0, opts);
        if best.value.is_finite() {
            best.x
        } else {
            u0
        }
    }
}

/// Rough constrained parameters matching the data's range and peak.
fn initial_guess(spec: &ModelSpec, data: &Dataset) -> Option<Vec<f64>> {
    let pos: Vec<(f64, f64)> = data.iter().filter(|&(_, y)| y > 0.0).collect();
    if pos.is_empty() {
        return None;
    }
    let t_lo = pos.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_hi = pos.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let range = (t_hi - t_lo).max(1.0);
    // temperature with the largest mean rate
    let mut by_t: Vec<(f64, f64)> = data
        .distinct_temperatures()
        .into_iter()
        .map(|t| {
            let ys: Vec<f64> = data.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
            (t, ys.iter().sum::<f64>() / ys.len() as f64)
        })
        .collect();
    by_t.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (t_pk, y_max) = by_t[0];
    let y_max = y_max.max(1e-3);
    let t_max = t_hi + 0.1 * range + 0.5;
    let t_min = (t_lo - 0.25 * range).max(0.5 * t_lo).max(1e-3);
    let mut x = match spec.curve {
        CurveFamily::Briere => {
            let shape = |t: f64| t * (t - t_min) * (t_max - t).sqrt();
            let peak = pos.iter().map(|p| shape(p.0)).fold(0.0, f64::max);
            let alpha = (y_max / peak).min(0.5);
            vec![-alpha.ln(), t_min, t_max]
        }
        CurveFamily::Analytis => {
            let floor = spec.curve_options.analytis_floor.unwrap_or(0.0);
            let t_min = (t_lo - 0.25 * range).max(floor + 0.5 * (t_lo - floor).max(0.0));
            let (n, m) = (2.0f64.min(0.5 * spec.curve_options.analytis_cap), 0.5f64.min(0.5 * spec.curve_options.analytis_cap));
            let shape = |t: f64| if t > t_min { (t - t_min).powf(n) * (t_max - t).powf(m) } else { 0.0 };
            let peak = pos.iter().map(|p| shape(p.0)).fold(0.0, f64::max);
            let alpha = (y_max / peak).min(0.5);
            vec![-alpha.ln(), n, m, t_min, t_max]
        }
        CurveFamily::Bieri => {
            let t_m2 = t_hi + 0.1 * range + 0.5;
            let ln_beta = 3.0 / (t_m2 - t_hi);
            let alpha = (1.05 * y_max / (t_pk - t_min).max(1.0)).min(0.5);
            vec![alpha, ln_beta.exp(), t_min, t_m2]
        }
        CurveFamily::Lactin => {
            let t_m = t_hi + (0.1 * range).max(4.0);
            let delta = ((t_m - t_hi) / 2.5).max(1.05);
            let rho = (y_max / (t_pk - t_min).max(1.0)).min(0.5 / delta);
            let lambda = -((rho * t_min).exp() - (rho * t_m - (t_m - t_min) / delta).exp());
            let p = crate::curves::LactinParams::from_natural(lambda.min(-1e-4), delta, rho, t_m);
            vec![p.l, p.del, p.a, p.rho]
        }
    };
    x.push(match spec.obs {
        ObsFamily::Gaussian => 0.2 * y_max,
        _ => 5.0,
    });
    Some(x)
}

/// Unnormalized log posterior at an unconstrained point; `-inf` where the
/// prior or likelihood vanishes.
pub fn log_posterior_unnorm(spec: &ModelSpec, data: &Dataset, u: &[f64]) -> Result<f64> {
    let m = EcoModel::new(spec.clone(), data.clone())?;
    Ok(m.eval(u).total())
}

/// Gradient of [`log_posterior_unnorm`].
pub fn grad_log_posterior(spec: &ModelSpec, data: &Dataset, u: &[f64]) -> Result<Vec<f64>> {
    let m = EcoModel::new(spec.clone(), data.clone())?;
    let mut g = vec![0.0; u.len()];
    let lp = Tempered::posterior(&m).log_density_grad(u, &mut g);
    if !lp.is_finite() {
        return Err(Error::NoGradient);
    }
    Ok(g)
}

/// Normal mean with known noise and a normal prior:
/// `y_i ~ N(mu, sigma^2)`, `mu ~ N(m0, tau^2)`. Closed-form posterior,
/// evidence and leave-one-out predictive densities make it the reference
/// model for the estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateNormal {
    pub y: Vec<f64>,
    pub sigma: f64,
    pub m0: f64,
    pub tau: f64,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
}

impl ConjugateNormal {
    pub fn new(y: Vec<f64>, sigma: f64, m0: f64, tau: f64) -> Result<Self> {
        if !(sigma > 0.0 && tau > 0.0) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("conjugate model needs sigma, tau > 0 and finite data".into()));
        }
        Ok(Self { y, sigma, m0, tau })
    }

    /// Posterior mean and standard deviation of `mu`.
    pub fn posterior(&self) -> (f64, f64) {
        let prec = 1.0 / (self.tau * self.tau) + self.y.len() as f64 / (self.sigma * self.sigma);
        let mean = (self.m0 / (self.tau * self.tau) + self.y.iter().sum::<f64>() / (self.sigma * self.sigma)) / prec;
        (mean, prec.recip().sqrt())
    }

    /// `log N(y | m0 1, sigma^2 I + tau^2 1 1')`, via the rank-one
    /// determinant and Sherman-Morrison identities.
    pub fn log_evidence(&self) -> f64 {
        let n = self.y.len() as f64;
        let (s2, t2) = (self.sigma * self.sigma, self.tau * self.tau);
        let d: Vec<f64> = self.y.iter().map(|v| v - self.m0).collect();
        let sum: f64 = d.iter().sum();
        let ss: f64 = d.iter().map(|v| v * v).sum();
        let log_det = n * s2.ln() + (1.0 + n * t2 / s2).ln();
        let quad = ss / s2 - t2 * sum * sum / (s2 * (s2 + n * t2));
        -0.5 * (n * LN_2PI + log_det + quad)
    }

    /// `log p(y_i | y_{-i})` for every `i`.
    pub fn loo_predictive(&self) -> Vec<f64> {
        (0..self.y.len())
            .map(|i| {
                let rest = self.leave_one_out(i);
                let (m, s) = rest.posterior();
                normal_logpdf(self.y[i], m, (s * s + self.sigma * self.sigma).sqrt())
            })
            .collect()
    }

    /// Effective parameter count `n tau^2 / (n tau^2 + sigma^2)`.
    pub fn shrinkage(&self) -> f64 {
        let n = self.y.len() as f64;
        n * self.tau * self.tau / (n * self.tau * self.tau + self.sigma * self.sigma)
    }
}

impl BayesModel for ConjugateNormal {
    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".to_string()]
    }

    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn unconstrain(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn eval(&self, u: &[f64]) -> Split {
        Split { log_prior: normal_logpdf(u[0], self.m0, self.tau), log_lik: self.log_lik(u) }
    }

    fn eval_grad(&self, u: &[f64], g_prior: &mut [f64], g_lik: &mut [f64]) -> Split {
        let mu = u[0];
        g_prior[0] = -(mu - self.m0) / (self.tau * self.tau);
        g_lik[0] = self.y.iter().map(|y| y - mu).sum::<f64>() / (self.sigma * self.sigma);
        self.eval(u)
    }

    fn pointwise_log_lik(&self, x: &[f64]) -> Vec<f64> {
        self.y.iter().map(|&y| normal_logpdf(y, x[0], self.sigma)).collect()
    }

    fn leave_one_out(&self, index: usize) -> Self {
        let mut y = self.y.clone();
        y.remove(index);
        Self { y, ..self.clone() }
    }

    fn analytic_log_evidence(&self) -> Option<f64> {
        Some(self.log_evidence())
    }
}
