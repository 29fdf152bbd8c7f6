//! Marginal-likelihood estimators: power posterior (thermodynamic
//! integration), importance sampling with a product-of-block-marginals
//! proposal, and iterative bridge sampling. Everything is on the log scale;
//! standard errors are carried to it with the delta method.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{ess, mcse_mean};
use crate::draws::DrawsMatrix;
use crate::error::{Error, Result};
use crate::hmc::{hmc_sample_tempered, HmcConfig};
use crate::model::{BayesModel, LogDensity, Tempered};
use crate::numeric::{log_mean_exp, log_sum_exp, mean, quantile, variance};
use crate::rng::{domain, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMethod {
    PowerPosterior,
    Importance,
    Bridge,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EvidenceDiagnostics {
    PowerPosterior {
        t_values: Vec<f64>,
        rung_means: Vec<f64>,
        rung_se: Vec<f64>,
        /// Variance of the log likelihood at every rung.
        rung_var: Vec<f64>,
        /// Rung means never decrease along the ladder (up to 3 se).
        monotone: bool,
        /// Plain minus corrected trapezoid: a gauge of the quadrature error,
        /// which the standard error does not include.
        discretization_gap: f64,
        divergences: usize,
    },
    Importance {
        n_proposal: usize,
        /// Largest normalized importance weight.
        max_weight: f64,
        /// Kish effective sample size of the weights.
        weight_ess: f64,
        ridged_blocks: Vec<usize>,
    },
    Bridge {
        iterations: usize,
        converged: bool,
        re2: f64,
        rho_f2: f64,
        warp3: bool,
        /// Log estimate after every iteration.
        trace: Vec<f64>,
        /// Relative change of the estimate at every iteration.
        rel_change: Vec<f64>,
    },
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub log_z: f64,
    pub se: f64,
    pub method: EvidenceMethod,
    pub diagnostics: EvidenceDiagnostics,
}

fn finite(est: EvidenceEstimate) -> Result<EvidenceEstimate> {
    if est.log_z.is_finite() && est.se >= 0.0 {
        Ok(est)
    } else {
        Err(Error::NoConvergence(format!("{:?} estimate is not finite ({})", est.method, est.log_z)))
    }
}

/// Exact log evidence of a model with a closed form.
pub fn analytic_evidence<M: BayesModel>(model: &M) -> Result<EvidenceEstimate> {
    let log_z = model.analytic_log_evidence().ok_or(Error::NotConjugate)?;
    Ok(EvidenceEstimate { log_z, se: 0.0, method: EvidenceMethod::Analytic, diagnostics: EvidenceDiagnostics::Analytic })
}

// ---------------------------------------------------------------- ladder

/// Sorted temperatures in `[0, 1]` starting at 0 and ending at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLadder {
    t_values: Vec<f64>,
}

impl TemperatureLadder {
    /// Sorts and de-duplicates `values`; they must lie in `[0, 1]` and
    /// include both ends.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("ladder temperatures must lie in [0, 1]".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.len() < 2 || values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(Error::Config("ladder must contain 0 and 1".into()));
        }
        Ok(Self { t_values: values })
    }

    /// `t_k = (k / n)^power`, `k = 0..=n`.
    pub fn power(n: usize, power: f64) -> Self {
        let n = n.max(1);
        Self { t_values: (0..=n).map(|k| (k as f64 / n as f64).powf(power)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.t_values
    }
}

impl Default for TemperatureLadder {
    fn default() -> Self {
        Self::power(20, 5.0)
    }
}

/// Trapezoid integral of the rung means and its standard error
/// `sqrt(sum_k (t_{k+1} - t_k)^2 / 2 * s_k^2)`.
pub fn trapezoid(t: &[f64], means: &[f64], se: &[f64]) -> (f64, f64) {
    let mut z = 0.0;
    let mut v = 0.0;
    for k in 0..t.len() - 1 {
        let h = t[k + 1] - t[k];
        z += 0.5 * h * (means[k] + means[k + 1]);
        v += 0.5 * h * h * se[k] * se[k];
    }
    (z, v.sqrt())
}

/// Quadrature over the ladder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationRule {
    /// Plain trapezoid on the rung means.
    #[default]
    Trapezoid,
    /// Trapezoid minus `sum_k h_k^2 / 12 (V_{k+1} - V_k)`, using that the
    /// derivative of the rung mean in `t` is the rung variance `V_k` of the
    /// log likelihood.
    CorrectedTrapezoid,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerPosteriorConfig {
    pub ladder: TemperatureLadder,
    /// Per-rung sampler; the stream path is set per rung.
    pub hmc: HmcConfig,
    pub rule: IntegrationRule,
}

/// Log evidence by thermodynamic integration over the ladder. Rungs are
/// sampled in parallel, each from its own stream.
pub fn power_posterior_evidence<M: BayesModel>(model: &M, cfg: &PowerPosteriorConfig) -> Result<EvidenceEstimate> {
    let t = cfg.ladder.values();
    let rungs: Vec<(f64, f64, f64, usize)> = t
        .par_iter()
        .enumerate()
        .map(|(k, &tk)| {
            let mut c = cfg.hmc.clone();
            c.stream = vec![domain::RUNG, k as u64];
            let d = hmc_sample_tempered(model, tk, &c, None).map_err(|e| Error::RungFailed { t: tk, source: Box::new(e) })?;
            let ll: Vec<f64> = d.constrained.par_iter().map(|x| model.log_lik(x)).collect();
            if ll.iter().any(|v| !v.is_finite()) {
                return Err(Error::RungFailed {
                    t: tk,
                    source: Box::new(Error::NoConvergence("draw with non-finite likelihood".into())),
                });
            }
            Ok((mean(&ll), mcse_mean(&d.split_by_chain(&ll)), variance(&ll), d.diagnostics.divergences))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = rungs.iter().map(|r| r.0).collect();
    let ses: Vec<f64> = rungs.iter().map(|r| r.1).collect();
    let vars: Vec<f64> = rungs.iter().map(|r| r.2).collect();
    let (trap, se) = trapezoid(t, &means, &ses);
    let corrected = trap - curvature_correction(t, &vars);
    let log_z = match cfg.rule {
        IntegrationRule::Trapezoid => trap,
        IntegrationRule::CorrectedTrapezoid => corrected,
    };
    let monotone = means.windows(2).zip(ses.windows(2)).all(|(m, s)| m[1] >= m[0] - 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    if !monotone {
        log::warn!("power-posterior rung means are not monotone in t");
    }
    finite(EvidenceEstimate {
        log_z,
        se,
        method: EvidenceMethod::PowerPosterior,
        diagnostics: EvidenceDiagnostics::PowerPosterior {
            t_values: t.to_vec(),
            rung_means: means,
            rung_se: ses,
            rung_var: vars,
            monotone,
            discretization_gap: trap - corrected,
            divergences: rungs.iter().map(|r| r.3).sum(),
        },
    })
}

/// `sum_k h_k^2 / 12 (V_{k+1} - V_k)`.
pub fn curvature_correction(t: &[f64], vars: &[f64]) -> f64 {
    (0..t.len() - 1).map(|k| (t[k + 1] - t[k]).powi(2) / 12.0 * (vars[k + 1] - vars[k])).sum()
}

// ---------------------------------------------------------------- Gaussian fits

/// Moment-matched multivariate normal.
#[derive(Clone, Debug)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    /// Lower Cholesky factor of the covariance.
    pub chol: DMatrix<f64>,
    log_norm: f64,
    /// True when the covariance needed the diagonal ridge.
    pub ridged: bool,
}

pub const RIDGE: f64 = 1e-8;

impl GaussianFit {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::EmptyDraws);
        }
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = DVector::zeros(d);
        for r in rows {
            mean += DVector::from_column_slice(r) / n;
        }
        let mut cov = DMatrix::zeros(d, d);
        for r in rows {
            let z = DVector::from_column_slice(r) - &mean;
            cov += &z * z.transpose() / (n - 1.0);
        }
        Self::new(mean, cov)
    }

    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let scale = cov.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        // numerically singular factors count as failures too
        let plain = cov.clone().cholesky().map(|c| c.l()).filter(|l| l.diagonal().iter().all(|v| v * v > 1e-12 * scale));
        let (chol, ridged) = match plain {
            Some(l) => (l, false),
            None => {
                log::warn!("singular covariance; adding a {RIDGE:e} diagonal ridge");
                let c = (cov + DMatrix::identity(d, d) * RIDGE)
                    .cholesky()
                    .ok_or_else(|| Error::NoConvergence("covariance is not positive definite even with a ridge".into()))?;
                (c.l(), true)
            }
        };
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self { mean, chol, log_norm, ridged })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `log |det L|`.
    pub fn log_det_chol(&self) -> f64 {
        self.chol.diagonal().iter().map(|v| v.ln()).sum()
    }

    /// `L^{-1} (x - center)`.
    pub fn whiten(&self, x: &[f64], center: &DVector<f64>) -> DVector<f64> {
        let z = DVector::from_column_slice(x) - center;
        self.chol.solve_lower_triangular(&z).expect("Cholesky factor has a positive diagonal")
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let w = self.whiten(x, &self.mean);
        self.log_norm - 0.5 * w.norm_squared()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        (&self.mean + &self.chol * z).iter().copied().collect()
    }
}

// ---------------------------------------------------------------- importance sampling

/// Default parameter blocks: curve parameters, then the observation
/// parameter (the last coordinate). One-dimensional models use one block.
pub fn default_blocks(dim: usize) -> Vec<Vec<usize>> {
    if dim < 2 {
        vec![(0..dim).collect()]
    } else {
        vec![(0..dim - 1).collect(), vec![dim - 1]]
    }
}

fn check_blocks(blocks: &[Vec<usize>], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    for &i in blocks.iter().flatten() {
        if i >= dim || seen[i] {
            return Err(Error::Config(format!("blocks must partition 0..{dim}")));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config(format!("blocks must partition 0..{dim}")));
    }
    Ok(())
}

/// Importance-sampling evidence against `target` with the proposal
/// `g = prod_b g_b`. Proposal draws recombine the posterior draws' block
/// sub-vectors through independent permutations of the draw indices; each
/// `g_b` density is a Gaussian fit to that block on the unconstrained scale.
pub fn importance_evidence_density<D: LogDensity + ?Sized>(
    target: &D,
    draws: &DrawsMatrix,
    blocks: &[Vec<usize>],
    n_is: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvidenceEstimate> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let dim = target.dim();
    check_blocks(blocks, dim)?;
    let n_is = n_is.max(1);
    let fits: Vec<GaussianFit> = blocks
        .iter()
        .map(|b| {
            let rows: Vec<Vec<f64>> = draws.unconstrained.iter().map(|r| b.iter().map(|&i| r[i]).collect()).collect();
            GaussianFit::from_rows(&rows)
        })
        .collect::<Result<_>>()?;
    // one index sequence per block: concatenated permutations of the draws
    let perms: Vec<Vec<usize>> = blocks
        .iter()
        .map(|_| {
            let mut seq = Vec::with_capacity(n_is);
            while seq.len() < n_is {
                let mut p: Vec<usize> = (0..draws.len()).collect();
                p.shuffle(rng);
                seq.extend(p);
            }
            seq.truncate(n_is);
            seq
        })
        .collect();
    let log_w: Vec<f64> = (0..n_is)
        .into_par_iter()
        .map(|k| {
            let mut theta = vec![0.0; dim];
            let mut log_g = 0.0;
            for (b, block) in blocks.iter().enumerate() {
                let src = &draws.unconstrained[perms[b][k]];
                let sub: Vec<f64> = block.iter().map(|&i| src[i]).collect();
                log_g += fits[b].log_pdf(&sub);
                for (&i, v) in block.iter().zip(&sub) {
                    theta[i] = *v;
                }
            }
            target.log_density(&theta) - log_g
        })
        .collect();
    let log_z = log_mean_exp(&log_w);
    // se of z-hat is sd(w) / sqrt(K); on the log scale that is divided by z-hat
    let rel: Vec<f64> = log_w.iter().map(|l| (l - log_z).exp()).collect();
    let var_rel = rel.iter().map(|r| (r - 1.0).powi(2)).sum::<f64>() / n_is as f64;
    let se = (var_rel / n_is as f64).sqrt();
    let total = log_sum_exp(&log_w);
    let max_weight = log_w.iter().map(|l| (l - total).exp()).fold(0.0, f64::max);
    let weight_ess = 1.0 / log_w.iter().map(|l| (2.0 * (l - total)).exp()).sum::<f64>();
    let ridged_blocks: Vec<usize> = fits.iter().enumerate().filter(|(_, f)| f.ridged).map(|(i, _)| i).collect();
    finite(EvidenceEstimate {
        log_z,
        se,
        method: EvidenceMethod::Importance,
        diagnostics: EvidenceDiagnostics::Importance { n_proposal: n_is, max_weight, weight_ess, ridged_blocks },
    })
}

/// Importance-sampling evidence of `model` from its posterior draws.
pub fn importance_evidence<M: BayesModel>(
    model: &M,
    draws: &DrawsMatrix,
    blocks: Option<&[Vec<usize>]>,
    n_is: usize,
    seed: u64,
) -> Result<EvidenceEstimate> {
    let target = Tempered::posterior(model);
    let default = default_blocks(model.dim());
    let mut rng = stream_rng(seed, &[domain::IMPORTANCE]);
    importance_evidence_density(&target, draws, blocks.unwrap_or(&default), n_is, &mut rng)
}

// ---------------------------------------------------------------- bridge sampling

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    /// Proposal draws; defaults to the number of estimation draws.
    pub n_proposal: Option<usize>,
    /// Warp the posterior to a symmetric, standardized shape and bridge it
    /// to a standard normal.
    pub warp3: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { n_proposal: None, warp3: false, tol: 1e-10, max_iter: 1000, seed: 1 }
    }
}

/// Evaluated log densities for the bridge iteration: `l1` at the posterior
/// estimation draws and `l2` at the proposal draws, both `log q - log g`.
struct BridgeInputs {
    l1: Vec<f64>,
    l2: Vec<f64>,
}

fn bridge_inputs<D: LogDensity + ?Sized>(
    target: &D,
    fit_half: &DrawsMatrix,
    est_half: &DrawsMatrix,
    n2: usize,
    warp3: bool,
    rng: &mut ChaCha8Rng,
) -> Result<BridgeInputs> {
    let g = GaussianFit::from_rows(&fit_half.unconstrained)?;
    let d = g.dim();
    let proposal: Vec<Vec<f64>> = (0..n2)
        .map(|_| if warp3 { (0..d).map(|_| StandardNormal.sample(rng)).collect() } else { g.sample(rng) })
        .collect();
    if !warp3 {
        let l1 = est_half.unconstrained.par_iter().map(|x| target.log_density(x) - g.log_pdf(x)).collect();
        let l2 = proposal.par_iter().map(|x| target.log_density(x) - g.log_pdf(x)).collect();
        return Ok(BridgeInputs { l1, l2 });
    }
    // warp-3: xi = L^{-1}(theta - c) with c the coordinatewise median; the
    // warped density |L| (q(c + L xi) + q(c - L xi)) / 2 is symmetric and has
    // the same normalizing constant as q
    let center = DVector::from_fn(d, |i, _| quantile(&fit_half.unconstrained.iter().map(|r| r[i]).collect::<Vec<_>>(), 0.5));
    let log_det = g.log_det_chol();
    let std_normal = |xi: &DVector<f64>| -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + xi.norm_squared());
    let warped = |xi: &DVector<f64>| {
        let step = &g.chol * xi;
        let a: Vec<f64> = (&center + &step).iter().copied().collect();
        let b: Vec<f64> = (&center - &step).iter().copied().collect();
        log_det + log_sum_exp(&[target.log_density(&a), target.log_density(&b)]) - std::f64::consts::LN_2
    };
    let l1 = est_half
        .unconstrained
        .par_iter()
        .map(|x| {
            let xi = g.whiten(x, &center);
            warped(&xi) - std_normal(&xi)
        })
        .collect();
    let l2 = proposal
        .par_iter()
        .map(|x| {
            let xi = DVector::from_column_slice(x);
            warped(&xi) - std_normal(&xi)
        })
        .collect();
    Ok(BridgeInputs { l1, l2 })
}

/// Outcome of the fixed-point iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgeIteration {
    pub log_z: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub rel_change: Vec<f64>,
}

/// Meng-Wong iteration
/// `z <- mean_g[q/(s1 q + s2 z g)] / mean_p[g/(s1 q + s2 z g)]`
/// from the log ratios `l1 = log q/g` at posterior draws and `l2` at
/// proposal draws, computed relative to `l* = median(l1)`.
pub fn bridge_iterate(l1: &[f64], l2: &[f64], tol: f64, max_iter: usize) -> Result<BridgeIteration> {
    let n1 = l1.len() as f64;
    let n2 = l2.len() as f64;
    let (s1, s2) = (n1 / (n1 + n2), n2 / (n1 + n2));
    let lstar = quantile(l1, 0.5);
    if !lstar.is_finite() {
        return Err(Error::BridgeDiverged { trace: vec![lstar] });
    }
    let a1: Vec<f64> = l1.iter().map(|l| l - lstar).collect();
    let a2: Vec<f64> = l2.iter().map(|l| l - lstar).collect();
    // log r with z = r * exp(l*)
    let mut log_r = 0.0f64;
    let mut trace = Vec::new();
    let mut rel_change = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        // log(s1 e^a + s2 r) computed stably
        let denom = |a: f64| {
            if a == f64::NEG_INFINITY {
                s2.ln() + log_r
            } else {
                log_sum_exp(&[s1.ln() + a, s2.ln() + log_r])
            }
        };
        let num: Vec<f64> = a2.iter().map(|&a| if a == f64::NEG_INFINITY { a } else { a - denom(a) }).collect();
        let den: Vec<f64> = a1.iter().map(|&a| -denom(a)).collect();
        let next = log_mean_exp(&num) - log_mean_exp(&den);
        if !next.is_finite() {
            trace.push(next + lstar);
            return Err(Error::BridgeDiverged { trace });
        }
        let rel = (next - log_r).exp_m1().abs();
        log_r = next;
        trace.push(log_r + lstar);
        rel_change.push(rel);
        if rel < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("bridge iteration stopped after {max_iter} iterations without meeting the tolerance");
    }
    Ok(BridgeIteration { log_z: log_r + lstar, iterations: trace.len(), converged, trace, rel_change })
}

/// Relative mean-square error of the bridge estimate:
/// `V_g(f1) / (N2 E_g(f1)^2) + rho_f2(0) V_p(f2) / (N1 E_p(f2)^2)`, with
/// `rho_f2(0)` the integrated autocorrelation time of `f2` over the chains.
/// Returns `(RE^2, rho_f2(0))`.
pub fn bridge_re2(l1: &[f64], l2: &[f64], log_z: f64, est_half: &DrawsMatrix) -> (f64, f64) {
    let n1 = l1.len() as f64;
    let n2 = l2.len() as f64;
    let (s1, s2) = (n1 / (n1 + n2), n2 / (n1 + n2));
    // with a = l - log z: f1 = e^a / (s1 e^a + s2), f2 = 1 / (s1 e^a + s2),
    // both up to a common factor that cancels in the ratios
    let f = |a: f64| 1.0 / (s1 * a.exp() + s2);
    let f1: Vec<f64> = l2.iter().map(|l| (l - log_z).exp() * f(l - log_z)).collect();
    let f2: Vec<f64> = l1.iter().map(|l| f(l - log_z)).collect();
    let cv2 = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0) / (m * m)
    };
    let e = ess(&est_half.split_by_chain(&f2));
    let rho = if e > 0.0 { n1 / e } else { 1.0 };
    (cv2(&f1) / n2 + rho * cv2(&f2) / n1, rho)
}

/// Bridge-sampling evidence of `target`: the first half of every chain fits
/// the Gaussian proposal, the second half enters the estimator.
pub fn bridge_evidence_density<D: LogDensity + ?Sized>(
    target: &D,
    draws: &DrawsMatrix,
    cfg: &BridgeConfig,
) -> Result<EvidenceEstimate> {
    if draws.n_draws < 4 {
        return Err(Error::EmptyDraws);
    }
    let fit_half = draws.half(0);
    let est_half = draws.half(1);
    let n2 = cfg.n_proposal.unwrap_or(est_half.len()).max(1);
    let mut rng = stream_rng(cfg.seed, &[domain::BRIDGE]);
    let inp = bridge_inputs(target, &fit_half, &est_half, n2, cfg.warp3, &mut rng)?;
    let it = bridge_iterate(&inp.l1, &inp.l2, cfg.tol, cfg.max_iter)?;
    let (re2, rho_f2) = bridge_re2(&inp.l1, &inp.l2, it.log_z, &est_half);
    finite(EvidenceEstimate {
        log_z: it.log_z,
        // se(z) = RE * z, so on the log scale se = RE
        se: re2.sqrt(),
        method: EvidenceMethod::Bridge,
        diagnostics: EvidenceDiagnostics::Bridge {
            iterations: it.iterations,
            converged: it.converged,
            re2,
            rho_f2,
            warp3: cfg.warp3,
            trace: it.trace,
            rel_change: it.rel_change,
        },
    })
}

pub fn bridge_evidence<M: BayesModel>(model: &M, draws: &DrawsMatrix, cfg: &BridgeConfig) -> Result<EvidenceEstimate> {
    bridge_evidence_density(&Tempered::posterior(model), draws, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_is_canonicalized() {
        let fwd = TemperatureLadder::default();
        let mut rev = fwd.values().to_vec();
        rev.reverse();
        rev.push(0.5f64.powi(5));
        rev.push(1.0);
        assert_eq!(TemperatureLadder::new(rev).unwrap(), fwd);
        assert!(TemperatureLadder::new(vec![0.2, 1.0]).is_err());
    }

    #[test]
    fn constant_integrand_integrates_exactly() {
        let t = TemperatureLadder::default();
        let means = vec![-3.25; t.values().len()];
        let (z, se) = trapezoid(t.values(), &means, &vec![0.0; means.len()]);
        assert!((z + 3.25).abs() < 1e-12);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn bridge_fixed_point_in_one_step() {
        // q = z g exactly: every log ratio equals log z
        let l1 = vec![1.7; 100];
        let l2 = vec![1.7; 80];
        let it = bridge_iterate(&l1, &l2, 1e-10, 1000).unwrap();
        assert!((it.trace[0] - 1.7).abs() < 1e-12);
        assert!(it.iterations <= 2);
    }

    #[test]
    fn gaussian_fit_log_pdf_matches_closed_form() {
        let g = GaussianFit::new(DVector::from_vec(vec![1.0, -1.0]), DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0])).unwrap();
        // x = mean: log N = -log(2 pi) - log(det)/2, det = 7
        let want = -(2.0 * std::f64::consts::PI).ln() - 0.5 * 7f64.ln();
        assert!((g.log_pdf(&[1.0, -1.0]) - want).abs() < 1e-12);
    }

    #[test]
    fn singular_block_gets_ridge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(GaussianFit::from_rows(&rows).unwrap().ridged);
    }
}
