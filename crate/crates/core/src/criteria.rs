//! Information criteria: AIC, BIC, DIC, WAIC and exact leave-one-out
//! cross-validation, each on the deviance (`-2 x log`) scale.
//!
//! Monte Carlo standard errors come from a first-order linearization of each
//! criterion in the per-draw contributions, divided by the multi-chain ESS of
//! the linearized series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::mcse_mean;
use crate::draws::DrawsMatrix;
use crate::error::{Error, Result};
use crate::hmc::{sample_density, warm_start_from, HmcConfig};
use crate::model::{BayesModel, Tempered};
use crate::numeric::{log_mean_exp, mean, nelder_mead, NelderMeadOptions};
use crate::rng::domain;

/// Log likelihood of every observation at every draw, rows = draws.
pub fn pointwise_matrix<M: BayesModel>(model: &M, draws: &DrawsMatrix) -> Vec<Vec<f64>> {
    draws.constrained.par_iter().map(|x| model.pointwise_log_lik(x)).collect()
}

fn column(m: &[Vec<f64>], j: usize) -> Vec<f64> {
    m.iter().map(|r| r[j]).collect()
}

/// MCSE of the mean of a per-draw series, respecting chain structure.
fn series_mcse(draws: &DrawsMatrix, psi: &[f64]) -> f64 {
    mcse_mean(&draws.split_by_chain(psi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    /// Constrained maximizer.
    pub theta: Vec<f64>,
    pub max_log_lik: f64,
    /// Largest log likelihood among the draws (the starting point).
    pub best_draw_log_lik: f64,
    /// False when the simplex could not improve on the best draw.
    pub improved: bool,
}

/// Maximum likelihood by Nelder-Mead on the unconstrained scale, started at
/// the draw with the largest likelihood.
pub fn mle_fit<M: BayesModel>(model: &M, draws: &DrawsMatrix) -> Result<MleFit> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let lls: Vec<f64> = draws.constrained.par_iter().map(|x| model.log_lik(x)).collect();
    let (best, &best_ll) = lls
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NoConvergence("no draw has a finite likelihood".into()))?;
    let u0 = draws.unconstrained[best].clone();
    let f = |u: &[f64]| {
        let ll = model.eval(u).log_lik;
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let opt = nelder_mead(f, &u0, NelderMeadOptions { initial_step: 0.05, max_evals: 40_000, ..Default::default() });
    if opt.value.is_finite() && -opt.value > best_ll {
        let theta = model.constrain(&opt.x);
        let max_log_lik = model.log_lik(&theta);
        Ok(MleFit { theta, max_log_lik, best_draw_log_lik: best_ll, improved: true })
    } else {
        log::warn!("maximum likelihood search did not improve on the best draw");
        Ok(MleFit { theta: draws.constrained[best].clone(), max_log_lik: best_ll, best_draw_log_lik: best_ll, improved: false })
    }
}

pub fn aic(max_log_lik: f64, k: usize) -> f64 {
    -2.0 * max_log_lik + 2.0 * k as f64
}

pub fn bic(max_log_lik: f64, k: usize, n: usize) -> f64 {
    -2.0 * max_log_lik + k as f64 * (n as f64).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DicResult {
    pub dic_1: f64,
    pub dic_2: f64,
    pub p_dic_1: f64,
    pub p_dic_2: f64,
    pub mcse_p_dic_1: f64,
    pub mcse_p_dic_2: f64,
    /// Log likelihood at the posterior mean of the constrained parameters.
    pub log_lik_at_mean: f64,
    pub mean_log_lik: f64,
}

/// DIC with `p_DIC1 = 2 (log p(y|theta_bar) - E log p(y|theta))` and
/// `p_DIC2 = 2 Var(log p(y|theta))` (half the variance of the deviance).
pub fn dic<M: BayesModel>(model: &M, draws: &DrawsMatrix) -> Result<DicResult> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let ll: Vec<f64> = draws.constrained.par_iter().map(|x| model.log_lik(x)).collect();
    let theta_bar = draws.constrained_mean()?;
    let ll_bar = model.log_lik(&theta_bar);
    if !ll_bar.is_finite() {
        log::warn!("posterior mean lies outside the likelihood support; DIC is not finite");
    }
    let m = mean(&ll);
    // population variance, so point masses give exactly 0
    let v = ll.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ll.len() as f64;
    let p1 = 2.0 * (ll_bar - m);
    let p2 = 2.0 * v;
    let psi2: Vec<f64> = ll.iter().map(|x| 2.0 * (x - m).powi(2)).collect();
    Ok(DicResult {
        dic_1: -2.0 * ll_bar + 2.0 * p1,
        dic_2: -2.0 * ll_bar + 2.0 * p2,
        p_dic_1: p1,
        p_dic_2: p2,
        mcse_p_dic_1: 2.0 * series_mcse(draws, &ll),
        mcse_p_dic_2: series_mcse(draws, &psi2),
        log_lik_at_mean: ll_bar,
        mean_log_lik: m,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub waic_1: f64,
    pub waic_2: f64,
    pub p_waic_1: f64,
    pub p_waic_2: f64,
    pub mcse_waic_1: f64,
    pub mcse_waic_2: f64,
    /// `log E[p(y_j | theta)]` for every observation.
    pub lppd: Vec<f64>,
}

/// WAIC from a pointwise log-likelihood matrix (rows = draws).
pub fn waic_from_matrix(ll: &[Vec<f64>], draws: &DrawsMatrix) -> Result<WaicResult> {
    if ll.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let n = ll[0].len();
    let s = ll.len() as f64;
    let mut lppd = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for j in 0..n {
        let col = column(ll, j);
        let m = mean(&col);
        lppd.push(log_mean_exp(&col));
        means.push(m);
        vars.push(col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s - 1.0).max(1.0));
    }
    let sum_lppd: f64 = lppd.iter().sum();
    let p1 = 2.0 * (sum_lppd - means.iter().sum::<f64>());
    let p2: f64 = vars.iter().sum();
    // per-draw influence of each estimator
    let mut psi1 = vec![0.0; ll.len()];
    let mut psi2 = vec![0.0; ll.len()];
    for (r, row) in ll.iter().enumerate() {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = 0.0;
        for j in 0..n {
            let ratio = (row[j] - lppd[j]).exp();
            if ratio.is_finite() {
                a += ratio - 1.0;
            }
            let d = row[j] - means[j];
            b += d;
            c += d * d - vars[j];
        }
        psi1[r] = 2.0 * a - 4.0 * b;
        psi2[r] = -2.0 * a + 2.0 * c;
    }
    Ok(WaicResult {
        waic_1: -2.0 * sum_lppd + 2.0 * p1,
        waic_2: -2.0 * sum_lppd + 2.0 * p2,
        p_waic_1: p1,
        p_waic_2: p2,
        mcse_waic_1: series_mcse(draws, &psi1),
        mcse_waic_2: series_mcse(draws, &psi2),
        lppd,
    })
}

pub fn waic<M: BayesModel>(model: &M, draws: &DrawsMatrix) -> Result<WaicResult> {
    waic_from_matrix(&pointwise_matrix(model, draws), draws)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooConfig {
    /// Sampler settings of the refits; warmup is halved and the full-data
    /// metric reused.
    pub hmc: HmcConfig,
    /// Largest dataset refitted exactly.
    pub max_n: usize,
}

impl Default for LooConfig {
    fn default() -> Self {
        Self { hmc: HmcConfig::default(), max_n: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub loocv: f64,
    pub beta: f64,
    /// `log E_{theta^{-j}}[p(y_j | theta^{-j})]` for every held-out `j`.
    pub elpd_pointwise: Vec<f64>,
    pub mcse: f64,
    pub refit_divergences: usize,
}

/// Exact leave-one-out cross-validation with the bias correction
/// `beta = lppd - (1/N) sum_k sum_j log E_{theta^{-k}}[p(y_j | theta^{-k})]`.
pub fn loocv_exact<M: BayesModel>(model: &M, full: &DrawsMatrix, cfg: &LooConfig) -> Result<LooResult> {
    let n = model.n_obs();
    if n < 3 {
        return Err(Error::DegenerateDataset(format!("leave-one-out needs at least 3 observations, got {n}")));
    }
    if n > cfg.max_n {
        return Err(Error::Config(format!("{n} observations exceed the exact leave-one-out cap of {}", cfg.max_n)));
    }
    if full.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let lppd_full: f64 = waic(model, full)?.lppd.iter().sum();
    let warm = warm_start_from(full);
    let center = warm.positions.first().cloned().unwrap_or_else(|| model.init_center());

    struct Refit {
        held_out: f64,
        held_out_mcse: f64,
        in_sample_total: f64,
        divergences: usize,
    }
    let refits: Vec<Refit> = (0..n)
        .into_par_iter()
        .map(|j| {
            let sub = model.leave_one_out(j);
            let mut hc = cfg.hmc.clone();
            hc.n_warmup /= 2;
            hc.stream = vec![domain::LOO, j as u64];
            let target = Tempered::posterior(&sub);
            let d = sample_density(&target, &hc, &center, Some(&warm), sub.param_names(), |u| sub.constrain(u))
                .map_err(|e| Error::RefitFailed { index: j, source: Box::new(e) })?;
            // every observation, including the held-out one, under this refit
            let ll = pointwise_matrix(model, &d);
            let held = column(&ll, j);
            let lp = log_mean_exp(&held);
            let ratio: Vec<f64> = held.iter().map(|x| (x - lp).exp()).collect();
            let total: f64 = (0..n).map(|i| log_mean_exp(&column(&ll, i))).sum();
            if !lp.is_finite() || !total.is_finite() {
                return Err(Error::RefitFailed {
                    index: j,
                    source: Box::new(Error::NoConvergence("non-finite predictive density".into())),
                });
            }
            Ok(Refit {
                held_out: lp,
                held_out_mcse: series_mcse(&d, &ratio),
                in_sample_total: total,
                divergences: d.diagnostics.divergences,
            })
        })
        .collect::<Result<_>>()?;
    let elpd: Vec<f64> = refits.iter().map(|r| r.held_out).collect();
    let beta = lppd_full - refits.iter().map(|r| r.in_sample_total).sum::<f64>() / n as f64;
    let loocv = -2.0 * elpd.iter().sum::<f64>() - 2.0 * beta;
    // delta method: d log m = dm / m, and the ratio series already divides by m
    let mcse = 2.0 * refits.iter().map(|r| r.held_out_mcse.powi(2)).sum::<f64>().sqrt();
    Ok(LooResult {
        loocv,
        beta,
        elpd_pointwise: elpd,
        mcse,
        refit_divergences: refits.iter().map(|r| r.divergences).sum(),
    })
}

/// Every criterion for one fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub k: usize,
    pub n: usize,
    pub max_log_lik: f64,
    pub aic: f64,
    pub bic: f64,
    pub dic_1: f64,
    pub dic_2: f64,
    pub waic_1: f64,
    pub waic_2: f64,
    pub loocv: Option<f64>,
    pub p_dic_1: f64,
    pub p_dic_2: f64,
    pub p_waic_1: f64,
    pub p_waic_2: f64,
    pub beta_loocv: Option<f64>,
    pub mcse_waic_1: f64,
    pub mcse_waic_2: f64,
    pub mcse_loocv: Option<f64>,
    /// Pointwise log predictive density `log E[p(y_j | theta)]`.
    pub per_observation: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Computes every criterion; LooCV only when `loo` is given.
pub fn criteria_report<M: BayesModel>(model: &M, draws: &DrawsMatrix, loo: Option<&LooConfig>) -> Result<CriteriaReport> {
    let k = model.dim();
    let n = model.n_obs();
    let mle = mle_fit(model, draws)?;
    let d = dic(model, draws)?;
    let w = waic(model, draws)?;
    let l = loo.map(|c| loocv_exact(model, draws, c)).transpose()?;
    let mut warnings = Vec::new();
    if !mle.improved {
        warnings.push("maximum likelihood search did not improve on the best draw".to_string());
    }
    if d.p_dic_1 < 0.0 {
        warnings.push(format!("negative p_DIC1 ({:.3})", d.p_dic_1));
    }
    if w.p_waic_1 < 0.0 {
        warnings.push(format!("negative p_WAIC1 ({:.3})", w.p_waic_1));
    }
    if !d.log_lik_at_mean.is_finite() {
        warnings.push("posterior mean outside the likelihood support".to_string());
    }
    Ok(CriteriaReport {
        k,
        n,
        max_log_lik: mle.max_log_lik,
        aic: aic(mle.max_log_lik, k),
        bic: bic(mle.max_log_lik, k, n),
        dic_1: d.dic_1,
        dic_2: d.dic_2,
        waic_1: w.waic_1,
        waic_2: w.waic_2,
        loocv: l.as_ref().map(|l| l.loocv),
        p_dic_1: d.p_dic_1,
        p_dic_2: d.p_dic_2,
        p_waic_1: w.p_waic_1,
        p_waic_2: w.p_waic_2,
        beta_loocv: l.as_ref().map(|l| l.beta),
        mcse_waic_1: w.mcse_waic_1,
        mcse_waic_2: w.mcse_waic_2,
        mcse_loocv: l.as_ref().map(|l| l.mcse),
        per_observation: w.lppd,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConjugateNormal;

    fn point_mass(mu: f64, n: usize) -> DrawsMatrix {
        let rows = vec![vec![mu]; n];
        DrawsMatrix {
            names: vec!["mu".into()],
            n_chains: 1,
            n_draws: n,
            constrained: rows.clone(),
            unconstrained: rows,
            log_post: vec![0.0; n],
            diagnostics: Default::default(),
        }
    }

    #[test]
    fn point_mass_has_no_effective_parameters() {
        let m = ConjugateNormal::new(vec![0.1, 0.5, -0.2, 0.3], 1.0, 0.0, 1.0).unwrap();
        let d = point_mass(0.25, 50);
        let dd = dic(&m, &d).unwrap();
        assert!(dd.p_dic_1.abs() < 1e-12);
        assert!(dd.p_dic_2.abs() < 1e-12);
        assert!((dd.dic_1 + 2.0 * m.log_lik(&[0.25])).abs() < 1e-12);
        let w = waic(&m, &d).unwrap();
        assert!(w.p_waic_1.abs() < 1e-12 && w.p_waic_2.abs() < 1e-12);
    }

    #[test]
    fn aic_minus_bic_identity() {
        for (k, n) in [(3, 10), (5, 250), (4, 7)] {
            let diff = aic(-12.3, k) - bic(-12.3, k, n);
            assert!((diff - (2.0 * k as f64 - k as f64 * (n as f64).ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn loocv_rejects_tiny_datasets() {
        let m = ConjugateNormal::new(vec![0.1, 0.5], 1.0, 0.0, 1.0).unwrap();
        let e = loocv_exact(&m, &point_mass(0.2, 10), &LooConfig::default()).unwrap_err();
        assert!(matches!(e, Error::DegenerateDataset(_)));
    }
}
