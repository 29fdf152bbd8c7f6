//! Effective sample size, split-R-hat, Monte Carlo standard errors and
//! posterior summaries.
//!
//! ESS follows the multi-chain estimator on split chains: autocorrelations
//! are combined across chains through the between/within variance, summed
//! in lag pairs until the first negative pair (Geyer's initial positive
//! sequence), and the pair sums are forced to be non-increasing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::DrawsMatrix;
use crate::error::{Error, Result};
use crate::model::BayesModel;
use crate::numeric::{mean, quantile, variance};

/// Halves every chain (dropping a middle draw when the length is odd).
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .filter(|c| !c.is_empty())
        .collect()
}

/// Biased autocovariance at `lag`.
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n - lag {
        s += (x[i] - m) * (x[i + lag] - m);
    }
    s / n as f64
}

/// Effective sample size of a quantity across chains.
///
/// Returns 0 for a constant series.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let parts = split(chains);
    ess_of_parts(&parts)
}

/// ESS of the given chains without splitting them.
pub fn ess_unsplit(chains: &[Vec<f64>]) -> f64 {
    let parts: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).filter(|c| !c.is_empty()).collect();
    ess_of_parts(&parts)
}

fn ess_of_parts(parts: &[&[f64]]) -> f64 {
    let m = parts.len();
    if m == 0 {
        return 0.0;
    }
    let n = parts.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 4 {
        return 0.0;
    }
    let parts: Vec<&[f64]> = parts.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    let acov0: Vec<f64> = parts.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, 0)).collect();
    let nf = n as f64;
    let mean_var = acov0.iter().map(|a| a * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += variance(&means);
    }
    if !(var_plus > 0.0) || !var_plus.is_finite() {
        log::warn!("constant series; ESS reported as 0");
        return 0.0;
    }
    let rho = |lag: usize| -> f64 {
        let acov_t = parts.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, lag)).sum::<f64>() / m as f64;
        1.0 - (mean_var - acov_t) / var_plus
    };

    // Geyer initial positive sequence over pairs (rho_{2k}, rho_{2k+1})
    let mut rhos = vec![1.0, rho(1)];
    let mut t = 2;
    while t + 1 < n - 3 {
        let a = rho(t);
        let b = rho(t + 1);
        if a + b < 0.0 {
            break;
        }
        rhos.push(a);
        rhos.push(b);
        t += 2;
    }
    // a negative first pair contributes nothing beyond lag 0 except its odd term
    let max_t = rhos.len();
    // initial monotone sequence
    let mut k = 2;
    while k + 1 < max_t {
        let prev = rhos[k - 2] + rhos[k - 1];
        if rhos[k] + rhos[k + 1] > prev {
            rhos[k] = prev / 2.0;
            rhos[k + 1] = prev / 2.0;
        }
        k += 2;
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rhos.iter().sum::<f64>()).max(1.0 / total.log10());
    total / tau
}

/// Split-R-hat; 1 at convergence.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let parts = split(chains);
    if parts.len() < 2 {
        return f64::NAN;
    }
    let n = parts.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = parts.iter().map(|c| mean(&c[..n])).collect();
    let w = parts.iter().map(|c| variance(&c[..n])).sum::<f64>() / parts.len() as f64;
    if w == 0.0 {
        return if variance(&means) == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + variance(&means);
    (var_plus / w).sqrt()
}

/// Monte Carlo standard error of the mean.
pub fn mcse_mean(chains: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = chains.concat();
    let e = ess(chains);
    if e <= 0.0 {
        return 0.0;
    }
    (variance(&all) / e).sqrt()
}

/// Monte Carlo standard error of the variance estimate, through the ESS of
/// the squared deviations.
pub fn mcse_var(chains: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = chains.concat();
    let mu = mean(&all);
    let sq: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| (x - mu).powi(2)).collect()).collect();
    mcse_mean(&sq)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
    pub ess: f64,
    pub rhat: f64,
    pub mcse: f64,
}

/// Summary of a named per-draw series.
pub fn summarize(name: &str, draws: &DrawsMatrix, series: &[f64]) -> ParamSummary {
    let chains = draws.split_by_chain(series);
    ParamSummary {
        name: name.to_string(),
        mean: mean(series),
        sd: variance(series).sqrt(),
        q025: quantile(series, 0.025),
        q500: quantile(series, 0.5),
        q975: quantile(series, 0.975),
        ess: ess(&chains),
        rhat: if draws.n_chains > 1 { split_rhat(&chains) } else { f64::NAN },
        mcse: mcse_mean(&chains),
    }
}

/// Summaries of every constrained parameter.
pub fn summarize_draws(draws: &DrawsMatrix) -> Vec<ParamSummary> {
    (0..draws.dim()).map(|j| summarize(&draws.names[j], draws, &draws.column(j))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevianceSummary {
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Deviance `-2 log p(y | theta)` at every draw.
pub fn deviance_draws<M: BayesModel>(model: &M, draws: &DrawsMatrix) -> Vec<f64> {
    draws.constrained.par_iter().map(|x| -2.0 * model.log_lik(x)).collect()
}

/// Posterior mean and 95% interval of the deviance.
pub fn deviance_summary<M: BayesModel>(model: &M, draws: &DrawsMatrix) -> Result<DevianceSummary> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let d = deviance_draws(model, draws);
    Ok(DevianceSummary { mean: mean(&d), q025: quantile(&d, 0.025), q975: quantile(&d, 0.975) })
}
