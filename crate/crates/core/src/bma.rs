//! Model weights and model-averaged summaries of the thermal quantities.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::CurveParams;
use crate::draws::DrawsMatrix;
use crate::error::{Error, Result};
use crate::model::{BayesModel, ModelSpec};
use crate::numeric::{mean, quantile_sorted};
use crate::rng::{domain, stream_rng};

/// Weights below this are treated as absent when checking for missing
/// quantities.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Aic,
    Bic,
    Dic,
    Waic,
    Loocv,
    Evidence,
    ElboMf,
    ElboFr,
}

impl WeightSource {
    pub const ALL: [WeightSource; 8] = [
        WeightSource::Aic,
        WeightSource::Dic,
        WeightSource::Loocv,
        WeightSource::Waic,
        WeightSource::Bic,
        WeightSource::Evidence,
        WeightSource::ElboMf,
        WeightSource::ElboFr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightSource::Aic => "aic",
            WeightSource::Bic => "bic",
            WeightSource::Dic => "dic",
            WeightSource::Waic => "waic",
            WeightSource::Loocv => "loocv",
            WeightSource::Evidence => "evidence",
            WeightSource::ElboMf => "elbo_mf",
            WeightSource::ElboFr => "elbo_fr",
        }
    }

    /// ELBO weights rank a lower bound, not the evidence.
    pub fn diagnostic_only(self) -> bool {
        matches!(self, WeightSource::ElboMf | WeightSource::ElboFr)
    }
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|w| w.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown weight source `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub source: WeightSource,
    pub models: Vec<String>,
    pub weights: Vec<f64>,
    pub diagnostic_only: bool,
}

impl WeightVector {
    pub fn argmax(&self) -> usize {
        self.weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
    }
}

/// `exp(x_i - max x) / sum_j exp(x_j - max x)`.
fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn check_scores(models: &[String], scores: &[f64]) -> Result<()> {
    if models.len() != scores.len() {
        return Err(Error::InvalidParams(format!("{} models but {} scores", models.len(), scores.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(i));
    }
    Ok(())
}

/// Weights `exp(-score_i / 2) / sum_j exp(-score_j / 2)` from criteria on
/// the deviance scale (lower is better).
pub fn ic_weights(models: &[String], scores: &[f64], source: WeightSource) -> Result<WeightVector> {
    check_scores(models, scores)?;
    if scores.len() < 2 {
        return Err(Error::InvalidParams("weights need at least two models".into()));
    }
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let x: Vec<f64> = scores.iter().map(|s| -0.5 * (s - min)).collect();
    Ok(WeightVector { source, models: models.to_vec(), weights: softmax(&x), diagnostic_only: source.diagnostic_only() })
}

/// Posterior model probabilities from log evidences and a model prior
/// (uniform when `None`).
pub fn evidence_weights(models: &[String], log_z: &[f64], prior: Option<&[f64]>, source: WeightSource) -> Result<WeightVector> {
    check_scores(models, log_z)?;
    let log_prior: Vec<f64> = match prior {
        Some(p) => {
            if p.len() != log_z.len() || p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || p.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidParams("model prior must be non-negative, finite and not all zero".into()));
            }
            p.iter().map(|v| v.ln()).collect()
        }
        None => vec![0.0; log_z.len()],
    };
    let x: Vec<f64> = log_z.iter().zip(&log_prior).map(|(z, p)| z + p).collect();
    Ok(WeightVector { source, models: models.to_vec(), weights: softmax(&x), diagnostic_only: source.diagnostic_only() })
}

/// Per-draw values of named quantities for one model; `NaN` marks a draw
/// where the quantity is undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelQuantities {
    pub model: String,
    pub quantities: Vec<(String, Vec<f64>)>,
}

impl ModelQuantities {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.quantities.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// `T_min`, `T_opt`, `T_max` and the deviance at every draw.
pub fn thermal_quantities<M: BayesModel>(spec: &ModelSpec, model: &M, draws: &DrawsMatrix) -> ModelQuantities {
    let n = spec.curve.n_params();
    let rows: Vec<[f64; 4]> = draws
        .constrained
        .par_iter()
        .map(|x| {
            let mut out = [f64::NAN; 4];
            if let Ok(c) = CurveParams::from_slice(spec.curve, &x[..n]) {
                if let Ok(th) = c.thermal_thresholds(None) {
                    out[0] = th.t_min.unwrap_or(f64::NAN);
                    out[2] = th.t_max;
                }
                out[1] = c.t_opt().unwrap_or(f64::NAN);
            }
            out[3] = -2.0 * model.log_lik(x);
            out
        })
        .collect();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    ModelQuantities {
        model: spec.label(),
        quantities: vec![
            ("t_min".into(), col(0)),
            ("t_opt".into(), col(1)),
            ("t_max".into(), col(2)),
            ("deviance".into(), col(3)),
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmaRow {
    pub quantity: String,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    /// Size of the pooled sample.
    pub n_pooled: usize,
    /// Pooled-weight share of draws where the quantity is undefined; those
    /// draws are left out of the pool.
    pub undefined_fraction: f64,
}

/// Largest-remainder allocation of `total` draws to `weights`.
fn allocate(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut n: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rest = total.saturating_sub(n.iter().sum());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    for &i in order.iter().cycle().take(weights.len() * 2) {
        if rest == 0 {
            break;
        }
        if weights[i] > 0.0 {
            n[i] += 1;
            rest -= 1;
        }
    }
    n
}

/// Mixture summaries: each model contributes a share of the pooled sample
/// proportional to its weight, drawn with replacement from its defined
/// draws (or taken whole when its share equals its draw count, so a
/// degenerate weight vector reproduces that model's own summary).
/// `total` defaults to the draw count of the highest-weight model.
pub fn bma_summary(weights: &WeightVector, per_model: &[ModelQuantities], total: Option<usize>, seed: u64) -> Result<Vec<BmaRow>> {
    if per_model.len() != weights.weights.len() {
        return Err(Error::InvalidParams(format!("{} weights for {} models", weights.weights.len(), per_model.len())));
    }
    let Some(first) = per_model.first() else {
        return Err(Error::EmptyDraws);
    };
    let top = weights.argmax();
    let mut rows = Vec::new();
    for (qi, (name, _)) in first.quantities.iter().enumerate() {
        // defined draws per model; models with negligible weight may lack them
        let mut pools: Vec<Vec<f64>> = Vec::with_capacity(per_model.len());
        let mut w = Vec::with_capacity(per_model.len());
        let mut undefined = 0.0;
        for (m, &wi) in per_model.iter().zip(&weights.weights) {
            let vals: Vec<f64> = m.get(name).map(|v| v.iter().copied().filter(|x| x.is_finite()).collect()).unwrap_or_default();
            let len = m.get(name).map_or(0, |v| v.len());
            if vals.is_empty() {
                if wi > NEGLIGIBLE_WEIGHT {
                    return Err(Error::MissingQuantity { model: m.model.clone(), quantity: name.clone(), weight: wi });
                }
                w.push(0.0);
            } else {
                undefined += wi * (len - vals.len()) as f64 / len as f64;
                w.push(wi);
            }
            pools.push(vals);
        }
        let s: f64 = w.iter().sum();
        if !(s > 0.0) {
            return Err(Error::MissingQuantity { model: per_model[top].model.clone(), quantity: name.clone(), weight: 0.0 });
        }
        w.iter_mut().for_each(|v| *v /= s);
        let total = total.unwrap_or(pools[top].len()).max(1);
        let counts = allocate(&w, total);
        let mut rng = stream_rng(seed, &[domain::RESAMPLE, qi as u64]);
        let mut pooled = Vec::with_capacity(total);
        for (pool, &c) in pools.iter().zip(&counts) {
            if c == 0 {
                continue;
            }
            if c == pool.len() {
                pooled.extend_from_slice(pool);
            } else {
                pooled.extend((0..c).map(|_| pool[rng.random_range(0..pool.len())]));
            }
        }
        let mu = mean(&pooled);
        pooled.sort_by(f64::total_cmp);
        rows.push(BmaRow {
            quantity: name.clone(),
            mean: mu,
            q025: quantile_sorted(&pooled, 0.025),
            q975: quantile_sorted(&pooled, 0.975),
            n_pooled: pooled.len(),
            undefined_fraction: undefined,
        });
    }
    Ok(rows)
}
