//! Synthetic datasets and posterior-predictive bands.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::draws::DrawsMatrix;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numeric::{mean, quantile};
use crate::obs::{sample_obs, zero_prob, ObsParams};
use crate::rng::{domain, stream_rng};

/// Draws `n_per_temp` observations at each temperature from the model at
/// constrained parameters `truth`. Gaussian draws are kept as drawn, so they
/// can fall outside `[0, 1]`.
pub fn simulate_dataset<R: Rng + ?Sized>(
    spec: &ModelSpec,
    truth: &[f64],
    temperatures: &[f64],
    n_per_temp: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let (curve, obs) = spec.split_params(truth)?;
    curve.validate(&spec.curve_options)?;
    obs.validate()?;
    let mut ts = Vec::with_capacity(temperatures.len() * n_per_temp);
    let mut ys = Vec::with_capacity(ts.capacity());
    for &t in temperatures {
        let r = curve.rate(t)?;
        for _ in 0..n_per_temp {
            let y = sample_obs(rng, &obs, r).map_err(|e| match e {
                Error::InvalidScale { .. } => Error::InvalidScale { temperature: t },
                other => other,
            })?;
            ts.push(t);
            ys.push(y);
        }
    }
    Dataset::new(ts, ys)
}

/// Predictive summary at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRow {
    pub temperature: f64,
    /// Posterior mean of the curve `r(T)`.
    pub rate_mean: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
    /// Posterior mean of `1 - p(T)` for zero-inflated models.
    pub nonzero_prob: Option<f64>,
}

/// Simulates one observation per draw at every grid temperature and
/// summarizes the simulated values. For the inverse-gamma families a draw
/// whose curve is non-positive at `T` predicts no development (`y = 0`).
pub fn posterior_predictive(spec: &ModelSpec, draws: &DrawsMatrix, grid: &[f64], seed: u64) -> Result<Vec<PredictiveRow>> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let params: Vec<_> = draws.constrained.iter().map(|x| spec.split_params(x)).collect::<Result<_>>()?;
    grid.par_iter()
        .enumerate()
        .map(|(gi, &t)| {
            let mut rng = stream_rng(seed, &[domain::PREDICTIVE, gi as u64]);
            let mut ys = Vec::with_capacity(params.len());
            let mut rates = Vec::with_capacity(params.len());
            let mut nonzero = Vec::new();
            for (curve, obs) in &params {
                let r = curve.rate(t)?;
                rates.push(r);
                if let ObsParams::ZeroInflatedInverseGamma(z) = obs {
                    nonzero.push(1.0 - zero_prob(r, z.c, z.k));
                }
                let y = match obs {
                    ObsParams::Gaussian(_) => sample_obs(&mut rng, obs, r)?,
                    _ if r <= 0.0 => 0.0,
                    _ => sample_obs(&mut rng, obs, r)?,
                };
                ys.push(y);
            }
            Ok(PredictiveRow {
                temperature: t,
                rate_mean: mean(&rates),
                q025: quantile(&ys, 0.025),
                q500: quantile(&ys, 0.5),
                q975: quantile(&ys, 0.975),
                nonzero_prob: (!nonzero.is_empty()).then(|| mean(&nonzero)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::CurveFamily;
    use crate::obs::ObsFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_reproduces_curve() {
        let spec = ModelSpec::new(CurveFamily::Briere, ObsFamily::Gaussian);
        let truth = [-(1e-4f64).ln(), 8.0, 36.0, 0.0];
        // sigma = 0 is outside the sampled support but a valid limit for simulation
        let (curve, _) = spec.split_params(&truth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = ObsParams::new(ObsFamily::Gaussian, 0.0, spec.zi);
        for t in [10.0, 20.0, 30.0] {
            let r = curve.rate(t).unwrap();
            assert_eq!(sample_obs(&mut rng, &obs, r).unwrap(), r);
        }
    }

    #[test]
    fn simulation_is_seeded() {
        let spec = ModelSpec::new(CurveFamily::Briere, ObsFamily::InverseGamma);
        let truth = [-(1e-4f64).ln(), 8.0, 36.0, 10.0];
        let a = simulate_dataset(&spec, &truth, &[15.0, 25.0], 5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = simulate_dataset(&spec, &truth, &[15.0, 25.0], 5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn invalid_scale_names_temperature() {
        let spec = ModelSpec::new(CurveFamily::Briere, ObsFamily::InverseGamma);
        let truth = [-(1e-4f64).ln(), 8.0, 36.0, 10.0];
        let e = simulate_dataset(&spec, &truth, &[40.0], 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap_err();
        assert!(matches!(e, Error::InvalidScale { temperature } if temperature == 40.0));
    }
}
