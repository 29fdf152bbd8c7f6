//! Criteria and evidence estimators against the conjugate normal-mean
//! model's closed forms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use thermodev::criteria::*;
use thermodev::draws::DrawsMatrix;
use thermodev::evidence::*;
use thermodev::hmc::{hmc_sample, HmcConfig};
use thermodev::model::{BayesModel, ConjugateNormal, Split};
use thermodev::Result;

fn conjugate(n: usize, seed: u64) -> ConjugateNormal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.3, 1.0).unwrap();
    ConjugateNormal::new((0..n).map(|_| noise.sample(&mut rng)).collect(), 1.0, 0.0, 1.0).unwrap()
}

fn posterior(m: &ConjugateNormal, seed: u64) -> DrawsMatrix {
    hmc_sample(m, &HmcConfig { n_draws: 2500, seed, ..Default::default() }).unwrap()
}

#[test]
fn dic_penalties_match_shrinkage() {
    let m = conjugate(50, 3);
    let d = posterior(&m, 4);
    let r = dic(&m, &d).unwrap();
    let s = m.shrinkage();
    assert!((r.p_dic_1 - s).abs() <= 3.0 * r.mcse_p_dic_1, "{} vs {s}", r.p_dic_1);
    assert!((r.p_dic_2 - s).abs() <= 3.0 * r.mcse_p_dic_2, "{} vs {s}", r.p_dic_2);
    assert!(r.p_dic_1 >= 0.0);
}

#[test]
fn exact_loo_matches_closed_form() {
    let m = conjugate(20, 5);
    let d = posterior(&m, 6);
    let cfg = LooConfig { hmc: HmcConfig { n_draws: 1000, seed: 7, ..Default::default() }, max_n: 500 };
    let loo = loocv_exact(&m, &d, &cfg).unwrap();
    let exact = m.loo_predictive();
    let got: f64 = loo.elpd_pointwise.iter().sum();
    let want: f64 = exact.iter().sum();
    // the pointwise errors are independent across refits
    assert!((got - want).abs() <= 3.0 * loo.mcse / 2.0, "{got} vs {want} (mcse {})", loo.mcse);
    for (g, w) in loo.elpd_pointwise.iter().zip(&exact) {
        assert!((g - w).abs() < 0.02, "{g} vs {w}");
    }
}

#[test]
fn loo_bias_correction_shrinks_with_n() {
    let cfg = LooConfig { hmc: HmcConfig { n_warmup: 400, n_draws: 400, seed: 8, ..Default::default() }, max_n: 500 };
    let beta: Vec<f64> = [20, 50, 100]
        .iter()
        .map(|&n| {
            let m = conjugate(n, 9);
            loocv_exact(&m, &posterior(&m, 10), &cfg).unwrap().beta.abs()
        })
        .collect();
    assert!(beta[0] > beta[2], "{beta:?}");
}

#[test]
fn criteria_are_permutation_invariant() {
    let m = conjugate(30, 11);
    let d = posterior(&m, 12);
    let mut y = m.y.clone();
    y.reverse();
    y.swap(0, 7);
    let p = ConjugateNormal::new(y, m.sigma, m.m0, m.tau).unwrap();
    let a = criteria_report(&m, &d, None).unwrap();
    let b = criteria_report(&p, &d, None).unwrap();
    for (x, y) in [(a.aic, b.aic), (a.bic, b.bic), (a.dic_1, b.dic_1), (a.dic_2, b.dic_2), (a.waic_1, b.waic_1), (a.waic_2, b.waic_2)] {
        assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
    }
}

/// `y = a + b x + N(0, sigma^2)` with flat priors; the unconstrained
/// coordinates are `(a, b, ln sigma)`.
struct LinearMean {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl BayesModel for LinearMean {
    fn dim(&self) -> usize {
        3
    }

    fn param_names(&self) -> Vec<String> {
        vec!["a".into(), "b".into(), "sigma".into()]
    }

    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        vec![u[0], u[1], u[2].exp()]
    }

    fn unconstrain(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![x[0], x[1], x[2].ln()])
    }

    fn eval(&self, u: &[f64]) -> Split {
        Split { log_prior: u[2], log_lik: self.log_lik(&self.constrain(u)) }
    }

    fn eval_grad(&self, u: &[f64], g_prior: &mut [f64], g_lik: &mut [f64]) -> Split {
        let s2 = (2.0 * u[2]).exp();
        g_prior.copy_from_slice(&[0.0, 0.0, 1.0]);
        g_lik.fill(0.0);
        for (&x, &y) in self.x.iter().zip(&self.y) {
            let r = y - u[0] - u[1] * x;
            g_lik[0] += r / s2;
            g_lik[1] += r * x / s2;
            g_lik[2] += r * r / s2 - 1.0;
        }
        self.eval(u)
    }

    fn pointwise_log_lik(&self, p: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(&x, &y)| {
                let z = (y - p[0] - p[1] * x) / p[2];
                -0.5 * z * z - p[2].ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .collect()
    }

    fn leave_one_out(&self, index: usize) -> Self {
        let (mut x, mut y) = (self.x.clone(), self.y.clone());
        x.remove(index);
        y.remove(index);
        Self { x, y }
    }
}

#[test]
fn maximum_likelihood_matches_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let x: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
    let y: Vec<f64> = x.iter().map(|x| 1.5 - 0.4 * x + noise.sample(&mut rng)).collect();
    let m = LinearMean { x: x.clone(), y: y.clone() };
    let d = hmc_sample(&m, &HmcConfig { n_warmup: 500, n_draws: 300, n_chains: 2, seed: 14, ..Default::default() }).unwrap();
    let fit = mle_fit(&m, &d).unwrap();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(&y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let want = [a, b, (rss / n).sqrt()];
    for (got, want) in fit.theta.iter().zip(want) {
        assert!(((got - want) / want).abs() <= 1e-6, "{got} vs {want}");
    }
    assert!(fit.improved);
}

#[test]
fn gaussian_deviance_at_truth() {
    let m = conjugate(25, 15);
    let mu = 0.3;
    let ss: f64 = m.y.iter().map(|y| (y - mu).powi(2)).sum();
    let want = 25.0 * (2.0 * std::f64::consts::PI).ln() + ss;
    assert!((-2.0 * m.log_lik(&[mu]) - want).abs() < 1e-10);
}

#[test]
fn power_posterior_on_fine_ladder() {
    let m = conjugate(50, 16);
    let cfg = PowerPosteriorConfig {
        ladder: TemperatureLadder::power(20, 5.0),
        hmc: HmcConfig { n_warmup: 500, n_draws: 1000, seed: 17, ..Default::default() },
        ..Default::default()
    };
    let e = power_posterior_evidence(&m, &cfg).unwrap();
    let exact = m.log_evidence();
    assert!((e.log_z - exact).abs() <= (3.0 * e.se).max(0.05), "{} ({}) vs {exact}", e.log_z, e.se);
    let EvidenceDiagnostics::PowerPosterior { monotone, t_values, .. } = e.diagnostics else { panic!() };
    assert!(monotone);
    assert_eq!(t_values.len(), 21);
}

#[test]
fn corrected_rule_is_closer_on_coarse_ladder() {
    let m = conjugate(50, 16);
    let exact = m.log_evidence();
    let run = |rule| {
        let cfg = PowerPosteriorConfig {
            ladder: TemperatureLadder::power(8, 5.0),
            hmc: HmcConfig { n_warmup: 500, n_draws: 1000, seed: 18, ..Default::default() },
            rule,
        };
        (power_posterior_evidence(&m, &cfg).unwrap().log_z - exact).abs()
    };
    assert!(run(IntegrationRule::CorrectedTrapezoid) < run(IntegrationRule::Trapezoid));
}

#[test]
fn importance_sampling_recovers_evidence() {
    let m = conjugate(50, 19);
    let d = posterior(&m, 20);
    let e = importance_evidence(&m, &d, None, 10_000, 21).unwrap();
    assert!((e.log_z - m.log_evidence()).abs() <= (3.0 * e.se).max(0.1));
    let EvidenceDiagnostics::Importance { max_weight, .. } = e.diagnostics else { panic!() };
    assert!(max_weight < 0.1, "{max_weight}");
}

#[test]
fn bridge_sampling_recovers_evidence() {
    let m = conjugate(50, 22);
    let d = posterior(&m, 23);
    for warp3 in [false, true] {
        let e = bridge_evidence(&m, &d, &BridgeConfig { warp3, seed: 24, ..Default::default() }).unwrap();
        assert!((e.log_z - m.log_evidence()).abs() <= (3.0 * e.se).max(0.05), "warp3 {warp3}: {}", e.log_z);
    }
}

#[test]
fn bridge_autocorrelation_factor_is_one_for_iid_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let z = Normal::new(0.0, 1.0).unwrap();
    let n = 4000;
    let l1: Vec<f64> = (0..n).map(|_| 0.3 * z.sample(&mut rng)).collect();
    let l2: Vec<f64> = (0..n).map(|_| 0.3 * z.sample(&mut rng)).collect();
    let est = DrawsMatrix {
        names: vec!["x".into()],
        n_chains: 4,
        n_draws: n / 4,
        constrained: vec![vec![0.0]; n],
        unconstrained: vec![vec![0.0]; n],
        log_post: vec![0.0; n],
        diagnostics: Default::default(),
    };
    let (_, rho) = bridge_re2(&l1, &l2, 0.0, &est);
    assert!((rho - 1.0).abs() <= 0.1, "{rho}");
}

#[test]
fn analytic_evidence_requires_closed_form() {
    let m = conjugate(10, 26);
    assert_eq!(analytic_evidence(&m).unwrap().log_z, m.log_evidence());
    let lin = LinearMean { x: vec![0.0, 1.0, 2.0], y: vec![0.1, 0.2, 0.4] };
    assert!(matches!(analytic_evidence(&lin), Err(thermodev::Error::NotConjugate)));
}
