use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use thermodev::bma::*;
use thermodev::config::RunConfig;
use thermodev::curves::CurveFamily;
use thermodev::io::*;
use thermodev::model::ModelSpec;
use thermodev::obs::ObsFamily;
use thermodev::simulate::simulate_dataset;
use thermodev::Error;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("m{i}")).collect()
}

#[test]
fn bic_gap_of_two_log_nine() {
    let w = ic_weights(&names(2), &[100.0, 100.0 + 2.0 * 9f64.ln()], WeightSource::Bic).unwrap();
    assert!((w.weights[0] / w.weights[1] - 9.0).abs() < 1e-9);
}

#[test]
fn log_evidence_gap_gives_posterior_odds() {
    let w = evidence_weights(&names(2), &[-10.0 + 100f64.ln(), -10.0], None, WeightSource::Evidence).unwrap();
    assert!((w.weights[0] / w.weights[1] - 100.0).abs() < 1e-9);
    assert!(!w.diagnostic_only);
    let e = evidence_weights(&names(2), &[1.0, 2.0], None, WeightSource::ElboFr).unwrap();
    assert!(e.diagnostic_only);
}

#[test]
fn weights_are_invariant_to_score_shift() {
    let a = ic_weights(&names(3), &[10.0, 12.0, 15.0], WeightSource::Aic).unwrap();
    let b = ic_weights(&names(3), &[1e6 + 10.0, 1e6 + 12.0, 1e6 + 15.0], WeightSource::Aic).unwrap();
    for (x, y) in a.weights.iter().zip(&b.weights) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn mixture_mean_matches_weighted_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let per_model: Vec<ModelQuantities> = [(20.0, 1.0), (25.0, 0.5), (30.0, 2.0)]
        .iter()
        .enumerate()
        .map(|(i, &(mu, sd))| {
            let n = Normal::new(mu, sd).unwrap();
            ModelQuantities { model: format!("m{i}"), quantities: vec![("t_opt".into(), (0..4000).map(|_| n.sample(&mut rng)).collect())] }
        })
        .collect();
    let w = ic_weights(&names(3), &[10.0, 11.0, 12.0], WeightSource::Waic).unwrap();
    let rows = bma_summary(&w, &per_model, Some(20_000), 2).unwrap();
    let means: Vec<f64> = per_model.iter().map(|m| m.get("t_opt").unwrap().iter().sum::<f64>() / 4000.0).collect();
    let want: f64 = w.weights.iter().zip(&means).map(|(a, b)| a * b).sum();
    // mixture variance bounds the resampling error
    let var: f64 = w.weights.iter().zip([1.0f64, 0.5, 2.0]).zip(&means).map(|((wi, sd), m)| wi * (sd * sd + (m - want).powi(2))).sum();
    assert!((rows[0].mean - want).abs() < 4.0 * (var / 20_000.0).sqrt(), "{} vs {want}", rows[0].mean);
    assert_eq!(rows[0].n_pooled, 20_000);
    assert!(rows[0].q025 < rows[0].mean && rows[0].mean < rows[0].q975);
}

#[test]
fn undefined_draws_are_dropped_and_counted() {
    let per_model = vec![
        ModelQuantities { model: "a".into(), quantities: vec![("t_min".into(), vec![f64::NAN, f64::NAN, 9.0, 9.0])] },
        ModelQuantities { model: "b".into(), quantities: vec![("t_min".into(), vec![10.0; 4])] },
    ];
    let w = WeightVector { source: WeightSource::Bic, models: names(2), weights: vec![0.5, 0.5], diagnostic_only: false };
    let rows = bma_summary(&w, &per_model, Some(1000), 3).unwrap();
    assert!((rows[0].undefined_fraction - 0.25).abs() < 1e-12);
    assert!(rows[0].mean > 9.0 && rows[0].mean < 10.0);
}

#[test]
fn quantity_missing_from_weighted_model_is_an_error() {
    let per_model = vec![
        ModelQuantities { model: "a".into(), quantities: vec![("t_min".into(), vec![f64::NAN; 4])] },
        ModelQuantities { model: "b".into(), quantities: vec![("t_min".into(), vec![10.0; 4])] },
    ];
    let w = WeightVector { source: WeightSource::Bic, models: names(2), weights: vec![0.5, 0.5], diagnostic_only: false };
    assert!(matches!(bma_summary(&w, &per_model, None, 3), Err(Error::MissingQuantity { .. })));
}

#[test]
fn simulated_dataset_reloads_exactly() {
    let spec = ModelSpec::new(CurveFamily::Briere, ObsFamily::ZeroInflatedInverseGamma);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = simulate_dataset(&spec, &[-(1e-4f64).ln(), 9.0, 35.0, 10.0], &[10.0, 20.0, 30.0], 20, &mut rng).unwrap();
    assert!(data.rates().contains(&0.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset(&path, &data).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), data);
    // no temporary files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn bad_rows_are_reported_by_line() {
    for (text, line) in [
        ("temperature,rate\n10,0.1\n20,abc\n30,0.2\n", 3),
        ("temperature,rate\n10,0.1\n20,0.2\n30,-0.1\n", 4),
        ("temperature,rate\n10,0.1\n\n20,inf\n30,0.2\n", 4),
        ("temp,rate\n10,0.1\n", 1),
    ] {
        match parse_dataset(text) {
            Err(Error::Data { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(parse_dataset("temperature,rate\n10,0.1\n20,0.2\n"), Err(Error::DegenerateDataset(_))));
}

#[test]
fn tables_render_na_and_standard_errors() {
    let mut t = Table::new("compare", &["model", "AIC", "log_z (se)"]);
    t.push(vec![Cell::Text("briere/gaussian".into()), Cell::num(-12.5), Cell::WithSe(3.25, 0.5)]);
    t.push(vec![Cell::Text("lactin/gaussian".into()), Cell::Na, Cell::WithSe(f64::NAN, 0.1)]);
    t.notes.push("DIC = DIC_1".into());
    let j = t.to_json();
    assert_eq!(j["schema_version"], SCHEMA_VERSION);
    assert_eq!(j["rows"][0]["log_z (se)"]["se"], 0.5);
    assert_eq!(j["rows"][1]["AIC"], NA);
    assert_eq!(j["rows"][1]["log_z (se)"], NA);
    let text = t.to_text(2);
    assert!(text.contains("3.25 (0.50)") && text.contains("# DIC = DIC_1"));
    let dir = tempfile::tempdir().unwrap();
    t.write(dir.path()).unwrap();
    let back: serde_json::Value = read_json(&dir.path().join("compare.json")).unwrap();
    assert_eq!(back, j);
}

#[test]
fn config_round_trips_through_toml() {
    let text = r#"
seed = 17
data = "obs.csv"
output_dir = "out"

[[models]]
curve = "lactin"
obs = "zi_inverse_gamma"

[[models]]
curve = "briere"
obs = "gaussian"

[hmc]
n_draws = 500

[evidence]
rungs = 10
"#;
    let cfg = RunConfig::from_toml(text).unwrap();
    assert_eq!(cfg.seed, 17);
    assert_eq!(cfg.hmc_config().seed, 17);
    assert_eq!(cfg.hmc_config().n_draws, 500);
    let specs = cfg.model_specs().unwrap();
    assert_eq!(specs[0].label(), "lactin/zi_inverse_gamma");
    let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn config_rejects_unknown_keys_and_missing_seed() {
    assert!(matches!(RunConfig::from_toml("seed = 1\nsampler = 3\n"), Err(Error::Config(_))));
    assert!(matches!(RunConfig::from_toml("data = \"x.csv\"\n"), Err(Error::Config(_))));
}
