use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use thermodev::config::RunConfig;
use thermodev::io::load_dataset;
use thermodev_cli::commands::*;
use thermodev_cli::{exit_code, EXIT_NUMERICAL, EXIT_VALIDATION};

const SMALL: &str = r#"
[hmc]
n_warmup = 200
n_draws = 150
n_chains = 2

[advi]
max_iter = 400
output_draws = 100

[evidence]
rungs = 4
n_is = 1000

[evidence.rung_hmc]
n_warmup = 150
n_draws = 150
n_chains = 1

[loo]
enabled = false

[ppc]
lo = 10.0
hi = 34.0
step = 4.0
"#;

fn config(dir: &Path, models: &[(&str, &str)]) -> PathBuf {
    let mut text = String::from("seed = 3\n");
    text.push_str(&format!("data = {:?}\n", dir.join("sim").join("data.csv")));
    for (curve, obs) in models {
        text.push_str(&format!("\n[[models]]\ncurve = \"{curve}\"\nobs = \"{obs}\"\n"));
    }
    text.push_str("\n[simulate]\ntruth = [9.2103, 9.0, 35.0, 10.0]\ntemperatures = [12.0, 16.0, 20.0, 24.0, 28.0, 32.0]\nn_per_temp = 5\n");
    text.push_str(SMALL);
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermodev"))
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate(dir: &Path, cfg: &Path) -> PathBuf {
    let sim = dir.join("sim");
    assert_eq!(run(&["simulate", "--config", s(cfg), "--out", s(&sim)]), 0);
    sim.join("data.csv")
}

#[test]
fn simulate_fit_and_rerun_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = config(tmp.path(), &[("briere", "inverse_gamma")]);
    let data = simulate(tmp.path(), &cfg_path);
    let d = load_dataset(&data).unwrap();
    assert_eq!(d.len(), 30);

    // the same seed through the library gives the same file
    let mut cfg = RunConfig::load(&cfg_path).unwrap();
    cfg.output_dir = Some(tmp.path().join("sim2"));
    let again = cmd_simulate(&cfg).unwrap();
    assert_eq!(fs::read(&data).unwrap(), fs::read(again).unwrap());

    let out = tmp.path().join("fit");
    assert_eq!(run(&["fit", "--config", s(&cfg_path), "--out", s(&out)]), 0);
    let model = out.join("briere_inverse_gamma");
    let first = fs::read(model.join("draws.json")).unwrap();
    for f in ["spec.json", "data.csv", "posterior.json", "posterior.txt", CONFIG_ECHO, MANIFEST] {
        assert!(model.join(f).exists(), "{f}");
    }
    assert!(out.join(MANIFEST).exists() && out.join(CONFIG_ECHO).exists());
    let post = json(&model.join("posterior.json"));
    let names: Vec<&str> = post["rows"].as_array().unwrap().iter().map(|r| r["quantity"].as_str().unwrap()).collect();
    assert!(names.contains(&"t_opt"), "{names:?}");

    // a rerun with one worker thread rewrites identical bytes
    assert_eq!(run(&["fit", "--config", s(&cfg_path), "--out", s(&out), "--threads", "1"]), 0);
    assert_eq!(first, fs::read(model.join("draws.json")).unwrap());

    // the echoed config alone reproduces the run
    let echo = RunConfig::load(&model.join(CONFIG_ECHO)).unwrap();
    assert_eq!(echo.seed, 3);
    assert_eq!(echo.hmc.n_draws, 150);
}

#[test]
fn compare_then_average() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = config(tmp.path(), &[("briere", "inverse_gamma"), ("briere", "gaussian")]);
    simulate(tmp.path(), &cfg_path);
    let out = tmp.path().join("cmp");
    assert_eq!(run(&["compare", "--config", s(&cfg_path), "--out", s(&out)]), 0);

    let table = json(&out.join("compare.json"));
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for col in ["AIC", "DIC", "LooCV", "WAIC", "BIC", "log_z_is (se)", "log_z_pp (se)", "log_z_bs (se)"] {
        assert!(rows[0].get(col).is_some(), "{col}");
    }
    // LOO was disabled
    assert_eq!(rows[0]["LooCV"], thermodev::io::NA);
    assert!(rows[0]["log_z_bs (se)"]["se"].as_f64().unwrap() >= 0.0);
    assert!(out.join("compare.txt").exists() && out.join("compare_detail.json").exists());

    let bma_out = tmp.path().join("bma");
    assert_eq!(run(&["bma", s(&out), "--out", s(&bma_out)]), 0);
    let w = json(&bma_out.join("weights.json"));
    let wrows = w["rows"].as_array().unwrap();
    assert_eq!(wrows.len(), 2);
    let total: f64 = wrows.iter().map(|r| r["bic_w"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let bma = json(&bma_out.join("bma.json"));
    assert!(bma["rows"].as_array().unwrap().iter().any(|r| r["quantity"] == "t_opt"));
}

#[test]
fn zero_inflated_ppc_reports_nonzero_probability() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = config(tmp.path(), &[("briere", "zi_inverse_gamma")]);
    simulate(tmp.path(), &cfg_path);
    let out = tmp.path().join("fit");
    assert_eq!(run(&["fit", "--config", s(&cfg_path), "--out", s(&out)]), 0);
    let model = out.join("briere_zi_inverse_gamma");
    let ppc = tmp.path().join("ppc");
    assert_eq!(run(&["ppc", s(&model), "--out", s(&ppc)]), 0);
    let t = json(&ppc.join("ppc.json"));
    let rows = t["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for r in rows {
        let p = r["one_minus_p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn bad_inputs_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = config(tmp.path(), &[("briere", "gaussian")]);
    // dataset does not exist yet
    assert_eq!(run(&["fit", "--config", s(&cfg_path), "--out", s(&tmp.path().join("o"))]), EXIT_VALIDATION);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "temperature,rate\n10,0.1\n20,oops\n30,0.2\n").unwrap();
    let o = bin().args(["fit", "--config", s(&cfg_path), "--data", s(&bad), "--out", s(&tmp.path().join("o"))]).output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let unknown = tmp.path().join("unknown.toml");
    fs::write(&unknown, "seed = 1\nsampler = \"nuts\"\n").unwrap();
    assert_eq!(run(&["fit", "--config", s(&unknown)]), EXIT_VALIDATION);
    // no config and no seed
    assert_eq!(run(&["simulate", "--out", s(&tmp.path().join("o"))]), EXIT_VALIDATION);
    // bma before compare
    assert_eq!(run(&["bma", s(tmp.path()), "--seed", "1"]), EXIT_VALIDATION);
}

#[test]
fn numerical_failures_map_to_their_own_code() {
    assert_eq!(exit_code(&thermodev::Error::Initialization { chain: 0, tries: 100 }), EXIT_NUMERICAL);
    assert_eq!(exit_code(&thermodev::Error::Config("x".into())), EXIT_VALIDATION);
}
