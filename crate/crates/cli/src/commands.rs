//! The six subcommands. Each writes its artifacts into an output directory
//! together with an echo of the run configuration and a manifest; all files
//! are written atomically and depend only on the configuration, the data
//! and the seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thermodev::advi::{advi_fit, FamilyKind};
use thermodev::bma::{bma_summary, evidence_weights, ic_weights, thermal_quantities, ModelQuantities, WeightSource, WeightVector};
use thermodev::config::RunConfig;
use thermodev::criteria::{criteria_report, CriteriaReport};
use thermodev::data::Dataset;
use thermodev::diagnostics::{summarize, ParamSummary};
use thermodev::draws::DrawsMatrix;
use thermodev::evidence::{bridge_evidence, importance_evidence, power_posterior_evidence, EvidenceEstimate, EvidenceMethod};
use thermodev::hmc::hmc_sample;
use thermodev::io::{atomic_write, load_dataset, read_json, write_dataset, write_json, Cell, Table, SCHEMA_VERSION};
use thermodev::model::{EcoModel, ModelSpec};
use thermodev::numeric::{mean, quantile, variance};
use thermodev::obs::ObsFamily;
use thermodev::rng::{domain, stream_rng};
use thermodev::simulate::{posterior_predictive, simulate_dataset};
use thermodev::{Error, Result};

pub const CONFIG_ECHO: &str = "config.toml";
pub const MANIFEST: &str = "manifest.json";
pub const COMPARISON: &str = "comparison.json";

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> RunConfig {
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// How component streams derive from the seed.
    pub streams: Vec<(String, String)>,
    pub models: Vec<String>,
    pub files: Vec<String>,
}

fn manifest(cmd: &str, cfg: &RunConfig, models: Vec<String>, files: Vec<String>) -> Manifest {
    let s = |name: &str, path: String| (name.to_string(), path);
    Manifest {
        schema_version: SCHEMA_VERSION,
        command: cmd.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        streams: vec![
            s("hmc chain c", format!("[{}, c]", domain::CHAIN)),
            s("power-posterior rung k, chain c", format!("[{}, k, {}, c]", domain::RUNG, domain::CHAIN)),
            s("loo refit j, chain c", format!("[{}, j, {}, c]", domain::LOO, domain::CHAIN)),
            s("importance sampling", format!("[{}]", domain::IMPORTANCE)),
            s("bridge sampling", format!("[{}]", domain::BRIDGE)),
            s("bma resampling of quantity q", format!("[{}, q]", domain::RESAMPLE)),
            s("advi", format!("[{}, ..]", domain::ADVI)),
            s("simulation", format!("[{}]", domain::SIMULATE)),
            s("posterior predictive at grid point g", format!("[{}, g]", domain::PREDICTIVE)),
        ],
        models,
        files,
    }
}

fn write_provenance(dir: &Path, cmd: &str, cfg: &RunConfig, models: Vec<String>, files: Vec<String>) -> Result<()> {
    atomic_write(&dir.join(CONFIG_ECHO), cfg.to_toml()?.as_bytes())?;
    write_json(&dir.join(MANIFEST), &manifest(cmd, cfg, models, files))
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.output_dir.clone().ok_or_else(|| Error::Config("no output directory: set `output_dir` or pass --out".into()))
}

fn dataset(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.data.as_ref().ok_or_else(|| Error::Config("no dataset: set `data` or pass --data".into()))?;
    load_dataset(path)
}

fn specs(cfg: &RunConfig) -> Result<Vec<ModelSpec>> {
    let specs = cfg.model_specs()?;
    if specs.is_empty() {
        return Err(Error::Config("no models configured: add at least one [[models]] entry".into()));
    }
    Ok(specs)
}

/// Directory name of a model, e.g. `briere_inverse_gamma`.
pub fn model_dir_name(spec: &ModelSpec) -> String {
    format!("{}_{}", spec.curve, spec.obs)
}

// ---------------------------------------------------------------- fit

/// Summary of a per-draw series that may be undefined on some draws.
fn summarize_partial(name: &str, draws: &DrawsMatrix, series: &[f64]) -> (ParamSummary, f64) {
    let defined: Vec<f64> = series.iter().copied().filter(|v| v.is_finite()).collect();
    let undefined = 1.0 - defined.len() as f64 / series.len().max(1) as f64;
    if defined.len() == series.len() {
        return (summarize(name, draws, series), 0.0);
    }
    let nan = f64::NAN;
    let s = if defined.is_empty() {
        ParamSummary { name: name.into(), mean: nan, sd: nan, q025: nan, q500: nan, q975: nan, ess: nan, rhat: nan, mcse: nan }
    } else {
        ParamSummary {
            name: name.into(),
            mean: mean(&defined),
            sd: variance(&defined).sqrt(),
            q025: quantile(&defined, 0.025),
            q500: quantile(&defined, 0.5),
            q975: quantile(&defined, 0.975),
            ess: nan,
            rhat: nan,
            mcse: nan,
        }
    };
    (s, undefined)
}

fn posterior_table(spec: &ModelSpec, model: &EcoModel, draws: &DrawsMatrix) -> Table {
    let mut t = Table::new("posterior", &["quantity", "mean", "sd", "q025", "q500", "q975", "ess", "rhat", "undefined"]);
    let mut push = |s: ParamSummary, und: f64| {
        t.push(vec![
            Cell::Text(s.name),
            Cell::num(s.mean),
            Cell::num(s.sd),
            Cell::num(s.q025),
            Cell::num(s.q500),
            Cell::num(s.q975),
            Cell::num(s.ess),
            Cell::num(s.rhat),
            Cell::num(und),
        ])
    };
    for j in 0..draws.dim() {
        push(summarize(&draws.names[j], draws, &draws.column(j)), 0.0);
    }
    for (name, series) in thermal_quantities(spec, model, draws).quantities {
        let (s, und) = summarize_partial(&name, draws, &series);
        push(s, und);
    }
    t.notes.push(format!("model {}; {} chains x {} draws", spec.label(), draws.n_chains, draws.n_draws));
    t.notes.push(format!("divergences after warmup: {}", draws.diagnostics.divergences));
    t.notes.extend(draws.diagnostics.warnings.iter().cloned());
    t
}

/// Samples one model and writes its artifact directory.
fn fit_one(cfg: &RunConfig, spec: &ModelSpec, data: &Dataset, dir: &Path) -> Result<(EcoModel, DrawsMatrix)> {
    spec.check_dataset(data)?;
    let model = EcoModel::new(spec.clone(), data.clone())?;
    log::info!("sampling {}", spec.label());
    let draws = hmc_sample(&model, &cfg.hmc_config())?;
    write_json(&dir.join("spec.json"), spec)?;
    write_dataset(&dir.join("data.csv"), data)?;
    write_json(&dir.join("draws.json"), &draws)?;
    posterior_table(spec, &model, &draws).write(dir)?;
    write_provenance(dir, "fit", cfg, vec![spec.label()], vec!["spec.json".into(), "data.csv".into(), "draws.json".into(), "posterior.json".into()])?;
    Ok((model, draws))
}

/// Fits every configured model; returns one artifact directory per model.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = output_dir(cfg)?;
    let data = dataset(cfg)?;
    let specs = specs(cfg)?;
    let mut dirs = Vec::new();
    for spec in &specs {
        let dir = out.join(model_dir_name(spec));
        fit_one(cfg, spec, &data, &dir)?;
        dirs.push(dir);
    }
    write_provenance(&out, "fit", cfg, specs.iter().map(ModelSpec::label).collect(), dirs.iter().map(|d| rel(&out, d)).collect())?;
    Ok(dirs)
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
}

/// A fitted model read back from its artifact directory.
pub struct FitArtifact {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub draws: DrawsMatrix,
}

pub fn load_fit(dir: &Path) -> Result<FitArtifact> {
    let need = |f: &str| {
        let p = dir.join(f);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::Config(format!("`{}` is not a fit directory: {f} is missing (run `fit` first)", dir.display())))
        }
    };
    Ok(FitArtifact {
        spec: read_json(&need("spec.json")?)?,
        data: load_dataset(&need("data.csv")?)?,
        draws: read_json(&need("draws.json")?)?,
    })
}

// ---------------------------------------------------------------- evidence

/// One estimate per configured method; failures are kept as messages.
fn evidence_for(cfg: &RunConfig, model: &EcoModel, draws: &DrawsMatrix) -> Result<Vec<(EvidenceMethod, std::result::Result<EvidenceEstimate, String>)>> {
    let pp = cfg.power_posterior_config()?;
    let bridge = cfg.bridge_config();
    Ok(cfg
        .evidence
        .methods
        .iter()
        .map(|&m| {
            let est = match m {
                EvidenceMethod::PowerPosterior => power_posterior_evidence(model, &pp),
                EvidenceMethod::Importance => importance_evidence(model, draws, None, cfg.evidence.n_is, cfg.seed),
                EvidenceMethod::Bridge => bridge_evidence(model, draws, &bridge),
                EvidenceMethod::Analytic => thermodev::evidence::analytic_evidence(model),
            };
            if let Err(e) = &est {
                log::warn!("{} {m:?} evidence failed: {e}", model.spec.label());
            }
            (m, est.map_err(|e| e.to_string()))
        })
        .collect())
}

fn evidence_cell(ev: &[(EvidenceMethod, std::result::Result<EvidenceEstimate, String>)], m: EvidenceMethod) -> Cell {
    match ev.iter().find(|(k, _)| *k == m) {
        Some((_, Ok(e))) => Cell::WithSe(e.log_z, e.se),
        _ => Cell::Na,
    }
}

const METHOD_COLUMNS: [(EvidenceMethod, &str); 3] = [
    (EvidenceMethod::Importance, "log_z_is (se)"),
    (EvidenceMethod::PowerPosterior, "log_z_pp (se)"),
    (EvidenceMethod::Bridge, "log_z_bs (se)"),
];

/// Samples every model and estimates its evidence with each method.
pub fn cmd_evidence(cfg: &RunConfig) -> Result<PathBuf> {
    let out = output_dir(cfg)?;
    let data = dataset(cfg)?;
    let specs = specs(cfg)?;
    let mut cols = vec!["model"];
    cols.extend(METHOD_COLUMNS.iter().map(|c| c.1));
    let mut table = Table::new("evidence", &cols);
    let mut all = Vec::new();
    for spec in &specs {
        let (model, draws) = fit_one(cfg, spec, &data, &out.join(model_dir_name(spec)))?;
        let ev = evidence_for(cfg, &model, &draws)?;
        let mut row = vec![Cell::Text(spec.label())];
        row.extend(METHOD_COLUMNS.iter().map(|(m, _)| evidence_cell(&ev, *m)));
        table.push(row);
        note_failures(&mut table, &spec.label(), &ev);
        all.push(EvidenceRecord::new(spec.label(), ev));
    }
    table.write(&out)?;
    write_json(&out.join("evidence_estimates.json"), &all)?;
    write_provenance(&out, "evidence", cfg, specs.iter().map(ModelSpec::label).collect(), vec!["evidence.json".into(), "evidence_estimates.json".into()])?;
    Ok(out)
}

fn note_failures(t: &mut Table, label: &str, ev: &[(EvidenceMethod, std::result::Result<EvidenceEstimate, String>)]) {
    for (m, r) in ev {
        if let Err(e) = r {
            t.notes.push(format!("{label}: {m:?} estimate unavailable: {e}"));
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub model: String,
    pub estimates: Vec<EvidenceEstimate>,
    pub failures: Vec<(EvidenceMethod, String)>,
}

impl EvidenceRecord {
    fn new(model: String, ev: Vec<(EvidenceMethod, std::result::Result<EvidenceEstimate, String>)>) -> Self {
        let mut estimates = Vec::new();
        let mut failures = Vec::new();
        for (m, r) in ev {
            match r {
                Ok(e) => estimates.push(e),
                Err(e) => failures.push((m, e)),
            }
        }
        Self { model, estimates, failures }
    }

    pub fn get(&self, m: EvidenceMethod) -> Option<&EvidenceEstimate> {
        self.estimates.iter().find(|e| e.method == m)
    }
}

// ---------------------------------------------------------------- compare

/// Everything `bma` needs about one compared model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model: String,
    pub dir: String,
    pub criteria: CriteriaReport,
    pub evidence: EvidenceRecord,
    pub elbo_mf: Option<f64>,
    pub elbo_fr: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub seed: u64,
    pub models: Vec<ModelComparison>,
}

fn elbo(model: &EcoModel, kind: FamilyKind, cfg: &RunConfig, notes: &mut Vec<String>) -> Option<f64> {
    match advi_fit(model, kind, &cfg.advi_config()) {
        Ok((fit, _)) => {
            if !fit.converged {
                notes.push(format!("{} ADVI did not reach the relative tolerance", kind.tag()));
            }
            Some(fit.elbo.elbo).filter(|v| v.is_finite())
        }
        Err(e) => {
            notes.push(format!("{} ADVI failed: {e}", kind.tag()));
            None
        }
    }
}

/// Criteria, evidence and ELBOs for every configured model, in the layout
/// AIC, DIC, LooCV, WAIC, BIC, then three log evidences with standard errors.
pub fn cmd_compare(cfg: &RunConfig) -> Result<PathBuf> {
    let out = output_dir(cfg)?;
    let data = dataset(cfg)?;
    let specs = specs(cfg)?;
    let loo = cfg.loo_config();
    let mut rows = Vec::new();
    for spec in &specs {
        let name = model_dir_name(spec);
        let dir = out.join(&name);
        let (model, draws) = fit_one(cfg, spec, &data, &dir)?;
        let mut notes = Vec::new();
        let criteria = match criteria_report(&model, &draws, loo.as_ref()) {
            Ok(c) => c,
            Err(e @ (Error::RefitFailed { .. } | Error::Config(_))) if loo.is_some() => {
                notes.push(format!("LooCV unavailable: {e}"));
                criteria_report(&model, &draws, None)?
            }
            Err(e) => return Err(e),
        };
        notes.extend(criteria.warnings.iter().cloned());
        let ev = evidence_for(cfg, &model, &draws)?;
        for (m, r) in &ev {
            if let Err(e) = r {
                notes.push(format!("{m:?} estimate unavailable: {e}"));
            }
        }
        let elbo_mf = elbo(&model, FamilyKind::MeanField, cfg, &mut notes);
        let elbo_fr = elbo(&model, FamilyKind::FullRank, cfg, &mut notes);
        let record = ModelComparison { model: spec.label(), dir: name, criteria, evidence: EvidenceRecord::new(spec.label(), ev), elbo_mf, elbo_fr, notes };
        write_json(&dir.join("comparison.json"), &record)?;
        rows.push(record);
    }
    let comparison = Comparison { schema_version: SCHEMA_VERSION, seed: cfg.seed, models: rows };
    write_json(&out.join(COMPARISON), &comparison)?;
    compare_table(&comparison).write(&out)?;
    compare_detail_table(&comparison).write(&out)?;
    write_provenance(
        &out,
        "compare",
        cfg,
        specs.iter().map(ModelSpec::label).collect(),
        vec![COMPARISON.into(), "compare.json".into(), "compare_detail.json".into()],
    )?;
    Ok(out)
}

/// The headline table; DIC uses the first and WAIC the second
/// effective-parameter variant.
pub fn compare_table(c: &Comparison) -> Table {
    let mut cols = vec!["model", "AIC", "DIC", "LooCV", "WAIC", "BIC"];
    cols.extend(METHOD_COLUMNS.iter().map(|c| c.1));
    let mut t = Table::new("compare", &cols);
    for m in &c.models {
        let r = &m.criteria;
        let mut row = vec![Cell::Text(m.model.clone()), Cell::num(r.aic), Cell::num(r.dic_1), Cell::opt(r.loocv), Cell::num(r.waic_2), Cell::num(r.bic)];
        row.extend(METHOD_COLUMNS.iter().map(|(k, _)| m.evidence.get(*k).map_or(Cell::Na, |e| Cell::WithSe(e.log_z, e.se))));
        t.push(row);
        t.notes.extend(m.notes.iter().map(|n| format!("{}: {n}", m.model)));
    }
    t.notes.insert(0, "DIC = DIC_1, WAIC = WAIC_2; all variants in compare_detail".into());
    t
}

pub fn compare_detail_table(c: &Comparison) -> Table {
    let mut t = Table::new(
        "compare_detail",
        &[
            "model", "k", "n", "max_log_lik", "dic_1", "dic_2", "p_dic_1", "p_dic_2", "waic_1", "waic_2", "p_waic_1", "p_waic_2", "mcse_waic_1",
            "mcse_waic_2", "loocv", "beta_loocv", "mcse_loocv", "elbo_mf", "elbo_fr",
        ],
    );
    for m in &c.models {
        let r = &m.criteria;
        t.push(vec![
            Cell::Text(m.model.clone()),
            Cell::num(r.k as f64),
            Cell::num(r.n as f64),
            Cell::num(r.max_log_lik),
            Cell::num(r.dic_1),
            Cell::num(r.dic_2),
            Cell::num(r.p_dic_1),
            Cell::num(r.p_dic_2),
            Cell::num(r.waic_1),
            Cell::num(r.waic_2),
            Cell::num(r.p_waic_1),
            Cell::num(r.p_waic_2),
            Cell::num(r.mcse_waic_1),
            Cell::num(r.mcse_waic_2),
            Cell::opt(r.loocv),
            Cell::opt(r.beta_loocv),
            Cell::opt(r.mcse_loocv),
            Cell::opt(m.elbo_mf),
            Cell::opt(m.elbo_fr),
        ]);
    }
    t
}

// ---------------------------------------------------------------- bma

fn source_scores(c: &Comparison, source: WeightSource, method: EvidenceMethod) -> Option<Vec<f64>> {
    c.models
        .iter()
        .map(|m| {
            let r = &m.criteria;
            match source {
                WeightSource::Aic => Some(r.aic),
                WeightSource::Bic => Some(r.bic),
                WeightSource::Dic => Some(r.dic_1),
                WeightSource::Waic => Some(r.waic_2),
                WeightSource::Loocv => r.loocv,
                WeightSource::Evidence => m.evidence.get(method).map(|e| e.log_z),
                WeightSource::ElboMf => m.elbo_mf,
                WeightSource::ElboFr => m.elbo_fr,
            }
        })
        .collect()
}

/// Weights from every available source for the compared models.
pub fn all_weights(c: &Comparison, method: EvidenceMethod) -> (Vec<WeightVector>, Vec<String>) {
    let names: Vec<String> = c.models.iter().map(|m| m.model.clone()).collect();
    let mut out = Vec::new();
    let mut notes = Vec::new();
    for source in WeightSource::ALL {
        let Some(scores) = source_scores(c, source, method) else {
            notes.push(format!("{source} weights unavailable: not every model has a value"));
            continue;
        };
        let w = match source {
            WeightSource::Evidence | WeightSource::ElboMf | WeightSource::ElboFr => evidence_weights(&names, &scores, None, source),
            _ => ic_weights(&names, &scores, source),
        };
        match w {
            Ok(w) => out.push(w),
            Err(e) => notes.push(format!("{source} weights unavailable: {e}")),
        }
    }
    (out, notes)
}

/// Model weights from a `compare` directory and the model-averaged thermal
/// quantities under each weighting.
pub fn cmd_bma(compare_dir: &Path, cfg: &RunConfig) -> Result<PathBuf> {
    let path = compare_dir.join(COMPARISON);
    if !path.exists() {
        return Err(Error::Config(format!("`{}` has no {COMPARISON}; run `compare` first", compare_dir.display())));
    }
    let comparison: Comparison = read_json(&path)?;
    if comparison.models.len() < 2 {
        return Err(Error::Config("model averaging needs at least two compared models".into()));
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| compare_dir.to_path_buf());
    let (weights, mut notes) = all_weights(&comparison, cfg.bma.evidence_method);

    let mut per_model: Vec<ModelQuantities> = Vec::new();
    for m in &comparison.models {
        let fit = load_fit(&compare_dir.join(&m.dir))?;
        let model = EcoModel::new(fit.spec.clone(), fit.data)?;
        per_model.push(thermal_quantities(&fit.spec, &model, &fit.draws));
    }

    let mut wcols = vec!["model".to_string()];
    wcols.extend(weights.iter().map(|w| format!("{}_w", w.source)));
    let wcols_ref: Vec<&str> = wcols.iter().map(String::as_str).collect();
    let mut wt = Table::new("weights", &wcols_ref);
    for (i, m) in comparison.models.iter().enumerate() {
        let mut row = vec![Cell::Text(m.model.clone())];
        row.extend(weights.iter().map(|w| Cell::num(w.weights[i])));
        wt.push(row);
    }
    wt.notes.push(format!("evidence weights use the {:?} estimates", cfg.bma.evidence_method));
    wt.notes.push("elbo weights rank lower bounds and are diagnostic only".into());
    wt.notes.extend(notes.iter().cloned());

    let mut bt = Table::new("bma", &["source", "quantity", "mean", "q025", "q975", "n_pooled", "undefined"]);
    for w in &weights {
        match bma_summary(w, &per_model, cfg.bma.total, cfg.seed) {
            Ok(rows) => {
                for r in rows {
                    bt.push(vec![
                        Cell::Text(w.source.to_string()),
                        Cell::Text(r.quantity),
                        Cell::num(r.mean),
                        Cell::num(r.q025),
                        Cell::num(r.q975),
                        Cell::num(r.n_pooled as f64),
                        Cell::num(r.undefined_fraction),
                    ]);
                }
            }
            Err(e) => notes.push(format!("{} averaging failed: {e}", w.source)),
        }
    }
    bt.notes = notes;
    wt.write(&out)?;
    bt.write(&out)?;
    write_json(&out.join("weight_vectors.json"), &weights)?;
    write_provenance(&out, "bma", cfg, comparison.models.iter().map(|m| m.model.clone()).collect(), vec!["weights.json".into(), "bma.json".into(), "weight_vectors.json".into()])?;
    Ok(out)
}

// ---------------------------------------------------------------- simulate

/// Simulates a dataset from the first configured model at `simulate.truth`
/// and writes it to `<out>/data.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let out = output_dir(cfg)?;
    let spec = specs(cfg)?.remove(0);
    let sim = cfg.simulate.as_ref().ok_or_else(|| Error::Config("missing [simulate] section (truth, temperatures, n_per_temp)".into()))?;
    if sim.truth.len() != spec.dim() {
        return Err(Error::Config(format!(
            "simulate.truth needs {} values ({}), got {}",
            spec.dim(),
            spec.param_names().join(", "),
            sim.truth.len()
        )));
    }
    let mut rng = stream_rng(cfg.seed, &[domain::SIMULATE]);
    let data = simulate_dataset(&spec, &sim.truth, &sim.temperatures, sim.n_per_temp, &mut rng)?;
    if let Some((t, y)) = data.iter().find(|(_, y)| !(0.0..=1.0).contains(y)) {
        return Err(Error::InvalidParams(format!(
            "simulated rate {y} at {t} degrees lies outside [0, 1]; the dataset format cannot hold it (lower the noise parameter)"
        )));
    }
    let path = out.join("data.csv");
    write_dataset(&path, &data)?;
    write_provenance(&out, "simulate", cfg, vec![spec.label()], vec!["data.csv".into()])?;
    Ok(path)
}

// ---------------------------------------------------------------- ppc

/// Posterior-predictive bands over the configured temperature grid for a
/// fitted model; zero-inflated models also get the probability of non-zero
/// development.
pub fn cmd_ppc(fit_dir: &Path, cfg: &RunConfig) -> Result<PathBuf> {
    let fit = load_fit(fit_dir)?;
    let grid = cfg.ppc.temperatures()?;
    let rows = posterior_predictive(&fit.spec, &fit.draws, &grid, cfg.seed)?;
    let zi = fit.spec.obs == ObsFamily::ZeroInflatedInverseGamma;
    let mut cols = vec!["temperature", "rate_mean", "q025", "q500", "q975"];
    if zi {
        cols.push("one_minus_p");
    }
    let mut t = Table::new("ppc", &cols);
    for r in &rows {
        let mut row = vec![Cell::num(r.temperature), Cell::num(r.rate_mean), Cell::num(r.q025), Cell::num(r.q500), Cell::num(r.q975)];
        if zi {
            row.push(Cell::opt(r.nonzero_prob));
        }
        t.push(row);
    }
    t.notes.push(format!("model {}; predictive quantiles of simulated rates", fit.spec.label()));
    let out = cfg.output_dir.clone().unwrap_or_else(|| fit_dir.to_path_buf());
    t.write(&out)?;
    write_provenance(&out, "ppc", cfg, vec![fit.spec.label()], vec!["ppc.json".into()])?;
    Ok(out)
}
