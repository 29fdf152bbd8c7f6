//! Run configuration read from a TOML file.
//!
//! ```toml
//! seed = 20240101
//! data = "rates.csv"
//! output_dir = "out"
//!
//! [[models]]
//! curve = "briere"
//! obs = "inverse_gamma"
//!
//! [hmc]
//! n_draws = 2000
//! ```
//!
//! Only `seed` is mandatory. Every component seed (sampler, ADVI, evidence,
//! resampling) is derived from it, so a per-section `seed` key is ignored.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advi::AdviConfig;
use crate::criteria::LooConfig;
use crate::curves::{CurveFamily, CurveOptions};
use crate::error::{Error, Result};
use crate::evidence::{BridgeConfig, EvidenceMethod, IntegrationRule, PowerPosteriorConfig, TemperatureLadder};
use crate::hmc::HmcConfig;
use crate::model::ModelSpec;
use crate::obs::{ObsFamily, ZiConstants};
use crate::priors::{Prior, PriorSet};

/// One model to fit, with optional prior overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub curve: CurveFamily,
    pub obs: ObsFamily,
    /// Replacement priors for the curve parameters, in storage order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_priors: Option<Vec<Prior>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_prior: Option<Prior>,
}

impl ModelEntry {
    pub fn new(curve: CurveFamily, obs: ObsFamily) -> Self {
        Self { curve, obs, curve_priors: None, obs_prior: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvidenceSettings {
    pub methods: Vec<EvidenceMethod>,
    /// Ladder `t_k = (k / rungs)^power`, unless `ladder` lists the values.
    pub rungs: usize,
    pub power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    pub rule: IntegrationRule,
    /// Sampler settings per rung; defaults to the `[hmc]` section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rung_hmc: Option<HmcConfig>,
    pub n_is: usize,
    pub bridge_warp3: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_n_proposal: Option<usize>,
}

impl Default for EvidenceSettings {
    fn default() -> Self {
        Self {
            methods: vec![EvidenceMethod::PowerPosterior, EvidenceMethod::Importance, EvidenceMethod::Bridge],
            rungs: 20,
            power: 5.0,
            ladder: None,
            rule: IntegrationRule::Trapezoid,
            rung_hmc: None,
            n_is: 10_000,
            bridge_warp3: false,
            bridge_n_proposal: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LooSettings {
    pub enabled: bool,
    pub max_n: usize,
}

impl Default for LooSettings {
    fn default() -> Self {
        Self { enabled: true, max_n: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSettings {
    /// Constrained parameter values `[curve..., obs]` of the first model.
    pub truth: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub n_per_temp: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcSettings {
    /// Explicit temperatures; otherwise `lo..=hi` in steps of `step`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for PpcSettings {
    fn default() -> Self {
        Self { grid: None, lo: 5.0, hi: 40.0, step: 1.0 }
    }
}

impl PpcSettings {
    pub fn temperatures(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.grid {
            if g.is_empty() || g.iter().any(|t| !t.is_finite()) {
                return Err(Error::Config("ppc.grid must be a non-empty list of finite temperatures".into()));
            }
            return Ok(g.clone());
        }
        if !(self.step > 0.0 && self.lo.is_finite() && self.hi >= self.lo) {
            return Err(Error::Config("ppc needs lo <= hi and step > 0".into()));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BmaSettings {
    /// Pooled draws per quantity; defaults to the top model's draw count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
    /// Estimator whose log evidences give the `evidence` weights.
    pub evidence_method: EvidenceMethod,
}

impl Default for BmaSettings {
    fn default() -> Self {
        Self { total: None, evidence_method: EvidenceMethod::Bridge }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub curve_options: CurveOptions,
    #[serde(default)]
    pub zi: ZiConstants,
    #[serde(default)]
    pub hmc: HmcConfig,
    #[serde(default)]
    pub advi: AdviConfig,
    #[serde(default)]
    pub evidence: EvidenceSettings,
    #[serde(default)]
    pub loo: LooSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSettings>,
    #[serde(default)]
    pub ppc: PpcSettings,
    #[serde(default)]
    pub bma: BmaSettings,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            data: None,
            output_dir: None,
            models: Vec::new(),
            curve_options: CurveOptions::default(),
            zi: ZiConstants::default(),
            hmc: HmcConfig::default(),
            advi: AdviConfig::default(),
            evidence: EvidenceSettings::default(),
            loo: LooSettings::default(),
            simulate: None,
            ppc: PpcSettings::default(),
            bma: BmaSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `data` path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(d), Some(base)) = (&cfg.data, path.parent()) {
            if d.is_relative() {
                cfg.data = Some(base.join(d));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for spec in self.model_specs()? {
            spec.validate()?;
        }
        self.hmc.validate()?;
        let ev = &self.evidence;
        if let Some(l) = &ev.ladder {
            TemperatureLadder::new(l.clone())?;
        } else if ev.rungs == 0 || !(ev.power > 0.0) {
            return Err(Error::Config("evidence.rungs must be positive and evidence.power > 0".into()));
        }
        if ev.n_is == 0 {
            return Err(Error::Config("evidence.n_is must be positive".into()));
        }
        if let Some(s) = &self.simulate {
            if s.n_per_temp == 0 || s.temperatures.is_empty() {
                return Err(Error::Config("simulate needs temperatures and n_per_temp > 0".into()));
            }
        }
        Ok(())
    }

    /// Fully specified models, priors overridden where configured.
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        self.models
            .iter()
            .map(|m| {
                let mut spec = ModelSpec::new(m.curve, m.obs);
                spec.curve_options = self.curve_options;
                spec.zi = self.zi;
                if let Some(c) = &m.curve_priors {
                    spec.priors = PriorSet { curve: c.clone(), obs: spec.priors.obs };
                }
                if let Some(o) = m.obs_prior {
                    spec.priors.obs = o;
                }
                spec.priors.validate(m.curve)?;
                Ok(spec)
            })
            .collect()
    }

    pub fn hmc_config(&self) -> HmcConfig {
        HmcConfig { seed: self.seed, ..self.hmc.clone() }
    }

    pub fn advi_config(&self) -> AdviConfig {
        AdviConfig { seed: self.seed, ..self.advi.clone() }
    }

    pub fn loo_config(&self) -> Option<LooConfig> {
        self.loo.enabled.then(|| LooConfig { hmc: self.hmc_config(), max_n: self.loo.max_n })
    }

    pub fn power_posterior_config(&self) -> Result<PowerPosteriorConfig> {
        let ev = &self.evidence;
        let ladder = match &ev.ladder {
            Some(l) => TemperatureLadder::new(l.clone())?,
            None => TemperatureLadder::power(ev.rungs, ev.power),
        };
        let hmc = HmcConfig { seed: self.seed, ..ev.rung_hmc.clone().unwrap_or_else(|| self.hmc.clone()) };
        Ok(PowerPosteriorConfig { ladder, hmc, rule: ev.rule })
    }

    pub fn bridge_config(&self) -> BridgeConfig {
        BridgeConfig {
            n_proposal: self.evidence.bridge_n_proposal,
            warp3: self.evidence.bridge_warp3,
            seed: self.seed,
            ..BridgeConfig::default()
        }
    }
}
