//! Developmental-rate curves r(T; theta) and their thermal landmarks.
//!
//! Parameters are stored in the coordinates the priors are placed on:
//! Briere and Analytis use `a_tilde = -ln(alpha)`, Lactin uses
//! `(l, del, a, rho)` with `l = -lambda`, `del = 1/Delta` and
//! `a = exp((rho - del) * T_m)`. Temperatures are degrees Celsius throughout.

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::numeric::{brent_root, golden_section_max, BrentOptions};
use crate::transform::{Bijector, ParamTransform};

/// The four rate-curve families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum CurveFamily {
    Bieri,
    Briere,
    Analytis,
    Lactin,
}

impl CurveFamily {
    pub const ALL: [CurveFamily; 4] = [CurveFamily::Bieri, CurveFamily::Briere, CurveFamily::Analytis, CurveFamily::Lactin];

    pub fn name(self) -> &'static str {
        match self {
            CurveFamily::Bieri => "bieri",
            CurveFamily::Briere => "briere",
            CurveFamily::Analytis => "analytis",
            CurveFamily::Lactin => "lactin",
        }
    }

    /// Names of the sampled parameters, in storage order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            CurveFamily::Bieri => &["alpha", "beta", "t_m1", "t_m2"],
            CurveFamily::Briere => &["a_tilde", "t_min", "t_max"],
            CurveFamily::Analytis => &["a_tilde", "n", "m", "t_min", "t_max"],
            CurveFamily::Lactin => &["l", "del", "a", "rho"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Bijectors onto the parameter support, one per stored parameter.
    pub fn bijectors(self, opts: &CurveOptions) -> Vec<Bijector> {
        match self {
            CurveFamily::Bieri => vec![
                Bijector::Interval(0.0, 1.0),
                Bijector::Lower(1.0),
                Bijector::Lower(0.0),
                Bijector::AboveParam(2),
            ],
            CurveFamily::Briere => vec![Bijector::Lower(0.0), Bijector::Lower(0.0), Bijector::AboveParam(1)],
            CurveFamily::Analytis => vec![
                Bijector::Lower(0.0),
                Bijector::Interval(0.0, opts.analytis_cap),
                Bijector::Interval(0.0, opts.analytis_cap),
                Bijector::Lower(opts.analytis_floor.unwrap_or(0.0)),
                Bijector::AboveParam(3),
            ],
            CurveFamily::Lactin => vec![
                Bijector::Lower(0.0),
                Bijector::Interval(0.0, 1.0),
                Bijector::Lower(0.0),
                Bijector::FractionOf(1),
            ],
        }
    }

    pub fn transform(self, opts: &CurveOptions) -> ParamTransform {
        ParamTransform::new(self.bijectors(opts))
    }
}

impl std::str::FromStr for CurveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bieri" => Ok(CurveFamily::Bieri),
            "briere" => Ok(CurveFamily::Briere),
            "analytis" => Ok(CurveFamily::Analytis),
            "lactin" => Ok(CurveFamily::Lactin),
            other => Err(Error::Config(format!("unknown curve family `{other}`"))),
        }
    }
}

impl std::fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Support restrictions that are configurable rather than intrinsic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveOptions {
    /// Upper bound `c` for the Analytis exponents `n` and `m`.
    pub analytis_cap: f64,
    /// Lower bound on the Analytis `t_min`; `None` disables the floor.
    pub analytis_floor: Option<f64>,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { analytis_cap: 10.0, analytis_floor: Some(4.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BieriParams {
    pub alpha: f64,
    pub beta: f64,
    pub t_m1: f64,
    pub t_m2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BriereParams {
    pub a_tilde: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl BriereParams {
    pub fn from_alpha(alpha: f64, t_min: f64, t_max: f64) -> Self {
        Self { a_tilde: -alpha.ln(), t_min, t_max }
    }

    pub fn alpha(&self) -> f64 {
        (-self.a_tilde).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalytisParams {
    pub a_tilde: f64,
    pub n: f64,
    pub m: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl AnalytisParams {
    pub fn alpha(&self) -> f64 {
        (-self.a_tilde).exp()
    }
}

/// Lactin parameters in transformed coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LactinParams {
    pub l: f64,
    pub del: f64,
    pub a: f64,
    pub rho: f64,
}

impl LactinParams {
    /// Builds the transformed coordinates from `(lambda, Delta, rho, T_m)`.
    pub fn from_natural(lambda: f64, delta: f64, rho: f64, t_m: f64) -> Self {
        let del = 1.0 / delta;
        Self { l: -lambda, del, a: ((rho - del) * t_m).exp(), rho }
    }

    pub fn lambda(&self) -> f64 {
        -self.l
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.del
    }

    pub fn t_m(&self) -> f64 {
        self.a.ln() / (self.rho - self.del)
    }

    /// `Delta * ln(rho*Delta) / (rho*Delta - 1)`, the offset shared by the
    /// optimum and inflection formulas, with its series limit near `rho*Delta = 1`.
    fn log_ratio_offset(&self) -> f64 {
        let x = self.rho * self.delta();
        let g = if (x - 1.0).abs() < 1e-8 {
            let e = x - 1.0;
            1.0 - e / 2.0 + e * e / 3.0
        } else {
            x.ln() / (x - 1.0)
        };
        self.delta() * g
    }
}

/// Parameters of one of the four curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CurveParams {
    Bieri(BieriParams),
    Briere(BriereParams),
    Analytis(AnalytisParams),
    Lactin(LactinParams),
}

/// Lower and upper thermal thresholds; Lactin has no lower threshold when
/// `lambda >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_min: Option<f64>,
    pub t_max: f64,
}

/// The numeric Bieri optimum next to the two candidate closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BieriOptimum {
    pub numeric: f64,
    /// `T_m2 + ln(alpha / ln beta) / ln beta`, the stationary point of the curve.
    pub closed_form_t_m2: f64,
    /// The same expression anchored on the upper root `T_max`.
    pub closed_form_t_max: f64,
}

const DEFAULT_BRACKET: (f64, f64) = (-50.0, 80.0);
const ARGMAX_TOL: f64 = 1e-10;

impl CurveParams {
    pub fn family(&self) -> CurveFamily {
        match self {
            CurveParams::Bieri(_) => CurveFamily::Bieri,
            CurveParams::Briere(_) => CurveFamily::Briere,
            CurveParams::Analytis(_) => CurveFamily::Analytis,
            CurveParams::Lactin(_) => CurveFamily::Lactin,
        }
    }

    /// Stored coordinates in [`CurveFamily::param_names`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            CurveParams::Bieri(p) => vec![p.alpha, p.beta, p.t_m1, p.t_m2],
            CurveParams::Briere(p) => vec![p.a_tilde, p.t_min, p.t_max],
            CurveParams::Analytis(p) => vec![p.a_tilde, p.n, p.m, p.t_min, p.t_max],
            CurveParams::Lactin(p) => vec![p.l, p.del, p.a, p.rho],
        }
    }

    pub fn from_slice(family: CurveFamily, v: &[f64]) -> Result<Self> {
        if v.len() != family.n_params() {
            return Err(Error::InvalidParams(format!("{family} takes {} parameters, got {}", family.n_params(), v.len())));
        }
        Ok(match family {
            CurveFamily::Bieri => CurveParams::Bieri(BieriParams { alpha: v[0], beta: v[1], t_m1: v[2], t_m2: v[3] }),
            CurveFamily::Briere => CurveParams::Briere(BriereParams { a_tilde: v[0], t_min: v[1], t_max: v[2] }),
            CurveFamily::Analytis => {
                CurveParams::Analytis(AnalytisParams { a_tilde: v[0], n: v[1], m: v[2], t_min: v[3], t_max: v[4] })
            }
            CurveFamily::Lactin => CurveParams::Lactin(LactinParams { l: v[0], del: v[1], a: v[2], rho: v[3] }),
        })
    }

    /// Checks the type invariants. Lactin's `l` is left free here; the
    /// sampled model restricts it through its prior support.
    pub fn validate(&self, opts: &CurveOptions) -> Result<()> {
        let v = self.to_vec();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite {} parameters {v:?}", self.family())));
        }
        let bad = |msg: &str| Err(Error::InvalidParams(format!("{}: {msg}", self.family())));
        match *self {
            CurveParams::Bieri(p) => {
                if !(p.alpha > 0.0 && p.alpha < 1.0) {
                    return bad("alpha must lie in (0,1)");
                }
                if p.beta <= 1.0 {
                    return bad("beta must exceed 1");
                }
                if p.t_m1 >= p.t_m2 {
                    return bad("t_m1 must be below t_m2");
                }
            }
            CurveParams::Briere(p) => {
                if p.a_tilde <= 0.0 {
                    return bad("a_tilde must be positive");
                }
                if !(p.t_min >= 0.0 && p.t_min < p.t_max) {
                    return bad("need 0 <= t_min < t_max");
                }
            }
            CurveParams::Analytis(p) => {
                if p.a_tilde <= 0.0 {
                    return bad("a_tilde must be positive");
                }
                let cap = opts.analytis_cap;
                if !(p.n > 0.0 && p.n < cap && p.m > 0.0 && p.m < cap) {
                    return bad("exponents must lie in (0, cap)");
                }
                if let Some(floor) = opts.analytis_floor {
                    if p.t_min < floor {
                        return bad("t_min below the configured floor");
                    }
                }
                if p.t_min >= p.t_max {
                    return bad("t_min must be below t_max");
                }
            }
            CurveParams::Lactin(p) => {
                if !(p.del > 0.0 && p.del < 1.0) {
                    return bad("del must lie in (0,1)");
                }
                if !(p.rho > 0.0 && p.rho < p.del) {
                    return bad("rho must lie in (0, del)");
                }
                if p.a <= 0.0 {
                    return bad("a must be positive");
                }
            }
        }
        Ok(())
    }

    /// Developmental rate at temperature `t`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("non-finite temperature {t}")));
        }
        let v = self.to_vec();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameters {v:?}")));
        }
        Ok(rate_generic(self.family(), &v, t))
    }

    fn rate_unchecked(&self, t: f64) -> f64 {
        rate_generic(self.family(), &self.to_vec(), t)
    }

    /// Thermal thresholds. Briere and Analytis return their stored values;
    /// Bieri and Lactin root-find the rate curve on `bracket`, defaulting to
    /// `(t_m1, t_m2)` for Bieri and `(-50, 80)` for Lactin.
    pub fn thermal_thresholds(&self, bracket: Option<(f64, f64)>) -> Result<Thresholds> {
        let opts = BrentOptions::default();
        match *self {
            CurveParams::Briere(p) => Ok(Thresholds { t_min: Some(p.t_min), t_max: p.t_max }),
            CurveParams::Analytis(p) => Ok(Thresholds { t_min: Some(p.t_min), t_max: p.t_max }),
            CurveParams::Bieri(p) => {
                let (lo, hi) = bracket.unwrap_or((p.t_m1, p.t_m2));
                let f = |t: f64| self.rate_unchecked(t);
                let peak = golden_section_max(f, lo, hi, ARGMAX_TOL);
                if f(peak) <= 0.0 {
                    return Err(Error::NoRoot { lo, hi });
                }
                let t_min = brent_root(f, lo, peak, opts).map_err(|_| Error::NoRoot { lo, hi })?;
                let t_max = brent_root(f, peak, hi, opts).map_err(|_| Error::NoRoot { lo, hi })?;
                Ok(Thresholds { t_min: Some(t_min), t_max })
            }
            CurveParams::Lactin(p) => {
                let (lo, hi) = bracket.unwrap_or(DEFAULT_BRACKET);
                let f = |t: f64| self.rate_unchecked(t);
                let peak = lactin_t_opt(&p).clamp(lo, hi);
                if f(peak) <= 0.0 {
                    return Err(Error::NoRoot { lo, hi });
                }
                let t_max = brent_root(f, peak, hi, opts).map_err(|_| Error::NoRoot { lo, hi })?;
                let t_min = if p.lambda() < 0.0 {
                    // r -> lambda as T -> -inf, so the lower root may sit far below
                    // the initial bracket; widen geometrically before giving up
                    let mut lower = lo;
                    let mut k = 0;
                    while f(lower) > 0.0 && k < 12 {
                        lower = peak - 2.0 * (peak - lower);
                        k += 1;
                    }
                    Some(brent_root(f, lower, peak, opts).map_err(|_| Error::NoRoot { lo: lower, hi })?)
                } else {
                    None
                };
                Ok(Thresholds { t_min, t_max })
            }
        }
    }

    /// Temperature of maximum rate. Closed form for Briere, Analytis and
    /// Lactin; numeric argmax between the thresholds for Bieri.
    pub fn t_opt(&self) -> Result<f64> {
        match *self {
            CurveParams::Briere(p) => {
                let s = 4.0 * p.t_max + 3.0 * p.t_min;
                Ok((s + (s * s - 40.0 * p.t_min * p.t_max).sqrt()) / 10.0)
            }
            CurveParams::Analytis(p) => Ok((p.n * p.t_max + p.m * p.t_min) / (p.n + p.m)),
            CurveParams::Lactin(p) => Ok(lactin_t_opt(&p)),
            CurveParams::Bieri(_) => Ok(self.bieri_optimum()?.numeric),
        }
    }

    /// Golden-section argmax of the rate between the thermal thresholds (or
    /// on `bracket` when given).
    pub fn t_opt_numeric(&self, bracket: Option<(f64, f64)>) -> Result<f64> {
        let (lo, hi) = match bracket {
            Some(b) => b,
            None => {
                let th = self.thermal_thresholds(None)?;
                let lo = match th.t_min {
                    Some(t) => t,
                    None => DEFAULT_BRACKET.0,
                };
                (lo, th.t_max)
            }
        };
        let f = self.argmax_objective();
        Ok(golden_section_max(f, lo, hi, ARGMAX_TOL))
    }

    /// Objective with the same argmax as the rate, scaled so rounding does
    /// not flatten the peak: the log of the temperature-dependent factor for
    /// the multiplicative curves, the rate itself otherwise.
    fn argmax_objective(&self) -> impl Fn(f64) -> f64 + '_ {
        move |t: f64| match *self {
            CurveParams::Briere(p) => {
                if t > p.t_min && t < p.t_max && t > 0.0 {
                    t.ln() + (t - p.t_min).ln() + 0.5 * (p.t_max - t).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            CurveParams::Analytis(p) => {
                if t > p.t_min && t < p.t_max {
                    p.n * (t - p.t_min).ln() + p.m * (p.t_max - t).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => self.rate_unchecked(t),
        }
    }

    /// Bieri optimum: numeric argmax plus both closed-form candidates.
    pub fn bieri_optimum(&self) -> Result<BieriOptimum> {
        let CurveParams::Bieri(p) = *self else {
            return Err(Error::InvalidParams(format!("{} is not a Bieri curve", self.family())));
        };
        let th = self.thermal_thresholds(None)?;
        let lo = th.t_min.unwrap_or(p.t_m1);
        let numeric = golden_section_max(|t| self.rate_unchecked(t), lo, th.t_max, ARGMAX_TOL);
        let shift = (p.alpha.ln() - p.beta.ln().ln()) / p.beta.ln();
        Ok(BieriOptimum { numeric, closed_form_t_m2: p.t_m2 + shift, closed_form_t_max: th.t_max + shift })
    }

    /// Map to the unconstrained space with the log absolute Jacobian of the
    /// inverse map.
    pub fn to_unconstrained(&self, opts: &CurveOptions) -> Result<(Vec<f64>, f64)> {
        let t = self.family().transform(opts);
        let u = t.unconstrain(&self.to_vec())?;
        let (_, lj) = t.constrain_f64(&u);
        Ok((u, lj))
    }

    pub fn from_unconstrained(family: CurveFamily, u: &[f64], opts: &CurveOptions) -> Result<(Self, f64)> {
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite unconstrained vector {u:?}")));
        }
        let t = family.transform(opts);
        if u.len() != t.dim() {
            return Err(Error::InvalidParams(format!("{family} takes {} coordinates, got {}", t.dim(), u.len())));
        }
        let (x, lj) = t.constrain_f64(u);
        Ok((Self::from_slice(family, &x)?, lj))
    }
}

fn lactin_t_opt(p: &LactinParams) -> f64 {
    p.t_m() - p.log_ratio_offset()
}

/// Temperature of the Lactin inflection point.
pub fn t_inflection(p: &LactinParams) -> Result<f64> {
    CurveParams::Lactin(*p).validate(&CurveOptions::default())?;
    Ok(lactin_t_opt(p) - p.log_ratio_offset())
}

/// Rate evaluation over any [`Scalar`], on stored coordinates.
pub fn rate_generic<S: Scalar>(family: CurveFamily, p: &[S], t: f64) -> S {
    match family {
        CurveFamily::Bieri => {
            let (alpha, beta, t_m1, t_m2) = (p[0], p[1], p[2], p[3]);
            // beta^(T - T_m2) = exp((T - T_m2) ln beta)
            alpha * (-t_m1 + t) - ((-t_m2 + t) * beta.ln()).exp()
        }
        CurveFamily::Briere => {
            let (a_tilde, t_min, t_max) = (p[0], p[1], p[2]);
            if t > t_min.value() && t < t_max.value() {
                (-a_tilde).exp() * (-t_min + t) * (t_max - t).sqrt() * t
            } else {
                S::cst(0.0)
            }
        }
        CurveFamily::Analytis => {
            let (a_tilde, n, m, t_min, t_max) = (p[0], p[1], p[2], p[3], p[4]);
            if t > t_min.value() && t < t_max.value() {
                (-a_tilde + n * (-t_min + t).ln() + m * (t_max - t).ln()).exp()
            } else {
                S::cst(0.0)
            }
        }
        CurveFamily::Lactin => {
            let (l, del, a, rho) = (p[0], p[1], p[2], p[3]);
            // lambda + e^{rho T} - e^{rho T_m - (T_m - T)/Delta} with the exponent
            // rewritten as ln a + del T
            -l + (rho * t).exp() - a * (del * t).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn briere() -> CurveParams {
        CurveParams::Briere(BriereParams::from_alpha(2e-5, 5.0, 35.0))
    }

    fn lactin_ref() -> CurveParams {
        CurveParams::Lactin(LactinParams::from_natural(-0.01, 5.0, 0.1, 35.0))
    }

    fn deriv(c: &CurveParams, t: f64) -> f64 {
        let h = 1e-5;
        (c.rate(t + h).unwrap() - c.rate(t - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn briere_vanishes_at_and_beyond_thresholds() {
        let c = briere();
        assert_eq!(c.rate(5.0).unwrap(), 0.0);
        assert_eq!(c.rate(40.0).unwrap(), 0.0);
        assert_eq!(c.rate(-3.0).unwrap(), 0.0);
        assert!(c.rate(20.0).unwrap() > 0.0);
    }

    #[test]
    fn rate_rejects_non_finite_input() {
        assert!(briere().rate(f64::NAN).is_err());
        let bad = CurveParams::Briere(BriereParams { a_tilde: f64::INFINITY, t_min: 5.0, t_max: 35.0 });
        assert!(bad.rate(20.0).is_err());
    }

    #[test]
    fn briere_optimum_closed_form() {
        let want = (155.0 + 17025f64.sqrt()) / 10.0;
        let got = briere().t_opt().unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 28.548).abs() < 5e-4);
        assert!((briere().t_opt_numeric(None).unwrap() - got).abs() < 1e-6);
    }

    #[test]
    fn analytis_symmetric_exponents_peak_at_midpoint() {
        let c = CurveParams::Analytis(AnalytisParams { a_tilde: 10.0, n: 1.7, m: 1.7, t_min: 5.0, t_max: 35.0 });
        assert_eq!(c.t_opt().unwrap(), 20.0);
    }

    #[test]
    fn lactin_optimum_is_stationary() {
        let c = lactin_ref();
        let t_opt = c.t_opt().unwrap();
        assert!((t_opt - 28.0686).abs() < 1e-4, "{t_opt}");
        // the 4-decimal reference sits 5e-5 from the exact root; |r''| is about 0.16
        assert!(deriv(&c, 28.0686).abs() < 2e-5);
        assert!(deriv(&c, t_opt).abs() < 1e-9);
    }

    #[test]
    fn lactin_inflection_reference_value() {
        let CurveParams::Lactin(p) = lactin_ref() else { unreachable!() };
        let t_inf = t_inflection(&p).unwrap();
        assert!((t_inf - 21.1371).abs() < 1e-4, "{t_inf}");
        let c = lactin_ref();
        let second = |t: f64| {
            let h = 1e-3;
            (c.rate(t + h).unwrap() - 2.0 * c.rate(t).unwrap() + c.rate(t - h).unwrap()) / (h * h)
        };
        assert!(second(t_inf - 1e-2) > 0.0 && second(t_inf + 1e-2) < 0.0);
    }

    #[test]
    fn lactin_degenerate_limit_is_continuous() {
        // a = exp((rho - del) T_m) -> 1 here, so T_m itself is only known to ~1e-5
        let exact = LactinParams::from_natural(-0.01, 5.0, 0.2 * (1.0 - 1e-10), 35.0);
        let near = LactinParams::from_natural(-0.01, 5.0, 0.2 * (1.0 - 1e-6), 35.0);
        assert!((lactin_t_opt(&exact) - (35.0 - 5.0)).abs() < 1e-4);
        assert!((lactin_t_opt(&near) - lactin_t_opt(&exact)).abs() < 1e-4);
        assert!((t_inflection(&exact).unwrap() - (lactin_t_opt(&exact) - 5.0)).abs() < 1e-6);
    }

    #[test]
    fn lactin_without_lower_threshold_when_lambda_nonnegative() {
        let c = CurveParams::Lactin(LactinParams::from_natural(0.02, 5.0, 0.1, 35.0));
        let th = c.thermal_thresholds(None).unwrap();
        assert!(th.t_min.is_none());
        assert!(c.rate(th.t_max).unwrap().abs() < 1e-10);
        assert!(th.t_max > c.t_opt().unwrap());
    }

    #[test]
    fn lactin_thresholds_with_negative_lambda() {
        let c = lactin_ref();
        let th = c.thermal_thresholds(None).unwrap();
        let lo = th.t_min.unwrap();
        assert!(c.rate(lo).unwrap().abs() < 1e-10 && c.rate(th.t_max).unwrap().abs() < 1e-10);
        assert!(lo < c.t_opt().unwrap() && c.t_opt().unwrap() < th.t_max);
    }

    #[test]
    fn bieri_roots_inside_m_interval() {
        let p = BieriParams { alpha: 0.004, beta: 1.25, t_m1: 8.0, t_m2: 36.0 };
        let c = CurveParams::Bieri(p);
        let th = c.thermal_thresholds(None).unwrap();
        let lo = th.t_min.unwrap();
        assert!(p.t_m1 < lo && lo < th.t_max && th.t_max < p.t_m2);
        assert!(c.rate(lo).unwrap().abs() < 1e-10 && c.rate(th.t_max).unwrap().abs() < 1e-10);
        // r(T_m1) = -beta^(T_m1 - T_m2), r(T_m2) = alpha (T_m2 - T_m1) - 1, both in (-1, 0)
        let r1 = c.rate(p.t_m1).unwrap();
        let r2 = c.rate(p.t_m2).unwrap();
        assert!((r1 + p.beta.powf(p.t_m1 - p.t_m2)).abs() < 1e-15);
        assert!((r2 - (p.alpha * (p.t_m2 - p.t_m1) - 1.0)).abs() < 1e-15);
        assert!(r1 > -1.0 && r1 < 0.0 && r2 > -1.0 && r2 < 0.0);
        let opt = c.bieri_optimum().unwrap();
        assert!((opt.numeric - opt.closed_form_t_m2).abs() < 1e-6);
    }

    #[test]
    fn no_root_error_carries_bracket() {
        // interior maximum below zero
        let c = CurveParams::Bieri(BieriParams { alpha: 1e-4, beta: 3.0, t_m1: 10.0, t_m2: 12.0 });
        match c.thermal_thresholds(Some((10.0, 12.0))) {
            Err(Error::NoRoot { lo, hi }) => assert_eq!((lo, hi), (10.0, 12.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_interval_logit_at_half() {
        let c = CurveParams::Bieri(BieriParams { alpha: 0.5, beta: 1.2, t_m1: 5.0, t_m2: 35.0 });
        let (u, _) = c.to_unconstrained(&CurveOptions::default()).unwrap();
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn validation_catches_each_invariant() {
        let o = CurveOptions::default();
        let cases = [
            CurveParams::Bieri(BieriParams { alpha: 1.5, beta: 1.2, t_m1: 5.0, t_m2: 35.0 }),
            CurveParams::Bieri(BieriParams { alpha: 0.5, beta: 0.9, t_m1: 5.0, t_m2: 35.0 }),
            CurveParams::Briere(BriereParams { a_tilde: 1.0, t_min: 35.0, t_max: 5.0 }),
            CurveParams::Analytis(AnalytisParams { a_tilde: 1.0, n: 11.0, m: 1.0, t_min: 5.0, t_max: 35.0 }),
            CurveParams::Analytis(AnalytisParams { a_tilde: 1.0, n: 1.0, m: 1.0, t_min: 3.0, t_max: 35.0 }),
            CurveParams::Lactin(LactinParams { l: 0.01, del: 0.2, a: 0.1, rho: 0.3 }),
        ];
        for c in cases {
            assert!(c.validate(&o).is_err(), "{c:?}");
        }
        let no_floor = CurveOptions { analytis_floor: None, ..o };
        let c = CurveParams::Analytis(AnalytisParams { a_tilde: 1.0, n: 1.0, m: 1.0, t_min: 3.0, t_max: 35.0 });
        assert!(c.validate(&no_floor).is_ok());
    }

    fn arb_lactin() -> impl Strategy<Value = LactinParams> {
        (-0.05f64..0.05, 2.0f64..12.0, 0.2f64..0.95, 25.0f64..45.0)
            .prop_map(|(lambda, delta, frac, t_m)| LactinParams::from_natural(lambda, delta, frac / delta, t_m))
    }

    proptest! {
        #[test]
        fn lactin_inflection_precedes_optimum(p in arb_lactin()) {
            prop_assert!(t_inflection(&p).unwrap() < lactin_t_opt(&p));
        }

        #[test]
        fn lactin_decreases_after_optimum(p in arb_lactin()) {
            let c = CurveParams::Lactin(p);
            let opt = c.t_opt().unwrap();
            let th = c.thermal_thresholds(None).unwrap();
            let mut t = opt + 0.01;
            let mut prev = c.rate(opt).unwrap();
            while t < th.t_max {
                let r = c.rate(t).unwrap();
                prop_assert!(r < prev);
                prev = r;
                t += 0.01;
            }
        }

        #[test]
        fn multiplicative_curves_nonnegative(
            a_tilde in 5.0f64..15.0, t_min in 0.0f64..15.0, width in 5.0f64..30.0,
            n in 0.2f64..5.0, m in 0.2f64..5.0, t in -20.0f64..60.0,
        ) {
            let b = CurveParams::Briere(BriereParams { a_tilde, t_min, t_max: t_min + width });
            let a = CurveParams::Analytis(AnalytisParams { a_tilde, n, m, t_min, t_max: t_min + width });
            for c in [b, a] {
                let r = c.rate(t).unwrap();
                prop_assert!(r >= 0.0);
                let inside = t > t_min && t < t_min + width;
                prop_assert_eq!(r > 0.0, inside);
            }
        }

        #[test]
        fn optimum_dominates_grid(
            a_tilde in 5.0f64..15.0, t_min in 0.0f64..15.0, width in 8.0f64..30.0,
            n in 0.3f64..5.0, m in 0.3f64..5.0, p in arb_lactin(),
        ) {
            let curves = [
                CurveParams::Briere(BriereParams { a_tilde, t_min, t_max: t_min + width }),
                CurveParams::Analytis(AnalytisParams { a_tilde, n, m, t_min, t_max: t_min + width }),
                CurveParams::Lactin(p),
            ];
            for c in curves {
                let th = c.thermal_thresholds(None).unwrap();
                let lo = th.t_min.unwrap_or(-50.0);
                let best = c.rate(c.t_opt().unwrap()).unwrap();
                let mut t = lo;
                while t <= th.t_max {
                    prop_assert!(best >= c.rate(t).unwrap() - 1e-15);
                    t += 0.01;
                }
            }
        }

        #[test]
        fn curve_round_trip(p in arb_lactin(), a_tilde in 1.0f64..20.0, t_min in 4.5f64..15.0, w in 1.0f64..30.0) {
            let o = CurveOptions::default();
            let cs = [
                CurveParams::Lactin(p),
                CurveParams::Briere(BriereParams { a_tilde, t_min, t_max: t_min + w }),
                CurveParams::Analytis(AnalytisParams { a_tilde, n: 2.0, m: 0.7, t_min, t_max: t_min + w }),
                CurveParams::Bieri(BieriParams { alpha: 0.3, beta: 1.0 + a_tilde / 10.0, t_m1: t_min, t_m2: t_min + w }),
            ];
            for c in cs {
                prop_assume!(c.to_vec()[0] > 0.0);
                let (u, lj) = c.to_unconstrained(&o).unwrap();
                let (back, lj2) = CurveParams::from_unconstrained(c.family(), &u, &o).unwrap();
                prop_assert_eq!(lj, lj2);
                for (x, y) in c.to_vec().iter().zip(back.to_vec()) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{} vs {}", x, y);
                }
            }
        }
    }
}
