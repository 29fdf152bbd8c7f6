//! Static-path Hamiltonian Monte Carlo with warmup adaptation.
//!
//! Each transition integrates a leapfrog path whose length is drawn
//! uniformly from `1..=L`, with `L = ceil(path_length / step)`, and applies
//! a Metropolis correction. Warmup adapts the step size by dual averaging
//! and a diagonal inverse metric over doubling windows:
//!
//! ```text
//! | 15% step size | 75% metric windows (25, 50, 100, ...) | 10% step size |
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::{Adaptation, DrawsMatrix, SamplerDiagnostics};
use crate::error::{Error, Result};
use crate::model::{BayesModel, LogDensity, Tempered};
use crate::rng::{domain, stream_rng};

/// Energy error beyond which a transition counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;
/// Initialization attempts per chain.
pub const INIT_TRIES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    pub n_warmup: usize,
    pub n_draws: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
    /// Integration time `step * L` in metric units.
    pub path_length: f64,
    /// Half-width of the uniform initialization box around the model's
    /// initialization center.
    pub init_radius: f64,
    /// Extra stream-path prefix, so that rungs and refits sharing a seed
    /// draw from disjoint streams.
    pub stream: Vec<u64>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            n_warmup: 1000,
            n_draws: 1000,
            n_chains: 4,
            target_accept: 0.8,
            max_leapfrog: 1024,
            seed: 1,
            path_length: 1.5,
            init_radius: 2.0,
            stream: Vec::new(),
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 || self.n_chains == 0 || self.max_leapfrog == 0 {
            return Err(Error::Config("sampler counts must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!("target_accept {} outside (0,1)", self.target_accept)));
        }
        if !(self.path_length > 0.0 && self.init_radius > 0.0) {
            return Err(Error::Config("path_length and init_radius must be positive".into()));
        }
        Ok(())
    }

    fn chain_rng(&self, chain: usize) -> ChaCha8Rng {
        let mut path = self.stream.clone();
        path.extend([domain::CHAIN, chain as u64]);
        stream_rng(self.seed, &path)
    }
}

/// Optional per-chain starting state.
#[derive(Clone, Debug, Default)]
pub struct WarmStart {
    /// Starting positions (unconstrained), cycled over chains.
    pub positions: Vec<Vec<f64>>,
    /// Adaptation to start from, cycled over chains. When present the metric
    /// is kept fixed and warmup only re-tunes the step size.
    pub adaptation: Vec<Adaptation>,
}

/// Raw output of one chain.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub positions: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub accept: Vec<f64>,
    pub divergent: Vec<bool>,
    pub leapfrog_steps: Vec<usize>,
    pub warmup_divergences: usize,
    pub adaptation: Adaptation,
}

/// Point on a trajectory with its cached log density and gradient.
#[derive(Clone, Debug)]
pub struct State {
    pub q: Vec<f64>,
    pub lp: f64,
    pub grad: Vec<f64>,
}

impl State {
    pub fn at<D: LogDensity + ?Sized>(target: &D, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let lp = target.log_density_grad(&q, &mut grad);
        Self { q, lp, grad }
    }
}

/// `n` leapfrog steps with a diagonal inverse metric. Stops early once the
/// log density becomes non-finite.
pub fn leapfrog<D: LogDensity + ?Sized>(
    target: &D,
    start: &State,
    p: &mut [f64],
    eps: f64,
    n: usize,
    inv_mass: &[f64],
) -> State {
    let mut s = start.clone();
    for _ in 0..n {
        for (pi, g) in p.iter_mut().zip(&s.grad) {
            *pi += 0.5 * eps * g;
        }
        for ((qi, pi), m) in s.q.iter_mut().zip(p.iter()).zip(inv_mass) {
            *qi += eps * m * pi;
        }
        s.lp = target.log_density_grad(&s.q, &mut s.grad);
        if !s.lp.is_finite() {
            return s;
        }
        for (pi, g) in p.iter_mut().zip(&s.grad) {
            *pi += 0.5 * eps * g;
        }
    }
    s
}

/// Kinetic energy `p' M^-1 p / 2`.
pub fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(pi, m)| pi * pi * m).sum::<f64>()
}

fn draw_momentum(rng: &mut ChaCha8Rng, inv_mass: &[f64]) -> Vec<f64> {
    inv_mass
        .iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            z / m.sqrt()
        })
        .collect()
}

struct Transition {
    accept: f64,
    divergent: bool,
    steps: usize,
}

fn transition<D: LogDensity + ?Sized>(
    target: &D,
    state: &mut State,
    eps: f64,
    max_steps: usize,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> Transition {
    let steps = rng.random_range(1..=max_steps);
    let mut p = draw_momentum(rng, inv_mass);
    let h0 = -state.lp + kinetic(&p, inv_mass);
    let proposal = leapfrog(target, state, &mut p, eps, steps, inv_mass);
    let h1 = -proposal.lp + kinetic(&p, inv_mass);
    let dh = h1 - h0;
    if !dh.is_finite() || dh.abs() > DIVERGENCE_THRESHOLD {
        return Transition { accept: 0.0, divergent: true, steps };
    }
    let accept = (-dh).exp().min(1.0);
    if rng.random::<f64>() < accept {
        *state = proposal;
    }
    Transition { accept, divergent: false, steps }
}

/// Nesterov dual averaging of `log(step)`.
struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    count: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, delta: f64) -> Self {
        Self { mu: (10.0 * eps).ln(), s_bar: 0.0, x_bar: 0.0, count: 0.0, delta }
    }

    fn learn(&mut self, accept: f64) -> f64 {
        self.count += 1.0;
        let eta = 1.0 / (self.count + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept.min(1.0));
        let x = self.mu - self.s_bar * self.count.sqrt() / Self::GAMMA;
        let w = self.count.powf(-Self::KAPPA);
        self.x_bar = w * x + (1.0 - w) * self.x_bar;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Doubles or halves the step until a single leapfrog step's acceptance
/// crosses 0.8.
fn initial_step<D: LogDensity + ?Sized>(
    target: &D,
    state: &State,
    eps0: f64,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut eps = eps0;
    let log_accept = |eps: f64, rng: &mut ChaCha8Rng| {
        let mut p = draw_momentum(rng, inv_mass);
        let h0 = -state.lp + kinetic(&p, inv_mass);
        let s = leapfrog(target, state, &mut p, eps, 1, inv_mass);
        let h = -s.lp + kinetic(&p, inv_mass);
        let la = h0 - h;
        if la.is_nan() {
            f64::NEG_INFINITY
        } else {
            la
        }
    };
    let threshold = 0.8f64.ln();
    let dir = if log_accept(eps, rng) > threshold { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let next = eps * 2f64.powf(dir);
        let la = log_accept(next, rng);
        if (dir > 0.0 && la <= threshold) || (dir < 0.0 && la > threshold) {
            return if dir > 0.0 { eps } else { next };
        }
        eps = next;
        if !(1e-12..=1e6).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-12, 1e6)
}

/// Welford accumulator for the diagonal metric.
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self { n: 0.0, mean: vec![0.0; d], m2: vec![0.0; d] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / self.n;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    /// Sample variance shrunk towards `1e-3`.
    fn regularized(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m2| {
                let var = m2 / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Ends of the metric-adaptation windows inside `[start, end)`.
fn window_ends(start: usize, end: usize) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut size = 25usize;
    let mut at = start;
    while at < end {
        let mut next = at + size;
        // fold a short remainder into the last window
        if next + 2 * size > end {
            next = end;
        }
        ends.push(next);
        at = next;
        size *= 2;
    }
    ends
}

fn find_initial<D: LogDensity + ?Sized>(
    target: &D,
    center: &[f64],
    radius: f64,
    rng: &mut ChaCha8Rng,
    chain: usize,
) -> Result<State> {
    for k in 0..INIT_TRIES {
        // the box halves every 20 failed tries
        let r = radius * 0.5f64.powi((k / 20) as i32);
        let q: Vec<f64> = center.iter().map(|c| c + rng.random_range(-r..r)).collect();
        let s = State::at(target, q);
        if s.lp.is_finite() && s.grad.iter().all(|g| g.is_finite()) {
            return Ok(s);
        }
    }
    // last resort: the center itself
    let s = State::at(target, center.to_vec());
    if s.lp.is_finite() && s.grad.iter().all(|g| g.is_finite()) {
        return Ok(s);
    }
    Err(Error::Initialization { chain, tries: INIT_TRIES })
}

fn max_steps(eps: f64, path_length: f64, cap: usize) -> usize {
    ((path_length / eps).ceil() as usize).clamp(1, cap)
}

/// Runs one chain: warmup then `n_draws` kept transitions.
pub fn run_chain<D: LogDensity + ?Sized>(
    target: &D,
    cfg: &HmcConfig,
    chain: usize,
    center: &[f64],
    warm: Option<&WarmStart>,
) -> Result<ChainOutput> {
    let mut rng = cfg.chain_rng(chain);
    let d = target.dim();
    let start = warm.and_then(|w| (!w.positions.is_empty()).then(|| w.positions[chain % w.positions.len()].clone()));
    let mut state = match start {
        Some(q) => {
            let s = State::at(target, q);
            if s.lp.is_finite() {
                s
            } else {
                find_initial(target, center, cfg.init_radius, &mut rng, chain)?
            }
        }
        None => find_initial(target, center, cfg.init_radius, &mut rng, chain)?,
    };
    let given = warm.and_then(|w| (!w.adaptation.is_empty()).then(|| w.adaptation[chain % w.adaptation.len()].clone()));
    let adapt_metric = given.is_none();
    let mut inv_mass = given.as_ref().map(|a| a.inv_mass.clone()).unwrap_or_else(|| vec![1.0; d]);
    let mut eps = match &given {
        Some(a) => a.step_size,
        None => initial_step(target, &state, 1.0, &inv_mass, &mut rng),
    };

    let n_warm = cfg.n_warmup;
    let (fast_end, slow_end) = if adapt_metric && n_warm >= 150 {
        let fast = (0.15 * n_warm as f64).round() as usize;
        let slow = fast + (0.75 * n_warm as f64).round() as usize;
        (fast, slow.min(n_warm))
    } else {
        (n_warm, n_warm)
    };
    let ends = if slow_end > fast_end { window_ends(fast_end, slow_end) } else { Vec::new() };
    let mut next_end = ends.iter().copied().peekable();

    let mut da = DualAveraging::new(eps, cfg.target_accept);
    let mut welford = Welford::new(d);
    let mut warmup_divergences = 0;
    for it in 0..n_warm {
        let steps = max_steps(eps, cfg.path_length, cfg.max_leapfrog);
        let tr = transition(target, &mut state, eps, steps, &inv_mass, &mut rng);
        if tr.divergent {
            warmup_divergences += 1;
        }
        eps = da.learn(tr.accept);
        if it >= fast_end && it < slow_end {
            welford.push(&state.q);
            if next_end.peek() == Some(&(it + 1)) {
                next_end.next();
                inv_mass = welford.regularized();
                welford = Welford::new(d);
                eps = initial_step(target, &state, da.final_step(), &inv_mass, &mut rng);
                da = DualAveraging::new(eps, cfg.target_accept);
            }
        }
    }
    if n_warm > 0 {
        if warmup_divergences == n_warm {
            return Err(Error::AllDivergent { chain });
        }
        eps = da.final_step();
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::NoConvergence(format!("chain {chain}: step size adaptation failed ({eps})")));
    }

    let steps = max_steps(eps, cfg.path_length, cfg.max_leapfrog);
    let mut out = ChainOutput {
        positions: Vec::with_capacity(cfg.n_draws),
        log_density: Vec::with_capacity(cfg.n_draws),
        accept: Vec::with_capacity(cfg.n_draws),
        divergent: Vec::with_capacity(cfg.n_draws),
        leapfrog_steps: Vec::with_capacity(cfg.n_draws),
        warmup_divergences,
        adaptation: Adaptation { step_size: eps, inv_mass: inv_mass.clone() },
    };
    for _ in 0..cfg.n_draws {
        let tr = transition(target, &mut state, eps, steps, &inv_mass, &mut rng);
        out.positions.push(state.q.clone());
        out.log_density.push(state.lp);
        out.accept.push(tr.accept);
        out.divergent.push(tr.divergent);
        out.leapfrog_steps.push(tr.steps);
    }
    Ok(out)
}

/// Runs all chains in parallel and assembles the draws. `constrain` maps
/// unconstrained positions to reported parameter values.
pub fn sample_density<D, F>(
    target: &D,
    cfg: &HmcConfig,
    center: &[f64],
    warm: Option<&WarmStart>,
    names: Vec<String>,
    constrain: F,
) -> Result<DrawsMatrix>
where
    D: LogDensity + ?Sized,
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    cfg.validate()?;
    let chains: Vec<ChainOutput> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(target, cfg, c, center, warm))
        .collect::<Result<_>>()?;
    let mut diag = SamplerDiagnostics { method: "hmc".into(), ..Default::default() };
    let mut m = DrawsMatrix {
        names,
        n_chains: cfg.n_chains,
        n_draws: cfg.n_draws,
        constrained: Vec::with_capacity(cfg.n_chains * cfg.n_draws),
        unconstrained: Vec::with_capacity(cfg.n_chains * cfg.n_draws),
        log_post: Vec::with_capacity(cfg.n_chains * cfg.n_draws),
        diagnostics: SamplerDiagnostics::default(),
    };
    for c in chains {
        diag.divergences += c.divergent.iter().filter(|&&d| d).count();
        diag.warmup_divergences += c.warmup_divergences;
        diag.step_size.push(c.adaptation.step_size);
        diag.mean_accept.push(c.accept.iter().sum::<f64>() / c.accept.len() as f64);
        diag.mean_leapfrog.push(c.leapfrog_steps.iter().sum::<usize>() as f64 / c.leapfrog_steps.len() as f64);
        diag.adaptation.push(c.adaptation);
        for (q, lp) in c.positions.into_iter().zip(c.log_density) {
            m.constrained.push(constrain(&q));
            m.unconstrained.push(q);
            m.log_post.push(lp);
        }
    }
    if diag.divergences > 0 {
        let msg = format!("{} divergent transitions after warmup", diag.divergences);
        log::warn!("{msg}");
        diag.warnings.push(msg);
    }
    m.diagnostics = diag;
    Ok(m)
}

/// Samples the posterior of `model`.
pub fn hmc_sample<M: BayesModel>(model: &M, cfg: &HmcConfig) -> Result<DrawsMatrix> {
    hmc_sample_tempered(model, 1.0, cfg, None)
}

/// Samples the power posterior `prior * likelihood^t`.
pub fn hmc_sample_tempered<M: BayesModel>(
    model: &M,
    t: f64,
    cfg: &HmcConfig,
    warm: Option<&WarmStart>,
) -> Result<DrawsMatrix> {
    let target = Tempered::new(model, t);
    let center = model.init_center();
    sample_density(&target, cfg, &center, warm, model.param_names(), |u| model.constrain(u))
}

/// Warm start from a finished run: its adaptation and final positions.
pub fn warm_start_from(draws: &DrawsMatrix) -> WarmStart {
    let positions = (0..draws.n_chains)
        .filter_map(|c| draws.unconstrained.get((c + 1) * draws.n_draws - 1).cloned())
        .collect();
    WarmStart { positions, adaptation: draws.diagnostics.adaptation.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::StdGaussian;

    #[test]
    fn windows_cover_slow_phase() {
        let ends = window_ends(150, 900);
        assert_eq!(*ends.last().unwrap(), 900);
        assert_eq!(ends[0], 175);
        assert!(ends.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn leapfrog_energy_error_is_second_order() {
        let target = StdGaussian { dim: 3 };
        let start = State::at(&target, vec![0.5, -1.0, 0.3]);
        let p0 = vec![0.7, 0.2, -1.1];
        let inv = vec![1.0; 3];
        let h0 = -start.lp + kinetic(&p0, &inv);
        let err = |eps: f64| {
            let mut p = p0.clone();
            let n = (1.0 / eps).round() as usize;
            let s = leapfrog(&target, &start, &mut p, eps, n, &inv);
            (-s.lp + kinetic(&p, &inv) - h0).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let target = StdGaussian { dim: 2 };
        let cfg = HmcConfig { n_warmup: 200, n_draws: 100, n_chains: 2, seed: 9, ..Default::default() };
        let names = vec!["a".into(), "b".into()];
        let a = sample_density(&target, &cfg, &[0.0, 0.0], None, names.clone(), |u| u.to_vec()).unwrap();
        let b = sample_density(&target, &cfg, &[0.0, 0.0], None, names, |u| u.to_vec()).unwrap();
        assert_eq!(a, b);
    }
}
