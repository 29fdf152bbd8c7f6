//! Posterior (or variational) draws with chain provenance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size and diagonal inverse metric reached at the end of warmup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// `hmc`, `advi_meanfield` or `advi_fullrank`.
    pub method: String,
    /// Post-warmup divergent transitions over all chains.
    pub divergences: usize,
    pub warmup_divergences: usize,
    /// Per chain.
    pub step_size: Vec<f64>,
    /// Per chain mean Metropolis acceptance probability after warmup.
    pub mean_accept: Vec<f64>,
    /// Per chain mean leapfrog steps per transition after warmup.
    pub mean_leapfrog: Vec<f64>,
    pub adaptation: Vec<Adaptation>,
    pub warnings: Vec<String>,
}

/// Draws stored chain-major: draw `i` of chain `c` is row `c * n_draws + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawsMatrix {
    pub names: Vec<String>,
    pub n_chains: usize,
    pub n_draws: usize,
    /// Constrained parameter values, one row per draw.
    pub constrained: Vec<Vec<f64>>,
    /// The same draws on the unconstrained scale.
    pub unconstrained: Vec<Vec<f64>>,
    /// Log density of the sampled target at each draw.
    pub log_post: Vec<f64>,
    pub diagnostics: SamplerDiagnostics,
}

impl DrawsMatrix {
    pub fn len(&self) -> usize {
        self.constrained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constrained.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// All draws of constrained parameter `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.constrained.iter().map(|r| r[j]).collect()
    }

    /// Constrained parameter `j` split by chain.
    pub fn chains_of(&self, j: usize) -> Vec<Vec<f64>> {
        self.split_by_chain(&self.column(j))
    }

    /// Splits any per-draw series by chain.
    pub fn split_by_chain(&self, series: &[f64]) -> Vec<Vec<f64>> {
        series.chunks(self.n_draws.max(1)).map(|c| c.to_vec()).collect()
    }

    /// Mean of the constrained draws.
    pub fn constrained_mean(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyDraws);
        }
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim()];
        for r in &self.constrained {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b / n;
            }
        }
        Ok(m)
    }

    /// Row with the highest log density.
    pub fn best_row(&self) -> Result<usize> {
        self.log_post
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or(Error::EmptyDraws)
    }

    /// Every `k`-th draw of every chain.
    pub fn thin(&self, k: usize) -> Self {
        let k = k.max(1);
        let keep: Vec<usize> = (0..self.n_chains)
            .flat_map(|c| (0..self.n_draws).step_by(k).map(move |i| c * self.n_draws + i))
            .collect();
        Self {
            names: self.names.clone(),
            n_chains: self.n_chains,
            n_draws: self.n_draws.div_ceil(k),
            constrained: keep.iter().map(|&i| self.constrained[i].clone()).collect(),
            unconstrained: keep.iter().map(|&i| self.unconstrained[i].clone()).collect(),
            log_post: keep.iter().map(|&i| self.log_post[i]).collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Draws from chain-half `half` (0 or 1) of every chain.
    pub fn half(&self, half: usize) -> Self {
        let h = self.n_draws / 2;
        let (lo, hi) = if half == 0 { (0, h) } else { (h, self.n_draws) };
        let keep: Vec<usize> = (0..self.n_chains).flat_map(|c| (lo..hi).map(move |i| c * self.n_draws + i)).collect();
        Self {
            names: self.names.clone(),
            n_chains: self.n_chains,
            n_draws: hi - lo,
            constrained: keep.iter().map(|&i| self.constrained[i].clone()).collect(),
            unconstrained: keep.iter().map(|&i| self.unconstrained[i].clone()).collect(),
            log_post: keep.iter().map(|&i| self.log_post[i]).collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> DrawsMatrix {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        DrawsMatrix {
            names: vec!["x".into()],
            n_chains: 2,
            n_draws: 4,
            constrained: rows.clone(),
            unconstrained: rows,
            log_post: (0..8).map(|i| -(i as f64)).collect(),
            diagnostics: SamplerDiagnostics::default(),
        }
    }

    #[test]
    fn chain_split_and_halves() {
        let d = toy();
        assert_eq!(d.chains_of(0), vec![vec![0.0, 1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0, 7.0]]);
        assert_eq!(d.half(1).column(0), vec![2.0, 3.0, 6.0, 7.0]);
        assert_eq!(d.thin(2).column(0), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(d.best_row().unwrap(), 0);
        assert_eq!(d.constrained_mean().unwrap(), vec![3.5]);
    }
}
