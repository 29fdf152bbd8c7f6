//! Temperature / developmental-rate observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired observations `(temperature in degrees C, rate in 1/day)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    temperatures: Vec<f64>,
    rates: Vec<f64>,
}

/// Summary of exact-zero rates in a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub count: usize,
    pub temperatures: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset; temperatures and rates must be finite and of equal
    /// length. Rate range checks belong to [`Dataset::validate_rates`].
    pub fn new(temperatures: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if temperatures.len() != rates.len() {
            return Err(Error::DegenerateDataset(format!(
                "{} temperatures but {} rates",
                temperatures.len(),
                rates.len()
            )));
        }
        if let Some(i) = temperatures.iter().chain(rates.iter()).position(|v| !v.is_finite()) {
            return Err(Error::DegenerateDataset(format!("non-finite value at position {}", i % temperatures.len().max(1))));
        }
        Ok(Self { temperatures, rates })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.temperatures.iter().copied().zip(self.rates.iter().copied())
    }

    /// Requires every rate to lie in `[0, 1]`.
    pub fn validate_rates(&self) -> Result<()> {
        for (i, &r) in self.rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Data { line: i + 2, msg: format!("rate {r} outside [0, 1]") });
            }
        }
        Ok(())
    }

    pub fn zero_report(&self) -> ZeroReport {
        let temperatures: Vec<f64> = self.iter().filter(|&(_, r)| r == 0.0).map(|(t, _)| t).collect();
        ZeroReport { count: temperatures.len(), temperatures }
    }

    /// Copy without observation `index`.
    pub fn without(&self, index: usize) -> Self {
        let keep = |v: &[f64]| v.iter().enumerate().filter(|&(i, _)| i != index).map(|(_, &x)| x).collect();
        Self { temperatures: keep(&self.temperatures), rates: keep(&self.rates) }
    }

    /// Observation `index` alone.
    pub fn single(&self, index: usize) -> Self {
        Self { temperatures: vec![self.temperatures[index]], rates: vec![self.rates[index]] }
    }

    /// Reordered copy; `order` must be a permutation of `0..len`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            temperatures: order.iter().map(|&i| self.temperatures[i]).collect(),
            rates: order.iter().map(|&i| self.rates[i]).collect(),
        }
    }

    /// Sorted distinct temperatures.
    pub fn distinct_temperatures(&self) -> Vec<f64> {
        let mut t = self.temperatures.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}
