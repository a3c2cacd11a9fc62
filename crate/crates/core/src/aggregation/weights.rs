use std::ops::Index;

use crate::error::{Error, Result};
use crate::stepwise_cdf::{RENORMALIZE_TOL, WEIGHT_SUM_TOL};

/// Convex aggregation weights: non-negative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    /// Validates `values`; a sum off by at most `1e-9` is renormalized.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("weights"));
        }
        if let Some(&w) = values.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::OffSimplex(format!("invalid weight {w}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::OffSimplex(format!("weights sum to {total}")));
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            values.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need at least one expert");
        Self {
            values: vec![1.0 / n as f64; n],
        }
    }

    /// All the weight on expert `index`.
    pub fn indicator(n: usize, index: usize) -> Self {
        assert!(index < n, "indicator index out of range");
        let mut values = vec![0.0; n];
        values[index] = 1.0;
        Self { values }
    }

    /// `w_e ∝ exp(-eta * s_e)`, shifted by the smallest score before exponentiation.
    pub fn softmin(scores: &[f64], eta: f64) -> Self {
        assert!(!scores.is_empty(), "softmin needs at least one score");
        let lowest = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let mut values: Vec<f64> = scores.iter().map(|s| (-eta * (s - lowest)).exp()).collect();
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|w| *w /= total);
        Self { values }
    }

    /// Normalizes non-negative scores (at least one positive) to sum to one.
    pub fn from_unnormalized(scores: Vec<f64>) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) || scores.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(Error::OffSimplex("cannot normalize weights".into()));
        }
        Ok(Self {
            values: scores.into_iter().map(|s| s / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    /// Index of the largest weight (lowest index on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Index of the smallest value, lowest index on ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
