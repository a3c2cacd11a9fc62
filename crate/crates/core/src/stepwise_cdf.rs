//! Step-wise cumulative distribution functions.
//!
//! A [`StepwiseCdf`] is a right-continuous, piece-wise constant CDF given by
//! strictly increasing jump locations and positive jump weights summing to one.
//! Raw ensembles become step functions through [`StepwiseCdf::from_sample`],
//! quantile forecasts through [`StepwiseCdf::from_quantiles`], and an aggregated
//! forecast is the pooled step function returned by [`convex_combine`].

use std::sync::Arc;

use crate::aggregation::WeightVector;
use crate::error::{Error, Result};

/// Tolerance on the sum of jump weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Drift on the sum of jump weights that is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Slack used when comparing probability levels against cumulative weights.
pub const LEVEL_TOL: f64 = 1e-12;

/// How the step locations of a CDF were obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Empirical CDF of an i.i.d. sample of `size` members (ties merged).
    RandomSample { size: usize },
    /// Quantiles at the given orders.
    QuantileSet { orders: Arc<[f64]> },
    /// Convex combination of other step-wise CDFs.
    Mixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseCdf {
    locations: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    provenance: Provenance,
}

/// A scalar observation revealed after the forecast was issued.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub value: f64,
    /// Day index, starting at 1.
    pub t: usize,
    pub location_id: String,
    pub lead_time_h: u32,
}

impl Observation {
    pub fn new(value: f64, t: usize, location_id: impl Into<String>, lead_time_h: u32) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "observation", value });
        }
        if t == 0 {
            return Err(Error::InvalidParameter("observation day index must be >= 1".into()));
        }
        Ok(Self {
            value,
            t,
            location_id: location_id.into(),
            lead_time_h,
        })
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&value) => Err(Error::NonFinite { what, value }),
        None => Ok(()),
    }
}

fn check_non_decreasing(values: &[f64]) -> Result<()> {
    for (index, pair) in values.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(Error::Decreasing {
                index: index + 1,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(())
}

fn cumulative_of(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc.min(1.0)
        })
        .collect();
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    cumulative
}

fn normalize(weights: &mut [f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::OffSimplex(format!("jump weights sum to {total}")));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(())
}

/// Jump weights attached to quantiles of the given orders.
///
/// A quantile of order `o_m` carries the probability mass up to the next order
/// (`1 - o_M` for the last one). When the last order is 1 the mass below each
/// order is used instead, and when the orders span both 0 and 1 each quantile
/// gets the mass between the neighbouring mid-orders. Weights are renormalized.
fn quantile_weights(orders: &[f64]) -> Vec<f64> {
    let n = orders.len();
    let first = orders[0];
    let last = orders[n - 1];
    let mut weights: Vec<f64> = if last < 1.0 {
        (0..n)
            .map(|m| if m + 1 < n { orders[m + 1] - orders[m] } else { 1.0 - orders[m] })
            .collect()
    } else if first > 0.0 {
        (0..n)
            .map(|m| if m == 0 { orders[0] } else { orders[m] - orders[m - 1] })
            .collect()
    } else {
        let bound = |m: usize| -> f64 {
            if m == 0 {
                0.0
            } else if m == n {
                1.0
            } else {
                0.5 * (orders[m - 1] + orders[m])
            }
        };
        (0..n).map(|m| bound(m + 1) - bound(m)).collect()
    };
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    weights
}

/// Replaces runs of tied values by strictly increasing values.
///
/// The first value of each run is kept; the other members of the run are placed
/// by linear interpolation towards the next distinct value. A trailing run is
/// extended upwards by the smallest spacing of the resolved prefix, and a list of
/// identical values is spread symmetrically around its value with an absolute
/// spacing of `1e-9` (scaled by the magnitude when it exceeds one).
pub fn dedup_interpolate(values: &[f64]) -> Result<Vec<f64>> {
    check_finite(values, "dedup input")?;
    check_non_decreasing(values)?;
    let n = values.len();
    let mut out = values.to_vec();
    if n < 2 {
        return Ok(out);
    }
    let mut run_starts = vec![0usize];
    for i in 1..n {
        if values[i] > values[i - 1] {
            run_starts.push(i);
        }
    }
    if run_starts.len() == 1 {
        let v = values[0];
        let step = 1e-9 * v.abs().max(1.0);
        let centre = (n - 1) as f64 / 2.0;
        for (i, x) in out.iter_mut().enumerate() {
            *x = v + (i as f64 - centre) * step;
        }
        return Ok(out);
    }
    for (r, &start) in run_starts.iter().enumerate() {
        let Some(&next) = run_starts.get(r + 1) else {
            break;
        };
        let (lo, hi) = (values[start], values[next]);
        let span = (next - start) as f64;
        for i in start + 1..next {
            out[i] = lo + (hi - lo) * (i - start) as f64 / span;
        }
    }
    let tail = *run_starts.last().unwrap();
    if tail + 1 < n {
        let step = out[..=tail]
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let anchor = out[tail];
        for i in tail + 1..n {
            out[i] = anchor + step * (i - tail) as f64;
        }
    }
    Ok(out)
}

impl StepwiseCdf {
    /// Empirical CDF of a sample; each member weighs `1/M` and ties are merged.
    pub fn from_sample(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sample"));
        }
        check_finite(values, "sample")?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let size = sorted.len();
        let mut locations = Vec::with_capacity(size);
        let mut counts: Vec<usize> = Vec::with_capacity(size);
        for &x in &sorted {
            match locations.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    locations.push(x);
                    counts.push(1);
                }
            }
        }
        let m = size as f64;
        let weights = counts.iter().map(|&c| c as f64 / m).collect();
        let mut seen = 0usize;
        let mut cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                seen += c;
                seen as f64 / m
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self {
            locations,
            weights,
            cumulative,
            provenance: Provenance::RandomSample { size },
        })
    }

    /// Step function through quantiles of the given orders.
    ///
    /// Tied quantiles are separated with [`dedup_interpolate`]; jump weights come
    /// from the spacing of the orders.
    pub fn from_quantiles(values: &[f64], orders: &[f64]) -> Result<Self> {
        Self::from_quantiles_shared(values, Arc::from(orders))
    }

    /// Same as [`StepwiseCdf::from_quantiles`], sharing the order vector.
    pub fn from_quantiles_shared(values: &[f64], orders: Arc<[f64]>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("quantile values"));
        }
        if values.len() != orders.len() {
            return Err(Error::LengthMismatch {
                what: "quantile orders",
                expected: values.len(),
                actual: orders.len(),
            });
        }
        check_finite(&orders, "quantile orders")?;
        if orders.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::InvalidOrders("orders must lie in [0, 1]".into()));
        }
        if orders.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidOrders("orders must be strictly increasing".into()));
        }
        let locations = dedup_interpolate(values)?;
        let weights = quantile_weights(&orders);
        let cumulative = cumulative_of(&weights);
        Ok(Self {
            locations,
            weights,
            cumulative,
            provenance: Provenance::QuantileSet { orders },
        })
    }

    /// General constructor from (location, jump) pairs. Equal locations are merged.
    pub fn from_weighted(locations: &[f64], weights: &[f64]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Empty("step locations"));
        }
        if locations.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "step weights",
                expected: locations.len(),
                actual: weights.len(),
            });
        }
        check_finite(locations, "step locations")?;
        check_finite(weights, "step weights")?;
        if let Some(&w) = weights.iter().find(|&&w| w <= 0.0) {
            return Err(Error::OffSimplex(format!("non-positive jump weight {w}")));
        }
        let mut pairs: Vec<(f64, f64)> = locations.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (locations, mut weights) = merge_sorted_pairs(pairs);
        normalize(&mut weights)?;
        let cumulative = cumulative_of(&weights);
        Ok(Self {
            locations,
            weights,
            cumulative,
            provenance: Provenance::Mixture,
        })
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative weights `F(x_m)` at each step location.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of distinct step locations.
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn min_location(&self) -> f64 {
        self.locations[0]
    }

    pub fn max_location(&self) -> f64 {
        *self.locations.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.locations.iter().zip(&self.weights).map(|(x, p)| x * p).sum()
    }

    /// `F(x)`: total weight of the steps at or below `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let idx = self.locations.partition_point(|&l| l <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Left limit `F(x-)`: total weight of the steps strictly below `x`.
    pub fn evaluate_left(&self, x: f64) -> f64 {
        let idx = self.locations.partition_point(|&l| l < x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Generalized inverse: the smallest location whose cumulative weight reaches `tau`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidLevel(tau));
        }
        let idx = self.cumulative.partition_point(|&c| c < tau - LEVEL_TOL);
        Ok(self.locations[idx.min(self.locations.len() - 1)])
    }

    /// Width of the central 90 % interval.
    pub fn iq90(&self) -> f64 {
        self.quantile(0.95).unwrap() - self.quantile(0.05).unwrap()
    }

    /// The forecast as a list of equally ranked members.
    ///
    /// Samples are expanded back to their `M` members (tied members repeated);
    /// other CDFs return their step locations.
    pub fn members(&self) -> Vec<f64> {
        match self.provenance {
            Provenance::RandomSample { size } => {
                let mut out = Vec::with_capacity(size);
                for (&x, &p) in self.locations.iter().zip(&self.weights) {
                    let count = (p * size as f64).round().max(1.0) as usize;
                    out.extend(std::iter::repeat_n(x, count));
                }
                out
            }
            _ => self.locations.clone(),
        }
    }

    /// Members together with the probability levels bracketing them.
    ///
    /// Returns `(z, tau)` where `z` has `M` sorted members and `tau` has `M + 1`
    /// levels: `tau[0] = 0`, `tau[M] = 1` and `tau[i]` is the forecast probability
    /// of not exceeding `z[i - 1]`.
    pub fn member_levels(&self) -> (Vec<f64>, Vec<f64>) {
        let members = self.members();
        let levels = match self.provenance {
            Provenance::RandomSample { size } => {
                (0..=size).map(|i| i as f64 / size as f64).collect()
            }
            _ => std::iter::once(0.0).chain(self.cumulative.iter().copied()).collect(),
        };
        (members, levels)
    }
}

fn merge_sorted_pairs(pairs: Vec<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let mut locations: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
    for (x, w) in pairs {
        match locations.last() {
            Some(&last) if last == x => *weights.last_mut().unwrap() += w,
            _ => {
                locations.push(x);
                weights.push(w);
            }
        }
    }
    (locations, weights)
}

/// Convex combination of step-wise CDFs.
///
/// The result jumps by `w_e * p_e^m` at every location `x_e^m` of every expert
/// with positive weight; coincident locations are merged.
pub fn convex_combine(cdfs: &[StepwiseCdf], weights: &WeightVector) -> Result<StepwiseCdf> {
    if cdfs.is_empty() {
        return Err(Error::Empty("experts"));
    }
    if cdfs.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "aggregation weights",
            expected: cdfs.len(),
            actual: weights.len(),
        });
    }
    let active: Vec<usize> = (0..cdfs.len()).filter(|&e| weights[e] > 0.0).collect();
    if let [only] = active[..] {
        return Ok(cdfs[only].clone());
    }
    let total: usize = active.iter().map(|&e| cdfs[e].len()).sum();
    let mut pairs = Vec::with_capacity(total);
    for &e in &active {
        let w = weights[e];
        pairs.extend(cdfs[e].locations.iter().zip(&cdfs[e].weights).map(|(&x, &p)| (x, w * p)));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (locations, mut jumps) = merge_sorted_pairs(pairs);
    normalize(&mut jumps)?;
    let cumulative = cumulative_of(&jumps);
    Ok(StepwiseCdf {
        locations,
        weights: jumps,
        cumulative,
        provenance: Provenance::Mixture,
    })
}
