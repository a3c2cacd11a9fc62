//! CRPS of step-wise CDFs and of their convex combinations.
//!
//! Three routes are provided:
//!
//! * [`crps_int`]: the energy-form estimator for empirical CDFs of random samples,
//!   which coincides with the integral of `(F - H)^2`;
//! * [`crps_pwm`]: the probability-weighted-moment (fair) estimator for regularly
//!   spaced quantile sets;
//! * [`crps_exact`]: the closed form of the integral for a mixture of step-wise CDFs,
//!   together with its weight gradient [`crps_gradient`].
//!
//! For a mixture with weights `w` the CRPS is a quadratic form
//!
//! ```text
//! CRPS(w) = sum_e w_e a_e - 1/2 sum_{e,f} w_e w_f c_ef + (w . xbar)(1 - sum_e w_e)
//! a_e    = sum_m p_e^m |x_e^m - y|
//! c_ef   = sum_{m,n} p_e^m p_f^n |x_e^m - x_f^n|
//! xbar_e = sum_m p_e^m x_e^m
//! ```
//!
//! whose last term vanishes on the simplex. [`MixtureTerms`] stores `a`, `c` and
//! `xbar` for one time step so that losses and gradients for any weight vector are
//! `O(E^2)`.

mod decomposition;
mod series;

pub use decomposition::{hersbach_decompose, CrpsDecomposition, HersbachAccumulator};
pub use series::{windowed_mean, ScoreSeries, Window};

use crate::aggregation::WeightVector;
use crate::error::{Error, Result};
use crate::stepwise_cdf::{Provenance, StepwiseCdf};

/// `sum_m p_m |x_m - y|`.
pub fn mean_abs_to(cdf: &StepwiseCdf, y: f64) -> f64 {
    cdf.locations()
        .iter()
        .zip(cdf.weights())
        .map(|(x, p)| p * (x - y).abs())
        .sum()
}

/// `sum_{m,n} p_m p_n |x_m - x_n|` for sorted locations.
fn self_abs_difference(locations: &[f64], weights: &[f64]) -> f64 {
    let mut below_mass = 0.0;
    let mut below_moment = 0.0;
    let mut total = 0.0;
    for (&x, &p) in locations.iter().zip(weights) {
        total += p * (x * below_mass - below_moment);
        below_mass += p;
        below_moment += p * x;
    }
    2.0 * total
}

/// `sum_{m,n} p_m q_n |x_m - z_n|` for two sorted weighted lists.
fn cross_abs_difference(xs: &[f64], ps: &[f64], zs: &[f64], qs: &[f64]) -> f64 {
    let total_mass: f64 = qs.iter().sum();
    let total_moment: f64 = zs.iter().zip(qs).map(|(z, q)| z * q).sum();
    let mut j = 0;
    let mut mass = 0.0;
    let mut moment = 0.0;
    let mut out = 0.0;
    for (&x, &p) in xs.iter().zip(ps) {
        while j < zs.len() && zs[j] <= x {
            mass += qs[j];
            moment += qs[j] * zs[j];
            j += 1;
        }
        out += p * ((x * mass - moment) + ((total_moment - moment) - x * (total_mass - mass)));
    }
    out
}

/// Mean absolute difference between two independent draws from `cdf`.
pub fn mean_abs_difference(cdf: &StepwiseCdf) -> f64 {
    self_abs_difference(cdf.locations(), cdf.weights())
}

/// Exact CRPS `∫ (F - H_y)^2` of a single step-wise CDF.
pub fn crps(cdf: &StepwiseCdf, y: f64) -> f64 {
    (mean_abs_to(cdf, y) - 0.5 * mean_abs_difference(cdf)).max(0.0)
}

/// INT estimator for the empirical CDF of a random sample.
pub fn crps_int(sample_cdf: &StepwiseCdf, y: f64) -> Result<f64> {
    match sample_cdf.provenance() {
        Provenance::RandomSample { .. } => Ok(crps(sample_cdf, y)),
        other => Err(Error::Estimator(format!(
            "the INT estimator needs a random sample, got {other:?}"
        ))),
    }
}

/// PWM (fair) estimator for a set of `M >= 2` quantiles.
///
/// All quantiles count equally. The estimator is unbiased rather than an
/// integral, so it can be smaller than [`crps`] and even negative.
pub fn crps_pwm(quantile_cdf: &StepwiseCdf, y: f64) -> Result<f64> {
    if !matches!(quantile_cdf.provenance(), Provenance::QuantileSet { .. }) {
        return Err(Error::Estimator(format!(
            "the PWM estimator needs a quantile set, got {:?}",
            quantile_cdf.provenance()
        )));
    }
    let xs = quantile_cdf.locations();
    let m = xs.len();
    if m < 2 {
        return Err(Error::Estimator("the PWM estimator needs at least two quantiles".into()));
    }
    let mf = m as f64;
    let abs_to: f64 = xs.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
    let ones = vec![1.0; m];
    let pair_sum = self_abs_difference(xs, &ones);
    Ok(abs_to - 0.5 * pair_sum / (mf * (mf - 1.0)))
}

/// CRPS estimator matching the provenance of the forecast: INT for samples,
/// PWM for quantile sets (with at least two quantiles), exact otherwise.
pub fn crps_estimate(cdf: &StepwiseCdf, y: f64) -> f64 {
    match cdf.provenance() {
        Provenance::QuantileSet { .. } if cdf.len() >= 2 => crps_pwm(cdf, y).unwrap(),
        _ => crps(cdf, y),
    }
}

/// Per-time-step ingredients of the mixture CRPS.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTerms {
    abs_to_obs: Vec<f64>,
    means: Vec<f64>,
    pair: Vec<f64>,
}

impl MixtureTerms {
    pub fn new(experts: &[&StepwiseCdf], y: f64) -> Self {
        let n = experts.len();
        let abs_to_obs = experts.iter().map(|c| mean_abs_to(c, y)).collect();
        let means = experts.iter().map(|c| c.mean()).collect();
        let mut pair = vec![0.0; n * n];
        for e in 0..n {
            pair[e * n + e] = mean_abs_difference(experts[e]);
            for f in e + 1..n {
                let c = cross_abs_difference(
                    experts[e].locations(),
                    experts[e].weights(),
                    experts[f].locations(),
                    experts[f].weights(),
                );
                pair[e * n + f] = c;
                pair[f * n + e] = c;
            }
        }
        Self {
            abs_to_obs,
            means,
            pair,
        }
    }

    pub fn from_slice(experts: &[StepwiseCdf], y: f64) -> Self {
        let refs: Vec<&StepwiseCdf> = experts.iter().collect();
        Self::new(&refs, y)
    }

    pub fn n_experts(&self) -> usize {
        self.means.len()
    }

    /// `a_e = sum_m p_e^m |x_e^m - y|`.
    pub fn abs_to_obs(&self) -> &[f64] {
        &self.abs_to_obs
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// `c_ef`, row-major `E x E`.
    pub fn pair(&self) -> &[f64] {
        &self.pair
    }

    /// CRPS of expert `e` alone.
    pub fn expert_crps(&self, e: usize) -> f64 {
        let n = self.n_experts();
        (self.abs_to_obs[e] - 0.5 * self.pair[e * n + e]).max(0.0)
    }

    fn pair_times(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n_experts();
        (0..n)
            .map(|e| {
                let row = &self.pair[e * n..(e + 1) * n];
                row.iter().zip(w).map(|(c, wf)| wf * c).sum()
            })
            .collect()
    }

    /// CRPS of the mixture for weights on the simplex.
    pub fn crps(&self, w: &[f64]) -> f64 {
        let cw = self.pair_times(w);
        let linear: f64 = w.iter().zip(&self.abs_to_obs).map(|(a, b)| a * b).sum();
        let quad: f64 = w.iter().zip(&cw).map(|(a, b)| a * b).sum();
        (linear - 0.5 * quad).max(0.0)
    }

    /// The closed-form expression evaluated at arbitrary weights (no simplex
    /// constraint), whose partial derivatives are the gradient components.
    pub fn crps_unconstrained(&self, w: &[f64]) -> f64 {
        let cw = self.pair_times(w);
        let linear: f64 = w.iter().zip(&self.abs_to_obs).map(|(a, b)| a * b).sum();
        let quad: f64 = w.iter().zip(&cw).map(|(a, b)| a * b).sum();
        let mean: f64 = w.iter().zip(&self.means).map(|(a, b)| a * b).sum();
        let total: f64 = w.iter().sum();
        linear - 0.5 * quad + mean * (1.0 - total)
    }

    /// `∂CRPS/∂w_e = a_e - sum_f w_f xbar_f - sum_f w_f c_ef`, valid on the simplex.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let cw = self.pair_times(w);
        let mean: f64 = w.iter().zip(&self.means).map(|(a, b)| a * b).sum();
        self.abs_to_obs
            .iter()
            .zip(&cw)
            .map(|(a, c)| a - mean - c)
            .collect()
    }

    /// Gradient of [`MixtureTerms::crps_unconstrained`].
    pub fn gradient_unconstrained(&self, w: &[f64]) -> Vec<f64> {
        let cw = self.pair_times(w);
        let mean: f64 = w.iter().zip(&self.means).map(|(a, b)| a * b).sum();
        let slack = 1.0 - w.iter().sum::<f64>();
        (0..self.n_experts())
            .map(|e| self.abs_to_obs[e] - cw[e] + self.means[e] * slack - mean)
            .collect()
    }
}

fn check_mixture(experts: &[StepwiseCdf], weights: &WeightVector) -> Result<()> {
    if experts.is_empty() {
        return Err(Error::Empty("experts"));
    }
    if experts.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "aggregation weights",
            expected: experts.len(),
            actual: weights.len(),
        });
    }
    Ok(())
}

/// Exact CRPS of the convex combination of `experts` with `weights`.
pub fn crps_exact(experts: &[StepwiseCdf], weights: &WeightVector, y: f64) -> Result<f64> {
    check_mixture(experts, weights)?;
    Ok(MixtureTerms::from_slice(experts, y).crps(weights.as_slice()))
}

/// Gradient of the mixture CRPS with respect to each weight.
pub fn crps_gradient(experts: &[StepwiseCdf], weights: &WeightVector, y: f64) -> Result<Vec<f64>> {
    check_mixture(experts, weights)?;
    Ok(MixtureTerms::from_slice(experts, y).gradient(weights.as_slice()))
}
