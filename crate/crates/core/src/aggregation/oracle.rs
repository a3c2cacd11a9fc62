//! Hindsight oracles and regret.
//!
//! The cumulative CRPS of a constant combination `w` is the quadratic
//! `w . A - 1/2 w' C w` with `A` and `C` summed over days, so the best constant
//! combination solves a convex quadratic program over the simplex.

use crate::error::{Error, Result};
use crate::scoring::{MixtureTerms, ScoreSeries};

use super::weights::{argmin, WeightVector};

/// Iteration cap of the projected-gradient solver.
pub const MAX_ITERATIONS: usize = 20_000;

/// Stationarity tolerance: `|w - P(w - g)|` on the day-averaged objective.
pub const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BestExpert {
    pub index: usize,
    pub losses: ScoreSeries,
}

impl BestExpert {
    pub fn cumulative_loss(&self) -> f64 {
        self.losses.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestConstant {
    pub weights: WeightVector,
    pub losses: ScoreSeries,
    pub iterations: usize,
    /// `false` when the iteration cap was hit; `weights` is then the best iterate.
    pub converged: bool,
}

impl BestConstant {
    pub fn cumulative_loss(&self) -> f64 {
        self.losses.total()
    }
}

/// Expert with the lowest cumulative loss (lowest index on ties).
pub fn oracle_best_expert(expert_losses: &[ScoreSeries]) -> Result<BestExpert> {
    if expert_losses.is_empty() {
        return Err(Error::Empty("experts"));
    }
    let totals: Vec<f64> = expert_losses.iter().map(ScoreSeries::total).collect();
    let index = argmin(&totals);
    Ok(BestExpert {
        index,
        losses: expert_losses[index].clone(),
    })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

struct Quadratic {
    n: usize,
    a: Vec<f64>,
    c: Vec<f64>,
}

impl Quadratic {
    fn from_terms(terms: &[MixtureTerms]) -> Self {
        let n = terms[0].n_experts();
        let scale = 1.0 / terms.len() as f64;
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n * n];
        for day in terms {
            a.iter_mut().zip(day.abs_to_obs()).for_each(|(s, v)| *s += v * scale);
            c.iter_mut().zip(day.pair()).for_each(|(s, v)| *s += v * scale);
        }
        Self { n, a, c }
    }

    fn c_times(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|e| self.c[e * self.n..(e + 1) * self.n].iter().zip(w).map(|(c, x)| c * x).sum())
            .collect()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let cw = self.c_times(w);
        w.iter().zip(&self.a).map(|(x, a)| x * a).sum::<f64>() - 0.5 * w.iter().zip(&cw).map(|(x, y)| x * y).sum::<f64>()
    }

    // Equal to the simplex gradient up to a multiple of the all-ones vector,
    // which the projection ignores.
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let cw = self.c_times(w);
        self.a.iter().zip(&cw).map(|(a, c)| a - c).collect()
    }

    fn curvature(&self, d: &[f64]) -> f64 {
        let cd = self.c_times(d);
        -d.iter().zip(&cd).map(|(x, y)| x * y).sum::<f64>()
    }

    fn step_size(&self) -> f64 {
        let scale = self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            1.0 / (scale * self.n as f64)
        } else {
            1.0
        }
    }
}

fn stationarity(w: &[f64], g: &[f64]) -> f64 {
    let shifted: Vec<f64> = w.iter().zip(g).map(|(x, d)| x - d).collect();
    let p = project_simplex(&shifted);
    p.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Best constant convex combination in hindsight, by projected gradient descent
/// with exact line search. When no combination beats the best expert, the best
/// expert's vertex is returned so that the oracle never loses to it.
pub fn oracle_best_constant(terms: &[MixtureTerms]) -> Result<BestConstant> {
    if terms.is_empty() {
        return Err(Error::Empty("daily score terms"));
    }
    let q = Quadratic::from_terms(terms);
    let n = q.n;
    let step = q.step_size();
    let mut w = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut converged = n == 1;
    while !converged && iterations < MAX_ITERATIONS {
        let g = q.gradient(&w);
        if stationarity(&w, &g) <= STATIONARITY_TOL {
            converged = true;
            break;
        }
        let shifted: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x - step * d).collect();
        let target = project_simplex(&shifted);
        let d: Vec<f64> = target.iter().zip(&w).map(|(a, b)| a - b).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let kappa = q.curvature(&d);
        let gamma = if kappa > 0.0 { (-slope / kappa).clamp(0.0, 1.0) } else { 1.0 };
        let next: Vec<f64> = w.iter().zip(&d).map(|(x, dx)| (x + gamma * dx).max(0.0)).collect();
        let total: f64 = next.iter().sum();
        let next: Vec<f64> = next.into_iter().map(|x| x / total).collect();
        iterations += 1;
        if q.value(&next) > q.value(&w) || gamma == 0.0 {
            // no further progress is representable
            converged = stationarity(&w, &q.gradient(&w)) <= STATIONARITY_TOL.sqrt();
            break;
        }
        w = next;
    }

    let losses_of = |w: &[f64]| ScoreSeries::from_losses(terms.iter().map(|day| day.crps(w)));
    let mut losses = losses_of(&w);
    let vertex_totals: Vec<f64> = (0..n)
        .map(|e| terms.iter().map(|day| day.expert_crps(e)).sum())
        .collect();
    let best = argmin(&vertex_totals);
    let mut weights = WeightVector::new(w)?;
    if losses.total() > vertex_totals[best] || n == 1 {
        weights = WeightVector::indicator(n, best);
        losses = losses_of(weights.as_slice());
    }
    Ok(BestConstant {
        weights,
        losses,
        iterations,
        converged,
    })
}

/// Cumulative regret `sum_{s <= t} (forecaster_s - oracle_s)` for every `t`.
pub fn regret(forecaster: &ScoreSeries, oracle: &ScoreSeries) -> Result<Vec<f64>> {
    if forecaster.len() != oracle.len() {
        return Err(Error::LengthMismatch {
            what: "oracle losses",
            expected: forecaster.len(),
            actual: oracle.len(),
        });
    }
    Ok(forecaster
        .cumulative()
        .iter()
        .zip(oracle.cumulative())
        .map(|(f, o)| f - o)
        .collect())
}

/// Regret bound of the exponentially weighted average forecaster with losses
/// in `[0, B]`: `ln(E)/eta + eta T B^2 / 8`.
pub fn ewa_bound(n_experts: usize, n_days: usize, eta: f64, range: f64) -> f64 {
    (n_experts as f64).ln() / eta + eta * n_days as f64 * range * range / 8.0
}

/// Learning rate minimizing [`ewa_bound`].
pub fn ewa_optimal_eta(n_experts: usize, n_days: usize, range: f64) -> f64 {
    (8.0 * (n_experts as f64).ln() / (n_days as f64 * range * range)).sqrt()
}
