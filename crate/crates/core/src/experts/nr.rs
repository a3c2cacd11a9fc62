//! Non-homogeneous regression on the square root of the variable.
//!
//! Given the mean `xbar_t` and standard deviation `sd_t` of the square roots of
//! an ensemble's members, the square root of the observation is modelled as
//! `N(a + b xbar_t, c^2 + d^2 sd_t)` truncated at zero. Parameters maximize the
//! log-likelihood over a training window of past days.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::scoring::Window;
use crate::stepwise_cdf::StepwiseCdf;

use super::truncnorm::{truncnorm_ln_pdf, truncnorm_quantile};

/// Fewer training days than this keep the previous parameters.
pub const MIN_TRAINING_DAYS: usize = 8;
/// Floor of the predictive variance.
pub const MIN_VARIANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 2000;
pub const REL_TOL: f64 = 1e-10;

/// Orders of the NR forecast quantiles: `0, 0.01, ..., 0.99, 0.999`.
pub fn nr_orders() -> Arc<[f64]> {
    static ORDERS: OnceLock<Arc<[f64]>> = OnceLock::new();
    ORDERS
        .get_or_init(|| (0..100).map(|i| i as f64 / 100.0).chain([0.999]).collect())
        .clone()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for NrParams {
    /// Raw ensemble statistics taken at face value.
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        }
    }
}

impl NrParams {
    pub fn location(&self, xbar: f64) -> f64 {
        self.a + self.b * xbar
    }

    pub fn scale(&self, sd: f64) -> f64 {
        (self.c * self.c + self.d * self.d * sd).max(MIN_VARIANCE).sqrt()
    }

    fn from_slice(p: &[f64]) -> Self {
        Self {
            a: p[0],
            b: p[1],
            c: p[2],
            d: p[3],
        }
    }
}

/// One training day: square-root-space ensemble mean and spread, and the
/// observation (not square-rooted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingDay {
    pub xbar: f64,
    pub sd: f64,
    pub y: f64,
}

impl TrainingDay {
    /// Statistics of the square roots of the members of `ensemble`.
    pub fn from_ensemble(ensemble: &StepwiseCdf, y: f64) -> Self {
        let (xbar, sd) = sqrt_moments(ensemble);
        Self { xbar, sd, y }
    }
}

/// Mean and standard deviation of the square roots of the members of a CDF.
pub fn sqrt_moments(cdf: &StepwiseCdf) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (&x, &p) in cdf.locations().iter().zip(cdf.weights()) {
        let r = x.max(0.0).sqrt();
        mean += p * r;
        second += p * r * r;
    }
    (mean, (second - mean * mean).max(0.0).sqrt())
}

pub fn nr_log_likelihood(params: &NrParams, data: &[TrainingDay]) -> f64 {
    data.iter()
        .map(|d| truncnorm_ln_pdf(d.y.max(0.0).sqrt(), params.location(d.xbar), params.scale(d.sd)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrFit {
    pub params: NrParams,
    pub log_likelihood: f64,
    pub start_log_likelihood: f64,
    pub iterations: usize,
    /// `false` when the iteration cap was reached; `params` is the best vertex.
    pub converged: bool,
}

/// Starting point `(0, 1, sd of sqrt-space residuals, 0.1)`.
pub fn nr_start(data: &[TrainingDay]) -> NrParams {
    let residuals: Vec<f64> = data.iter().map(|d| d.y.max(0.0).sqrt() - d.xbar).collect();
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    NrParams {
        a: 0.0,
        b: 1.0,
        c: var.sqrt(),
        d: 0.1,
    }
}

/// Maximum-likelihood fit by Nelder-Mead from [`nr_start`].
pub fn nr_fit(data: &[TrainingDay]) -> Result<NrFit> {
    if data.len() < MIN_TRAINING_DAYS {
        return Err(Error::InvalidParameter(format!(
            "NR fit needs at least {MIN_TRAINING_DAYS} training days, got {}",
            data.len()
        )));
    }
    let start = nr_start(data);
    let objective = |p: &[f64]| {
        let ll = nr_log_likelihood(&NrParams::from_slice(p), data);
        if ll.is_nan() {
            f64::INFINITY
        } else {
            -ll
        }
    };
    let x0 = [start.a, start.b, start.c, start.d];
    let result = nelder_mead(objective, &x0, MAX_ITERATIONS, REL_TOL);
    let mut params = NrParams::from_slice(&result.x);
    params.c = params.c.abs();
    params.d = params.d.abs();
    Ok(NrFit {
        params,
        log_likelihood: -result.value,
        start_log_likelihood: -objective(&x0),
        iterations: result.iterations,
        converged: result.converged,
    })
}

/// Squared truncated-normal quantiles at the NR orders.
pub fn nr_forecast(params: &NrParams, xbar: f64, sd: f64) -> Result<StepwiseCdf> {
    let mu = params.location(xbar);
    let sigma = params.scale(sd);
    let orders = nr_orders();
    let values = orders
        .iter()
        .map(|&tau| truncnorm_quantile(tau, mu, sigma).map(|q| q * q))
        .collect::<Result<Vec<f64>>>()?;
    StepwiseCdf::from_quantiles_shared(&values, orders)
}

/// NR post-processing of an ensemble series: the forecast of day `t` uses
/// parameters fitted on the days of `window` before `t`.
pub fn nr_expert(ensembles: &[StepwiseCdf], observations: &[f64], window: Window) -> Result<Vec<StepwiseCdf>> {
    if ensembles.len() != observations.len() {
        return Err(Error::LengthMismatch {
            what: "observations",
            expected: ensembles.len(),
            actual: observations.len(),
        });
    }
    let days: Vec<TrainingDay> = ensembles
        .iter()
        .zip(observations)
        .map(|(e, &y)| TrainingDay::from_ensemble(e, y))
        .collect();
    let mut params = NrParams::default();
    let mut out = Vec::with_capacity(days.len());
    for t in 1..=days.len() {
        let range = window.range(t);
        if range.len() >= MIN_TRAINING_DAYS {
            params = nr_fit(&days[range])?.params;
        }
        out.push(nr_forecast(&params, days[t - 1].xbar, days[t - 1].sd)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value at the start of every iteration.
    pub trace: Vec<f64>,
}

/// Minimizes `f` with the Nelder-Mead simplex method (standard coefficients).
/// The best value never increases between iterations.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], max_iter: usize, rel_tol: f64) -> NelderMeadResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { 0.1 * x[i].abs() } else { 0.1 };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut trace = Vec::new();

    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[n]);
        trace.push(best);
        if (worst - best).abs() <= rel_tol * (best.abs() + worst.abs()) + 1e-300 {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|x| x[k]).sum::<f64>() / n as f64)
            .collect();
        let toward = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (w - c))
                .collect()
        };
        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = toward(-0.5);
                let v = f(&c);
                (c, v)
            } else {
                let c = toward(0.5);
                let v = f(&c);
                (c, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let anchor = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = anchor.iter().zip(&simplex[i]).map(|(a, x)| a + 0.5 * (x - a)).collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
        trace,
    }
}
