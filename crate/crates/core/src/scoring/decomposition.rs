//! Reliability / resolution / uncertainty decomposition of the mean CRPS.
//!
//! Bin accumulation over the `M + 1` intervals delimited by the sorted members
//! `z_1 <= ... <= z_M` of each forecast. For every interval `i` the widths lying
//! below (`alpha_i`) and above (`beta_i`) the observation are averaged over cases;
//! with `g_i = alpha_i + beta_i`, `o_i = beta_i / g_i` and the forecast level
//! `tau_i` of the interval,
//!
//! ```text
//! RELI = sum_i g_i (o_i - tau_i)^2
//! CRPS_pot = sum_i g_i o_i (1 - o_i)
//! RES = UNC - CRPS_pot
//! ```
//!
//! and the mean CRPS equals `RELI - RES + UNC` by construction. The outlier bins
//! use the frequencies of observations below `z_1` and above `z_M`.
//!
//! Levels are `i / M` for random samples and the cumulative jump weights for
//! other CDFs, so quantile forecasts sharing the same orders are accepted too.

use crate::error::{Error, Result};
use crate::stepwise_cdf::StepwiseCdf;

const LEVEL_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrpsDecomposition {
    pub reli: f64,
    pub res: f64,
    pub unc: f64,
    pub mean_crps: f64,
}

impl CrpsDecomposition {
    /// CRPS of the forecast recalibrated on the verification sample.
    pub fn potential(&self) -> f64 {
        self.unc - self.res
    }
}

/// Additive accumulator of the interval widths; windows are handled with
/// [`HersbachAccumulator::add`] and [`HersbachAccumulator::remove`].
#[derive(Debug, Clone, PartialEq)]
pub struct HersbachAccumulator {
    levels: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    below: f64,
    above: f64,
    cases: f64,
}

impl HersbachAccumulator {
    /// `levels` has `M + 1` entries starting at 0 and ending at 1.
    pub fn new(levels: Vec<f64>) -> Self {
        let n = levels.len();
        Self {
            levels,
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
            below: 0.0,
            above: 0.0,
            cases: 0.0,
        }
    }

    /// Accumulator sized for the members of `cdf`.
    pub fn for_forecast(cdf: &StepwiseCdf) -> Self {
        Self::new(cdf.member_levels().1)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cases(&self) -> usize {
        self.cases.round() as usize
    }

    fn levels_match(&self, other: &[f64]) -> bool {
        self.levels.len() == other.len()
            && self
                .levels
                .iter()
                .zip(other)
                .all(|(a, b)| (a - b).abs() <= LEVEL_MATCH_TOL)
    }

    fn apply(&mut self, members: &[f64], y: f64, sign: f64) {
        let m = members.len();
        if y < members[0] {
            self.beta[0] += sign * (members[0] - y);
            self.below += sign;
        }
        if y > members[m - 1] {
            self.alpha[m] += sign * (y - members[m - 1]);
            self.above += sign;
        }
        for i in 1..m {
            let (lo, hi) = (members[i - 1], members[i]);
            if y >= hi {
                self.alpha[i] += sign * (hi - lo);
            } else if y <= lo {
                self.beta[i] += sign * (hi - lo);
            } else {
                self.alpha[i] += sign * (y - lo);
                self.beta[i] += sign * (hi - y);
            }
        }
        self.cases += sign;
    }

    fn checked_members(&self, cdf: &StepwiseCdf) -> Result<Vec<f64>> {
        let (members, levels) = cdf.member_levels();
        if !self.levels_match(&levels) {
            return Err(Error::InvalidParameter(format!(
                "forecast has {} members with different levels than the accumulator ({} members)",
                members.len(),
                self.levels.len() - 1
            )));
        }
        Ok(members)
    }

    pub fn add(&mut self, cdf: &StepwiseCdf, y: f64) -> Result<()> {
        let members = self.checked_members(cdf)?;
        self.apply(&members, y, 1.0);
        Ok(())
    }

    pub fn remove(&mut self, cdf: &StepwiseCdf, y: f64) -> Result<()> {
        let members = self.checked_members(cdf)?;
        self.apply(&members, y, -1.0);
        Ok(())
    }

    /// Adds one case given sorted members; `members.len() + 1` must equal the
    /// number of levels.
    pub fn add_members(&mut self, members: &[f64], y: f64) {
        debug_assert_eq!(members.len() + 1, self.levels.len());
        self.apply(members, y, 1.0);
    }

    /// `(reli, potential crps, mean crps)` over the accumulated cases.
    pub fn terms(&self) -> (f64, f64, f64) {
        if self.cases < 0.5 {
            return (0.0, 0.0, 0.0);
        }
        let n = self.cases;
        let last = self.levels.len() - 1;
        let mut reli = 0.0;
        let mut pot = 0.0;
        let mut mean = 0.0;

        let beta0 = self.beta[0] / n;
        let o0 = (self.below / n).clamp(0.0, 1.0);
        reli += beta0 * o0;
        pot += beta0 * (1.0 - o0);
        mean += beta0;

        let alpha_last = self.alpha[last] / n;
        let o_last = (1.0 - self.above / n).clamp(0.0, 1.0);
        reli += alpha_last * (1.0 - o_last);
        pot += alpha_last * o_last;
        mean += alpha_last;

        for i in 1..last {
            let a = self.alpha[i] / n;
            let b = self.beta[i] / n;
            let g = a + b;
            let tau = self.levels[i];
            mean += a * tau * tau + b * (1.0 - tau) * (1.0 - tau);
            if g > 0.0 {
                let o = b / g;
                reli += g * (o - tau) * (o - tau);
                pot += g * o * (1.0 - o);
            }
        }
        (reli.max(0.0), pot, mean)
    }

    /// Reliability term of the accumulated cases.
    pub fn reliability(&self) -> f64 {
        self.terms().0
    }
}

/// Uncertainty term: CRPS of the observations' own empirical distribution,
/// averaged over the observations.
pub fn uncertainty(observations: &[f64]) -> f64 {
    let mut sorted = observations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let p = (k + 1) as f64 / n;
            p * (1.0 - p) * (w[1] - w[0])
        })
        .sum()
}

/// Decomposition of the mean CRPS of a series of forecasts sharing the same
/// member levels (same `M` for samples).
pub fn hersbach_decompose(forecasts: &[StepwiseCdf], observations: &[f64]) -> Result<CrpsDecomposition> {
    if forecasts.is_empty() {
        return Err(Error::Empty("forecast series"));
    }
    if forecasts.len() != observations.len() {
        return Err(Error::LengthMismatch {
            what: "observations",
            expected: forecasts.len(),
            actual: observations.len(),
        });
    }
    let mut acc = HersbachAccumulator::for_forecast(&forecasts[0]);
    for (cdf, &y) in forecasts.iter().zip(observations) {
        acc.add(cdf, y)?;
    }
    let (reli, pot, mean_crps) = acc.terms();
    let unc = uncertainty(observations);
    Ok(CrpsDecomposition {
        reli,
        res: unc - pot,
        unc,
        mean_crps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::crps;

    #[test]
    fn identity_on_small_series() {
        let forecasts = vec![
            StepwiseCdf::from_sample(&[0.0, 1.0, 2.0]).unwrap(),
            StepwiseCdf::from_sample(&[1.0, 1.5, 4.0]).unwrap(),
            StepwiseCdf::from_sample(&[-1.0, 0.5, 0.5]).unwrap(),
        ];
        let obs = [1.2, 5.0, -2.0];
        let d = hersbach_decompose(&forecasts, &obs).unwrap();
        let direct: f64 = forecasts.iter().zip(&obs).map(|(f, &y)| crps(f, y)).sum::<f64>() / 3.0;
        assert!((d.mean_crps - direct).abs() < 1e-12);
        assert!((d.reli - d.res + d.unc - direct).abs() < 1e-12);
    }

    #[test]
    fn mixed_member_counts_rejected() {
        let forecasts = vec![
            StepwiseCdf::from_sample(&[0.0, 1.0]).unwrap(),
            StepwiseCdf::from_sample(&[0.0, 1.0, 2.0]).unwrap(),
        ];
        assert!(hersbach_decompose(&forecasts, &[0.5, 0.5]).is_err());
        assert!(matches!(hersbach_decompose(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn climatological_forecast_has_no_resolution() {
        let obs: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 7.0).collect();
        let clim = StepwiseCdf::from_sample(&obs).unwrap();
        let forecasts = vec![clim; obs.len()];
        let d = hersbach_decompose(&forecasts, &obs).unwrap();
        assert!(d.res.abs() < 1e-12, "res = {}", d.res);
        assert!(d.reli.abs() < 1e-12, "reli = {}", d.reli);
    }

    #[test]
    fn window_removal_restores_state() {
        let a = StepwiseCdf::from_sample(&[0.0, 1.0, 2.0]).unwrap();
        let b = StepwiseCdf::from_sample(&[0.5, 1.0, 3.0]).unwrap();
        let mut acc = HersbachAccumulator::for_forecast(&a);
        acc.add(&a, 0.7).unwrap();
        let before = acc.terms();
        acc.add(&b, 2.0).unwrap();
        acc.remove(&b, 2.0).unwrap();
        let after = acc.terms();
        assert!((before.0 - after.0).abs() < 1e-15);
        assert!((before.2 - after.2).abs() < 1e-15);
    }

    #[test]
    fn uncertainty_of_two_points() {
        // Empirical CDF of {0, 2} scored against its own points: 0.5 each.
        assert!((uncertainty(&[0.0, 2.0]) - 0.5).abs() < 1e-15);
    }
}
