//! Weighting rules applied at one time step, given statistics of the past.

use crate::error::{Error, Result};

use super::weights::{argmin, WeightVector};

/// Weights inversely proportional to each expert's mean past CRPS.
///
/// Experts with a zero mean share all the weight equally.
pub fn inv_weights(mean_crps: &[f64]) -> WeightVector {
    let zeros: Vec<usize> = (0..mean_crps.len()).filter(|&e| mean_crps[e] <= 0.0).collect();
    if !zeros.is_empty() {
        let share = 1.0 / zeros.len() as f64;
        let mut values = vec![0.0; mean_crps.len()];
        zeros.iter().for_each(|&e| values[e] = share);
        return WeightVector::new(values).expect("equal split is on the simplex");
    }
    WeightVector::from_unnormalized(mean_crps.iter().map(|m| 1.0 / m).collect())
        .expect("positive inverse scores")
}

/// Sharpest reliable expert: among experts whose reliability term is below
/// `reli_threshold`, the one with the narrowest mean 90 % interval. Falls back to
/// the lowest mean CRPS when no expert qualifies.
pub fn sharp_select(reli: &[f64], mean_iq90: &[f64], mean_crps: &[f64], reli_threshold: f64) -> WeightVector {
    let n = reli.len();
    let mut chosen: Option<usize> = None;
    for e in 0..n {
        if reli[e] < reli_threshold && chosen.is_none_or(|c| mean_iq90[e] < mean_iq90[c]) {
            chosen = Some(e);
        }
    }
    WeightVector::indicator(n, chosen.unwrap_or_else(|| argmin(mean_crps)))
}

/// Follow the best expert: all the weight on the lowest mean past CRPS.
pub fn min_select(mean_crps: &[f64]) -> WeightVector {
    WeightVector::indicator(mean_crps.len(), argmin(mean_crps))
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("learning rate must be positive, got {eta}")))
    }
}

/// Exponentially weighted average: `w_e ∝ exp(-eta L_e)` with `L_e` the
/// cumulative CRPS of expert `e` over the window.
pub fn ewa_weights(cumulative_crps: &[f64], eta: f64) -> Result<WeightVector> {
    check_eta(eta)?;
    Ok(WeightVector::softmin(cumulative_crps, eta))
}

/// Exponentiated gradient: `w_e ∝ exp(-eta G_e)` with `G_e` the sum over the
/// window of the CRPS gradients of the aggregated forecast.
pub fn grad_weights(gradient_sums: &[f64], eta: f64) -> Result<WeightVector> {
    check_eta(eta)?;
    Ok(WeightVector::softmin(gradient_sums, eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_examples() {
        assert_eq!(inv_weights(&[0.5, 0.5]).as_slice(), &[0.5, 0.5]);
        let w = inv_weights(&[0.25, 0.75]);
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        assert_eq!(inv_weights(&[0.0, 0.3, 0.0]).as_slice(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn sharp_examples() {
        // only the second expert is reliable, even though it is wider
        let w = sharp_select(&[0.5, 0.05, 0.3], &[1.0, 3.0, 0.5], &[0.2, 0.4, 0.3], 0.1);
        assert_eq!(w.argmax(), 1);
        let w = sharp_select(&[0.01, 0.02], &[1.0, 2.0], &[0.5, 0.4], 0.1);
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
        let w = sharp_select(&[0.5, 0.6], &[1.0, 2.0], &[0.6, 0.4], 0.1);
        assert_eq!(w.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn min_examples() {
        assert_eq!(min_select(&[0.3, 0.5]).as_slice(), &[1.0, 0.0]);
        assert_eq!(min_select(&[0.3, 0.3]).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn ewa_examples() {
        assert_eq!(ewa_weights(&[0.4, 0.4, 0.4], 2.0).unwrap().as_slice(), &[1.0 / 3.0; 3]);
        let w = ewa_weights(&[0.0, 2f64.ln()], 1.0).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(ewa_weights(&[0.0, 1.0], 0.0).is_err());
        assert!(ewa_weights(&[0.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn ewa_large_eta_matches_min() {
        let losses = [3.2, 2.9, 3.0, 4.1];
        let w = ewa_weights(&losses, 1e6).unwrap();
        assert_eq!(w.argmax(), min_select(&losses).argmax());
        assert!(w[w.argmax()] >= 1.0 - 1e-9);
    }

    #[test]
    fn grad_zero_gradients_uniform() {
        assert_eq!(grad_weights(&[0.0, 0.0], 3.0).unwrap().as_slice(), &[0.5, 0.5]);
    }
}
