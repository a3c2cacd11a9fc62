//! Normal distribution left-truncated at zero.

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `ln Phi(z)`, accurate far in the lower tail.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        let u = 1.0 / (z * z);
        let series = 1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u * (1.0 - 9.0 * u))));
        -0.5 * z * z - (-z).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Solves `ln(1 - Phi(z)) = target` for `z >= start` when the tail
/// probabilities underflow.
fn upper_tail_inverse(target: f64, start: f64) -> f64 {
    let mut z = start;
    for _ in 0..100 {
        let ln_tail = ln_norm_cdf(-z);
        let slope = -(-0.5 * z * z - LN_SQRT_2PI - ln_tail).exp();
        let step = (ln_tail - target) / slope;
        z -= step;
        if step.abs() <= 1e-15 * z.abs() {
            break;
        }
    }
    z
}

// Beyond this many standard deviations the tails are handled in log space.
const DEEP_TAIL: f64 = 30.0;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("scale must be positive, got {sigma}")))
    }
}

/// CDF at `x` of `N(mu, sigma^2)` truncated to `[0, inf)`.
pub fn truncnorm_cdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let a = -mu / sigma;
    let b = (x - mu) / sigma;
    let value = if a > DEEP_TAIL {
        1.0 - (ln_norm_cdf(-b) - ln_norm_cdf(-a)).exp()
    } else if a > 0.0 {
        // both points in the upper tail: work with survival functions
        1.0 - norm_cdf(-b) / norm_cdf(-a)
    } else {
        (norm_cdf(b) - norm_cdf(a)) / norm_cdf(-a)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Quantile of order `tau` of `N(mu, sigma^2)` truncated to `[0, inf)`; order 0
/// gives the truncation point.
pub fn truncnorm_quantile(tau: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidLevel(tau));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let a = -mu / sigma;
    let z = if a > DEEP_TAIL {
        let target = (-tau).ln_1p() + ln_norm_cdf(-a);
        upper_tail_inverse(target, a - (-tau).ln_1p() / a)
    } else if a > 0.0 {
        -norm_quantile((1.0 - tau) * norm_cdf(-a))
    } else {
        norm_quantile(norm_cdf(a) + tau * norm_cdf(-a))
    };
    Ok((mu + sigma * z).max(0.0))
}

/// Log density at `x >= 0` of the truncated normal.
pub fn truncnorm_ln_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = (x - mu) / sigma;
    -0.5 * z * z - LN_SQRT_2PI - sigma.ln() - ln_norm_cdf(mu / sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_from_truncation_is_normal() {
        let q = truncnorm_quantile(0.975, 50.0, 1.0).unwrap();
        assert!((q - (50.0 + norm_quantile(0.975))).abs() < 1e-9);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn roundtrip() {
        for &(mu, sigma) in &[(1.0, 1.0), (-2.0, 0.5), (3.0, 0.2), (-8.0, 1.0), (-60.0, 1.0), (-5.0, 0.1)] {
            for &tau in &[0.01, 0.2, 0.5, 0.9, 0.999] {
                let x = truncnorm_quantile(tau, mu, sigma).unwrap();
                let back = truncnorm_cdf(x, mu, sigma).unwrap();
                assert!((back - tau).abs() < 1e-9, "mu={mu} sigma={sigma} tau={tau}: {back}");
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(truncnorm_cdf(1.0, 0.0, 0.0).is_err());
        assert!(truncnorm_quantile(1.0, 0.0, 1.0).is_err());
        assert_eq!(truncnorm_cdf(-1.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ln_cdf_tail_is_continuous() {
        let near = ln_norm_cdf(-29.999_999);
        let far = ln_norm_cdf(-30.000_001);
        assert!((near - far).abs() < 1e-4);
        assert!(ln_norm_cdf(-100.0).is_finite());
    }
}
