/// Level at which flatness tests are controlled.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Indices (ascending) rejected by the Benjamini-Hochberg step-up rule: with
/// sorted p-values `p_(1) <= ... <= p_(m)`, reject the `i*` smallest where `i*`
/// is the largest `i` such that `p_(i) <= i alpha / m`.
pub fn benjamini_hochberg(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let cutoff = (1..=m)
        .rev()
        .find(|&i| pvalues[order[i - 1]] <= i as f64 * alpha / m as f64)
        .unwrap_or(0);
    let mut rejected = order[..cutoff].to_vec();
    rejected.sort_unstable();
    rejected
}

/// Outcome of a Benjamini-Hochberg procedure over a family of p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct FdrDecision {
    alpha: f64,
    pvalues: Vec<f64>,
    rejected: Vec<bool>,
}

impl FdrDecision {
    pub fn new(pvalues: Vec<f64>, alpha: f64) -> Self {
        let mut rejected = vec![false; pvalues.len()];
        for i in benjamini_hochberg(&pvalues, alpha) {
            rejected[i] = true;
        }
        Self {
            alpha,
            pvalues,
            rejected,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn rejected(&self) -> &[bool] {
        &self.rejected
    }

    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}
