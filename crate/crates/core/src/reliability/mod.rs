//! Rank histograms and flatness tests.
//!
//! The rank of an observation among the `k - 1` members (or quantiles) of its
//! forecast is uniform on `1..=k` when the forecast is reliable. Deviations from
//! flatness are measured by `delta_i = (n_i - n0) / sqrt(n0)` with `n0 = n / k`;
//! `|delta|^2` is the chi-square statistic with `k - 1` degrees of freedom, and
//! its projections on unit contrasts orthogonal to the constant vector (slope,
//! convexity, wave) are asymptotically independent chi-square(1) variables.

mod fdr;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub use fdr::{benjamini_hochberg, FdrDecision, DEFAULT_ALPHA};

use crate::error::{Error, Result};
use crate::stepwise_cdf::{Provenance, StepwiseCdf, LEVEL_TOL};

/// Orders of the nine forecast deciles.
pub const DECILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Expected count per bin below which the chi-square approximation is flagged.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

fn draw_rank<R: Rng + ?Sized>(below: usize, ties: usize, rng: &mut R) -> usize {
    if ties == 0 {
        below + 1
    } else {
        below + 1 + rng.random_range(0..=ties)
    }
}

/// Rank of `y` among the members of `forecast`, in `1..=M + 1`.
///
/// Ties between `y` and members are broken uniformly among the admissible ranks.
pub fn rank_of_observation<R: Rng + ?Sized>(forecast: &StepwiseCdf, y: f64, rng: &mut R) -> usize {
    let members = forecast.members();
    let below = members.partition_point(|&z| z < y);
    let ties = members[below..].partition_point(|&z| z <= y);
    draw_rank(below, ties, rng)
}

/// Rank of an observation among the quantiles of orders `levels`, given the
/// forecast CDF just below (`cdf_below = F(y-)`) and at (`cdf_at = F(y)`) the
/// observation. The quantile of order `tau` lies strictly below `y` when
/// `F(y-) >= tau` and equals `y` when `F(y-) < tau <= F(y)`.
pub fn rank_among_levels<R: Rng + ?Sized>(cdf_below: f64, cdf_at: f64, levels: &[f64], rng: &mut R) -> usize {
    let below = levels.iter().filter(|&&tau| tau <= cdf_below + LEVEL_TOL).count();
    let ties = levels
        .iter()
        .filter(|&&tau| tau > cdf_below + LEVEL_TOL && tau <= cdf_at + LEVEL_TOL)
        .count();
    draw_rank(below, ties, rng)
}

/// Rank of `y` among the nine deciles of `forecast`, in `1..=10`.
///
/// A quantile forecast whose orders include the deciles uses its own decile
/// values; other CDFs use their generalized inverse.
pub fn decile_rank<R: Rng + ?Sized>(forecast: &StepwiseCdf, y: f64, rng: &mut R) -> usize {
    if let Provenance::QuantileSet { orders } = forecast.provenance() {
        let positions: Vec<usize> = DECILES
            .iter()
            .filter_map(|d| orders.iter().position(|o| (o - d).abs() < 1e-9))
            .collect();
        if positions.len() == DECILES.len() {
            let deciles: Vec<f64> = positions.iter().map(|&i| forecast.locations()[i]).collect();
            let below = deciles.partition_point(|&q| q < y);
            let ties = deciles[below..].partition_point(|&q| q <= y);
            return draw_rank(below, ties, rng);
        }
    }
    rank_among_levels(forecast.evaluate_left(y), forecast.evaluate(y), &DECILES, rng)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankHistogram {
    counts: Vec<u64>,
}

impl RankHistogram {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a rank histogram needs at least 2 bins, got {}",
                counts.len()
            )));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::Empty("rank histogram"));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Expected count per bin under flatness.
    pub fn expected(&self) -> f64 {
        self.total() as f64 / self.k() as f64
    }
}

/// Counts of `ranks` (each in `1..=k`).
pub fn build_histogram(ranks: &[usize], k: usize) -> Result<RankHistogram> {
    if ranks.is_empty() {
        return Err(Error::Empty("ranks"));
    }
    let mut counts = vec![0u64; k];
    for &rank in ranks {
        if rank == 0 || rank > k {
            return Err(Error::RankOutOfRange { rank, k });
        }
        counts[rank - 1] += 1;
    }
    RankHistogram::from_counts(counts)
}

/// `delta_i = (n_i - n0) / sqrt(n0)`.
pub fn delta_vector(h: &RankHistogram) -> Vec<f64> {
    let n0 = h.expected();
    let root = n0.sqrt();
    h.counts.iter().map(|&c| (c as f64 - n0) / root).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Test {
    pub stat: f64,
    pub pvalue: f64,
    /// Expected count per bin below [`MIN_EXPECTED_COUNT`].
    pub small_counts: bool,
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(stat: f64, df: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(stat).clamp(0.0, 1.0)
}

/// Chi-square test of flatness.
///
/// The statistic `sum_i (k n_i - n)^2 / (n k)` is accumulated in integers, so
/// it does not depend on the order of the bins.
pub fn chi2_test(h: &RankHistogram) -> Chi2Test {
    let k = h.k() as i128;
    let n = h.total() as i128;
    let squares: i128 = h.counts.iter().map(|&c| (k * c as i128 - n).pow(2)).sum();
    let stat = if n == 0 { 0.0 } else { squares as f64 / (n as f64 * k as f64) };
    Chi2Test {
        stat,
        pvalue: chi2_sf(stat, h.k() - 1),
        small_counts: h.expected() < MIN_EXPECTED_COUNT,
    }
}

/// Slope, convexity and wave contrasts for `k` bins: unit vectors orthogonal to
/// each other and to the constant vector.
#[derive(Debug, Clone, PartialEq)]
pub struct JpBasis {
    pub slope: Vec<f64>,
    pub convexity: Vec<f64>,
    pub wave: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_component(v: &mut [f64], unit: &[f64]) {
    let c = dot(v, unit);
    v.iter_mut().zip(unit).for_each(|(x, u)| *x -= c * u);
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Gram-Schmidt of `v` against the constant direction and `against`, then normalized.
fn orthonormalize(v: Vec<f64>, against: &[&[f64]]) -> Vec<f64> {
    let k = v.len();
    let constant = vec![1.0 / (k as f64).sqrt(); k];
    let mut v = v;
    // two passes keep the result orthogonal to rounding level
    for _ in 0..2 {
        remove_component(&mut v, &constant);
        for u in against {
            remove_component(&mut v, u);
        }
    }
    normalized(v)
}

impl JpBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k < 4 {
            return Err(Error::InvalidParameter(format!("shape contrasts need k >= 4 bins, got {k}")));
        }
        let center = (k - 1) as f64 / 2.0;
        let slope = orthonormalize((0..k).map(|i| i as f64 - center).collect(), &[]);
        let convexity = orthonormalize((0..k).map(|i| (i as f64 - center).powi(2)).collect(), &[&slope]);
        let wave_raw: Vec<f64> = (0..k)
            .map(|i| {
                if i == 0 || i == k - 1 {
                    0.0
                } else {
                    (2.0 * std::f64::consts::PI * i as f64 / (k - 1) as f64).sin()
                }
            })
            .collect();
        let wave = orthonormalize(wave_raw, &[&slope]);
        Ok(Self { slope, convexity, wave })
    }

    pub fn k(&self) -> usize {
        self.slope.len()
    }

    pub fn vectors(&self) -> [&[f64]; 3] {
        [&self.slope, &self.convexity, &self.wave]
    }

    /// Jolliffe-Primo tests of `h` against this basis.
    pub fn test(&self, h: &RankHistogram) -> Result<FlatnessReport> {
        if h.k() != self.k() {
            return Err(Error::LengthMismatch {
                what: "rank histogram bins",
                expected: self.k(),
                actual: h.k(),
            });
        }
        let delta = delta_vector(h);
        let chi2 = chi2_test(h);
        let shape = |u: &[f64]| {
            let stat = dot(u, &delta).powi(2);
            ShapeTest {
                stat,
                pvalue: chi2_sf(stat, 1),
            }
        };
        Ok(FlatnessReport {
            chi2_stat: chi2.stat,
            chi2_pvalue: chi2.pvalue,
            slope: shape(&self.slope),
            convexity: shape(&self.convexity),
            wave: shape(&self.wave),
            small_counts: chi2.small_counts,
        })
    }
}

pub fn jp_basis(k: usize) -> Result<JpBasis> {
    JpBasis::new(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeTest {
    /// Squared projection of the deviation vector on the contrast.
    pub stat: f64,
    pub pvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessReport {
    pub chi2_stat: f64,
    pub chi2_pvalue: f64,
    pub slope: ShapeTest,
    pub convexity: ShapeTest,
    pub wave: ShapeTest,
    pub small_counts: bool,
}

impl FlatnessReport {
    /// p-values of the slope, convexity and wave tests.
    pub fn shape_pvalues(&self) -> [f64; 3] {
        [self.slope.pvalue, self.convexity.pvalue, self.wave.pvalue]
    }
}

pub fn jp_test(h: &RankHistogram) -> Result<FlatnessReport> {
    JpBasis::new(h.k())?.test(h)
}

/// Flatness decision per location: the three shape tests of every location
/// form one Benjamini-Hochberg family at level `alpha`; a location is flat when
/// none of its tests is rejected.
pub fn flatness_decisions(reports: &[FlatnessReport], alpha: f64) -> Vec<bool> {
    let pvalues: Vec<f64> = reports.iter().flat_map(FlatnessReport::shape_pvalues).collect();
    let decision = FdrDecision::new(pvalues, alpha);
    (0..reports.len())
        .map(|l| !decision.rejected()[3 * l..3 * l + 3].iter().any(|&r| r))
        .collect()
}

/// Fraction of locations whose rank histogram is deemed flat.
pub fn flat_proportion(histograms: &[RankHistogram], alpha: f64) -> Result<f64> {
    if histograms.is_empty() {
        return Err(Error::Empty("rank histograms"));
    }
    let mut bases: Vec<JpBasis> = Vec::new();
    let mut reports = Vec::with_capacity(histograms.len());
    for h in histograms {
        let basis = match bases.iter().position(|b| b.k() == h.k()) {
            Some(i) => &bases[i],
            None => {
                bases.push(JpBasis::new(h.k())?);
                bases.last().unwrap()
            }
        };
        reports.push(basis.test(h)?);
    }
    let flat = flatness_decisions(&reports, alpha);
    Ok(flat.iter().filter(|&&f| f).count() as f64 / flat.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranks_at_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = StepwiseCdf::from_sample(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(rank_of_observation(&f, 0.0, &mut rng), 1);
        assert_eq!(rank_of_observation(&f, 9.0, &mut rng), 4);
        assert_eq!(rank_of_observation(&f, 2.5, &mut rng), 3);
    }

    #[test]
    fn tied_sample_members_count_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = StepwiseCdf::from_sample(&[1.0, 1.0, 3.0]).unwrap();
        let ranks: Vec<usize> = (0..200).map(|_| rank_of_observation(&f, 1.0, &mut rng)).collect();
        assert!(ranks.iter().all(|r| (1..=3).contains(r)));
        for r in 1..=3 {
            assert!(ranks.contains(&r));
        }
    }

    #[test]
    fn decile_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let f = StepwiseCdf::from_quantiles(&values, &DECILES).unwrap();
        assert_eq!(decile_rank(&f, 0.5, &mut rng), 1);
        assert_eq!(decile_rank(&f, 4.5, &mut rng), 5);
        assert_eq!(decile_rank(&f, 10.0, &mut rng), 10);
        let r = decile_rank(&f, 4.0, &mut rng);
        assert!(r == 4 || r == 5);
    }

    #[test]
    fn histogram_and_delta() {
        let h = build_histogram(&[1, 1, 2], 2).unwrap();
        assert_eq!(h.counts(), &[2, 1]);
        assert!(build_histogram(&[], 2).is_err());
        assert!(matches!(build_histogram(&[3], 2), Err(Error::RankOutOfRange { rank: 3, k: 2 })));
        let h = RankHistogram::from_counts(vec![2, 0]).unwrap();
        assert_eq!(delta_vector(&h), vec![1.0, -1.0]);
    }

    #[test]
    fn flat_histogram_never_rejects() {
        let h = RankHistogram::from_counts(vec![20; 10]).unwrap();
        let r = jp_test(&h).unwrap();
        assert_eq!(r.chi2_stat, 0.0);
        assert_eq!(r.chi2_pvalue, 1.0);
        assert_eq!(r.shape_pvalues(), [1.0; 3]);
    }

    #[test]
    fn basis_k5() {
        let b = jp_basis(5).unwrap();
        let root10 = 10f64.sqrt();
        for (s, e) in b.slope.iter().zip([-2.0, -1.0, 0.0, 1.0, 2.0]) {
            assert!((s - e / root10).abs() < 1e-15);
        }
        // centered squares 4,1,0,1,4 minus their mean 2
        let c: Vec<f64> = [2.0, -1.0, -2.0, -1.0, 2.0].iter().map(|v| v / 14f64.sqrt()).collect();
        for (x, e) in b.convexity.iter().zip(c) {
            assert!((x - e).abs() < 1e-15);
        }
        assert!(jp_basis(3).is_err());
    }

    #[test]
    fn sloped_histogram_rejects_slope() {
        let h = RankHistogram::from_counts((1..=10).map(|i| 30 * i).collect()).unwrap();
        let r = jp_test(&h).unwrap();
        assert!(r.slope.pvalue < 1e-6);
    }
}
