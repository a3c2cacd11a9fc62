use chrono::NaiveDate;
use proptest::prelude::*;

use cdfagg::aggregation::{project_simplex, WeightVector};
use cdfagg::reliability::{benjamini_hochberg, build_histogram, chi2_test, jp_basis, RankHistogram};
use cdfagg::scoring::{crps, crps_exact, hersbach_decompose};
use cdfagg::stepwise_cdf::{convex_combine, dedup_interpolate};
use cdfagg::{run_aggregation, ExpertPanel, StepwiseCdf, StrategyConfig, StrategyKind, Window};

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-50i32..50).prop_map(|v| v as f64 * 0.25), 1..12)
}

fn weights(n: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| WeightVector::from_unnormalized(v).unwrap())
}

fn experts_and_weights() -> impl Strategy<Value = (Vec<StepwiseCdf>, WeightVector)> {
    prop::collection::vec(sample(), 1..5).prop_flat_map(|samples| {
        let cdfs: Vec<StepwiseCdf> = samples.iter().map(|s| StepwiseCdf::from_sample(s).unwrap()).collect();
        let n = cdfs.len();
        (Just(cdfs), weights(n))
    })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn panel_from(days: &[Vec<Vec<f64>>], obs: &[f64]) -> ExpertPanel {
    let n = days[0].len();
    let series = (0..n)
        .map(|e| days.iter().map(|d| StepwiseCdf::from_sample(&d[e]).unwrap()).collect())
        .collect();
    let names = (0..n).map(|e| format!("e{e}")).collect();
    ExpertPanel::new("X", 24, NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), names, series, obs).unwrap()
}

/// Forecasts with a fixed member count per expert, and observations.
fn panel_data() -> impl Strategy<Value = (Vec<Vec<Vec<f64>>>, Vec<f64>)> {
    (2usize..4, 12usize..30).prop_flat_map(|(n, t)| {
        let day = prop::collection::vec(prop::collection::vec(0.0f64..10.0, 4), n);
        (prop::collection::vec(day, t), prop::collection::vec(0.0f64..10.0, t))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_is_a_valid_step_function(values in sample()) {
        let cdf = StepwiseCdf::from_sample(&values).unwrap();
        prop_assert!(cdf.locations().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(cdf.weights().iter().all(|&w| w > 0.0));
        prop_assert!((cdf.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(cdf.evaluate(cdf.min_location() - 1.0), 0.0);
        prop_assert_eq!(cdf.evaluate(cdf.max_location()), 1.0);
        let mut last = 0.0;
        for x in (-60..60).map(|i| i as f64 * 0.2) {
            let f = cdf.evaluate(x);
            prop_assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn quantile_inverts_evaluate(values in sample(), tau in 0.001f64..=1.0) {
        let cdf = StepwiseCdf::from_sample(&values).unwrap();
        let q = cdf.quantile(tau).unwrap();
        prop_assert!(cdf.evaluate(q) >= tau - 1e-12);
        prop_assert!(cdf.evaluate_left(q) < tau + 1e-12);
    }

    #[test]
    fn dedup_gives_strictly_increasing_values(values in sample()) {
        let values = sorted(values);
        let out = dedup_interpolate(&values).unwrap();
        prop_assert_eq!(out.len(), values.len());
        prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
        if values[0] == values[values.len() - 1] {
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            prop_assert!((mean - values[0]).abs() < 1e-12);
            return Ok(());
        }
        for (i, (&o, &v)) in out.iter().zip(&values).enumerate() {
            if i == 0 || values[i - 1] < v {
                prop_assert_eq!(o, v);
            }
        }
    }

    #[test]
    fn mixture_crps_equals_crps_of_combined_cdf((cdfs, w) in experts_and_weights(), y in -15.0f64..15.0) {
        let direct = crps(&convex_combine(&cdfs, &w).unwrap(), y);
        let exact = crps_exact(&cdfs, &w, y).unwrap();
        prop_assert!((direct - exact).abs() <= 1e-9 * (1.0 + direct), "{} vs {}", direct, exact);
    }

    #[test]
    fn mixture_crps_is_convex_in_the_weights((cdfs, w) in experts_and_weights(), y in -15.0f64..15.0) {
        let mix = crps_exact(&cdfs, &w, y).unwrap();
        let average: f64 = cdfs.iter().zip(w.iter()).map(|(c, wi)| wi * crps(c, y)).sum();
        prop_assert!(mix <= average + 1e-9);
    }

    #[test]
    fn projection_lands_on_the_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bh_matches_counting_formulation(p in prop::collection::vec(0.0f64..0.2, 1..30), alpha in 0.01f64..0.2) {
        let m = p.len();
        let cutoff = (1..=m)
            .filter(|&i| p.iter().filter(|&&x| x <= i as f64 * alpha / m as f64).count() >= i)
            .max()
            .unwrap_or(0);
        let expected: Vec<usize> = (0..m).filter(|&j| cutoff > 0 && p[j] <= cutoff as f64 * alpha / m as f64).collect();
        prop_assert_eq!(benjamini_hochberg(&p, alpha), expected);
    }

    #[test]
    fn jp_basis_is_orthonormal(k in 4usize..24) {
        let basis = jp_basis(k).unwrap();
        let vs = basis.vectors();
        for (i, a) in vs.iter().enumerate() {
            prop_assert!(a.iter().sum::<f64>().abs() < 1e-12);
            for (j, b) in vs.iter().enumerate() {
                let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chi2_is_permutation_invariant(counts in prop::collection::vec(0u64..500, 2..15), seed in any::<u64>()) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let mut shuffled = counts.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = chi2_test(&RankHistogram::from_counts(counts).unwrap());
        let b = chi2_test(&RankHistogram::from_counts(shuffled).unwrap());
        prop_assert_eq!(a.stat.to_bits(), b.stat.to_bits());
        prop_assert_eq!(a.pvalue.to_bits(), b.pvalue.to_bits());
    }

    #[test]
    fn histogram_counts_every_rank(ranks in prop::collection::vec(1usize..=6, 1..100)) {
        let h = build_histogram(&ranks, 6).unwrap();
        prop_assert_eq!(h.total(), ranks.len() as u64);
        for (r, &c) in h.counts().iter().enumerate() {
            prop_assert_eq!(c, ranks.iter().filter(|&&x| x == r + 1).count() as u64);
        }
    }

    #[test]
    fn decomposition_identity((days, obs) in panel_data()) {
        let cdfs: Vec<StepwiseCdf> = days.iter().map(|d| StepwiseCdf::from_sample(&d[0]).unwrap()).collect();
        let dec = hersbach_decompose(&cdfs, &obs).unwrap();
        let mean: f64 = cdfs.iter().zip(&obs).map(|(c, y)| crps(c, *y)).sum::<f64>() / obs.len() as f64;
        prop_assert!((dec.mean_crps - mean).abs() < 1e-10);
        prop_assert!((dec.reli - dec.res + dec.unc - mean).abs() < 1e-10);
        prop_assert!(dec.reli >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn weights_are_on_the_simplex_and_causal(
        (days, obs) in panel_data(),
        cut_frac in 0.3f64..0.9,
        noise in prop::collection::vec(0.0f64..10.0, 4),
    ) {
        let cut = ((days.len() as f64 * cut_frac) as usize).max(2);
        let mut future_days = days.clone();
        let mut future_obs = obs.clone();
        for t in cut..days.len() {
            for (e, members) in future_days[t].iter_mut().enumerate() {
                *members = noise.iter().map(|v| v + e as f64).collect();
            }
            future_obs[t] = noise[t % noise.len()];
        }
        let a = panel_from(&days, &obs);
        let b = panel_from(&future_days, &future_obs);
        for kind in StrategyKind::ALL {
            for window in [Window::Days(3), Window::AllPast] {
                let config = StrategyConfig::new(kind, window).with_eta(0.7);
                let ra = run_aggregation(&a, &config).unwrap();
                let rb = run_aggregation(&b, &config).unwrap();
                for w in ra.weights() {
                    prop_assert!(w.iter().all(|&x| x >= 0.0));
                    prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
                // day `cut + 1` is the first one whose data changed
                for t in 1..=cut + 1 {
                    prop_assert_eq!(ra.weights_at(t), rb.weights_at(t), "{} t={}", kind, t);
                }
            }
        }
    }
}
