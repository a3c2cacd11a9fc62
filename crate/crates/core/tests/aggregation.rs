use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdfagg::aggregation::{oracle_best_constant, oracle_best_expert, run_with, Oracles, PanelScores};
use cdfagg::experts::{generate_scenario, ScenarioSpec};
use cdfagg::{run_aggregation, ExpertPanel, StepwiseCdf, StrategyConfig, StrategyKind, Window};

fn random_panel(n_experts: usize, n_days: usize, seed: u64) -> ExpertPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs: Vec<f64> = (0..n_days).map(|_| rng.random_range(0.0..10.0)).collect();
    let series = (0..n_experts)
        .map(|e| {
            let m = rng.random_range(2..8);
            obs.iter()
                .map(|y| {
                    let shift = e as f64 - 1.0;
                    let v: Vec<f64> = (0..m).map(|_| y + shift + rng.random_range(-2.0..2.0)).collect();
                    StepwiseCdf::from_sample(&v).unwrap()
                })
                .collect()
        })
        .collect();
    let names = (0..n_experts).map(|e| format!("e{e}")).collect();
    ExpertPanel::new("X", 24, NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), names, series, &obs).unwrap()
}

fn naive_cdf(locations: &[f64], weights: &[f64], x: f64) -> f64 {
    locations.iter().zip(weights).filter(|(l, _)| **l <= x).map(|(_, w)| w).sum()
}

/// `2 * int F_e (F - H)` by exact integration of the piecewise-constant integrand,
/// together with `int (F - H)^2`.
fn integral_gradient_and_crps(day: &[&StepwiseCdf], w: &[f64], y: f64) -> (Vec<f64>, f64) {
    let mut points: Vec<f64> = day.iter().flat_map(|c| c.locations().iter().copied()).collect();
    points.push(y);
    points.sort_by(f64::total_cmp);
    let mut grad = vec![0.0; day.len()];
    let mut crps = 0.0;
    for seg in points.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let fe: Vec<f64> = day.iter().map(|c| naive_cdf(c.locations(), c.weights(), mid)).collect();
        let f: f64 = fe.iter().zip(w).map(|(a, b)| a * b).sum();
        let h = if mid >= y { 1.0 } else { 0.0 };
        crps += (f - h).powi(2) * (hi - lo);
        for (g, fe) in grad.iter_mut().zip(&fe) {
            *g += 2.0 * fe * (f - h) * (hi - lo);
        }
    }
    (grad, crps)
}

fn softmin(scores: &[f64], eta: f64) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = scores.iter().map(|s| (-eta * (s - lo)).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

#[test]
fn grad_matches_reference_implementation() {
    let panel = random_panel(3, 50, 5);
    let obs = panel.observed_values();
    for (window, eta) in [(Window::AllPast, 0.3), (Window::Days(5), 2.0)] {
        let run = run_aggregation(&panel, &StrategyConfig::grad(window, eta)).unwrap();
        let mut grads: Vec<Vec<f64>> = Vec::new();
        for t in 1..=50 {
            let range = window.range(t);
            let sums: Vec<f64> = (0..3).map(|e| grads[range.clone()].iter().map(|g| g[e]).sum()).collect();
            let w = softmin(&sums, eta);
            for (a, b) in w.iter().zip(run.weights_at(t).iter()) {
                assert!((a - b).abs() < 1e-9, "t={t}: {w:?} vs {:?}", run.weights_at(t));
            }
            let (g, crps) = integral_gradient_and_crps(&panel.day(t), &w, obs[t - 1]);
            assert!((crps - run.losses().losses()[t - 1]).abs() < 1e-10);
            grads.push(g);
        }
    }
}

#[test]
fn identical_experts_keep_uniform_weights() {
    let base = random_panel(1, 40, 2);
    let series = vec![base.series(0).to_vec(); 3];
    let panel = ExpertPanel::new(
        "X",
        24,
        base.start_date(),
        vec!["a".into(), "b".into(), "c".into()],
        series,
        &base.observed_values(),
    )
    .unwrap();
    for kind in [StrategyKind::Inv, StrategyKind::Ewa, StrategyKind::Grad] {
        let run = run_aggregation(&panel, &StrategyConfig::new(kind, Window::Days(10)).with_eta(3.0)).unwrap();
        for w in run.weights() {
            assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12), "{kind}: {w:?}");
        }
        for (l, e) in run.losses().losses().iter().zip(PanelScores::new(&base).expert_losses()[0].losses()) {
            assert!((l - e).abs() < 1e-12);
        }
    }
}

#[test]
fn single_expert_panel_returns_the_expert() {
    let panel = random_panel(1, 30, 8);
    let scores = PanelScores::new(&panel);
    for kind in StrategyKind::ALL {
        let run = run_aggregation(&panel, &StrategyConfig::new(kind, Window::AllPast)).unwrap();
        assert!(run.weights().iter().all(|w| w.as_slice() == [1.0]));
        assert_eq!(run.losses(), &scores.expert_losses()[0]);
        assert!(run.regret_best_expert().iter().all(|r| *r == 0.0));
    }
}

#[test]
fn ewa_with_huge_rate_follows_the_leader() {
    let panel = random_panel(4, 60, 11);
    let window = Window::Days(15);
    let ewa = run_aggregation(&panel, &StrategyConfig::ewa(window, 1e6)).unwrap();
    let min = run_aggregation(&panel, &StrategyConfig::new(StrategyKind::Min, window)).unwrap();
    for t in 2..=60 {
        assert_eq!(ewa.weights_at(t).argmax(), min.weights_at(t).argmax(), "t={t}");
        assert!(ewa.weights_at(t)[min.weights_at(t).argmax()] > 1.0 - 1e-9);
    }
}

#[test]
fn final_regret_is_cumulative_loss_minus_oracle() {
    let panel = random_panel(3, 80, 21);
    let scores = PanelScores::new(&panel);
    let oracles = Oracles::new(&scores).unwrap();
    for config in [
        StrategyConfig::ewa(Window::AllPast, 0.5),
        StrategyConfig::grad(Window::Days(30), 1.0),
        StrategyConfig::new(StrategyKind::Sharp, Window::Days(20)),
    ] {
        let run = run_with(&panel, &scores, &oracles, &config).unwrap();
        let t = run.n_days();
        let expected = run.cumulative_loss() - oracles.best_expert.cumulative_loss();
        assert!((run.regret_best_expert()[t - 1] - expected).abs() < 1e-9);
        let expected = run.cumulative_loss() - oracles.best_constant.cumulative_loss();
        assert!((run.regret_best_constant()[t - 1] - expected).abs() < 1e-9);
    }
}

#[test]
fn best_expert_oracle_is_the_lowest_cumulative_loss() {
    let panel = random_panel(5, 70, 3);
    let scores = PanelScores::new(&panel);
    let best = oracle_best_expert(scores.expert_losses()).unwrap();
    for s in scores.expert_losses() {
        assert!(best.cumulative_loss() <= s.total());
    }
    let constant = oracle_best_constant(scores.terms()).unwrap();
    assert!(constant.cumulative_loss() <= best.cumulative_loss());
}

#[test]
fn regime_switch_beats_the_best_single_expert() {
    let spec = ScenarioSpec::regime_switch(400, 200, 20, 9);
    let panel = generate_scenario(&spec).unwrap();
    let run = run_aggregation(&panel, &StrategyConfig::ewa(Window::Days(30), 1.0)).unwrap();
    assert!(*run.regret_best_expert().last().unwrap() < 0.0);
    assert!(run.weights_at(150)[0] > 0.9);
    assert!(run.weights_at(350)[1] > 0.9);
}
