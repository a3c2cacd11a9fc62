//! Online convex aggregation of expert CDFs.
//!
//! At every day `t` a strategy turns statistics of the days before `t` into a
//! [`WeightVector`]; the aggregated forecast is the convex combination of the
//! experts' CDFs and it is scored with the exact mixture CRPS once `y_t` is
//! revealed. All per-day score ingredients of a panel are computed once in
//! [`PanelScores`] so that parameter sweeps only pay for the weight updates.

mod oracle;
mod strategies;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use oracle::{
    ewa_bound, ewa_optimal_eta, oracle_best_constant, oracle_best_expert, project_simplex, regret, BestConstant,
    BestExpert, MAX_ITERATIONS, STATIONARITY_TOL,
};
pub use strategies::{ewa_weights, grad_weights, inv_weights, min_select, sharp_select};
pub use weights::{argmax, argmin, WeightVector};

use crate::error::{Error, Result};
use crate::experts::ExpertPanel;
use crate::scoring::{HersbachAccumulator, MixtureTerms, ScoreSeries, Window};
use crate::stepwise_cdf::{convex_combine, StepwiseCdf};

/// Default reliability threshold of the SHARP strategy, in data units.
pub const DEFAULT_RELI_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StrategyKind {
    Inv,
    Sharp,
    Min,
    Ewa,
    Grad,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Inv,
        StrategyKind::Sharp,
        StrategyKind::Min,
        StrategyKind::Ewa,
        StrategyKind::Grad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Inv => "INV",
            StrategyKind::Sharp => "SHARP",
            StrategyKind::Min => "MIN",
            StrategyKind::Ewa => "EWA",
            StrategyKind::Grad => "GRAD",
        }
    }

    /// Whether the strategy has a learning rate.
    pub fn uses_eta(self) -> bool {
        matches!(self, StrategyKind::Ewa | StrategyKind::Grad)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}")))
    }
}

/// One point of the strategy grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub window: Window,
    /// Learning rate (EWA and GRAD only).
    pub eta: f64,
    /// Reliability threshold (SHARP only).
    pub reli_threshold: f64,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, window: Window) -> Self {
        Self {
            kind,
            window,
            eta: 1.0,
            reli_threshold: DEFAULT_RELI_THRESHOLD,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_reli_threshold(mut self, threshold: f64) -> Self {
        self.reli_threshold = threshold;
        self
    }

    pub fn ewa(window: Window, eta: f64) -> Self {
        Self::new(StrategyKind::Ewa, window).with_eta(eta)
    }

    pub fn grad(window: Window, eta: f64) -> Self {
        Self::new(StrategyKind::Grad, window).with_eta(eta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_eta() && !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", self.eta)));
        }
        if self.kind == StrategyKind::Sharp && !(self.reli_threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reliability threshold must be non-negative, got {}",
                self.reli_threshold
            )));
        }
        Ok(())
    }

    /// Stable identifier, e.g. `MIN_W30` or `EWA_Wall_lg+0.50`.
    pub fn id(&self) -> String {
        let base = format!("{}_W{}", self.kind, self.window);
        if self.kind.uses_eta() {
            format!("{base}_lg{:+.2}", self.eta.log10())
        } else {
            base
        }
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Per-day score ingredients of a panel, shared by every strategy run on it.
#[derive(Debug, Clone)]
pub struct PanelScores {
    terms: Vec<MixtureTerms>,
    expert_losses: Vec<ScoreSeries>,
    iq90: Vec<ScoreSeries>,
    // (F_e(y-), F_e(y)) at index (t - 1) * E + e
    cdf_at_obs: Vec<(f64, f64)>,
}

impl PanelScores {
    pub fn new(panel: &ExpertPanel) -> Self {
        let n = panel.n_experts();
        let days = panel.n_days();
        let mut terms = Vec::with_capacity(days);
        let mut cdf_at_obs = Vec::with_capacity(days * n);
        for (i, obs) in panel.observations().iter().enumerate() {
            let day = panel.day(i + 1);
            terms.push(MixtureTerms::new(&day, obs.value));
            cdf_at_obs.extend(day.iter().map(|c| (c.evaluate_left(obs.value), c.evaluate(obs.value))));
        }
        let expert_losses = (0..n)
            .map(|e| ScoreSeries::from_losses(terms.iter().map(|d| d.expert_crps(e))))
            .collect();
        let iq90 = (0..n)
            .map(|e| ScoreSeries::from_losses(panel.series(e).iter().map(StepwiseCdf::iq90)))
            .collect();
        Self {
            terms,
            expert_losses,
            iq90,
            cdf_at_obs,
        }
    }

    pub fn n_experts(&self) -> usize {
        self.expert_losses.len()
    }

    pub fn n_days(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[MixtureTerms] {
        &self.terms
    }

    /// Exact CRPS series of every expert.
    pub fn expert_losses(&self) -> &[ScoreSeries] {
        &self.expert_losses
    }

    /// Width of the central 90 % interval of every expert, per day.
    pub fn iq90(&self) -> &[ScoreSeries] {
        &self.iq90
    }

    /// `(F(y_t-), F(y_t))` of the mixture with weights `w` on day `t`.
    pub fn mixture_cdf_at_obs(&self, t: usize, w: &WeightVector) -> (f64, f64) {
        let n = self.n_experts();
        let row = &self.cdf_at_obs[(t - 1) * n..t * n];
        row.iter()
            .zip(w.iter())
            .fold((0.0, 0.0), |(lo, hi), ((l, h), wi)| (lo + wi * l, hi + wi * h))
    }
}

/// Both hindsight oracles of a panel.
#[derive(Debug, Clone)]
pub struct Oracles {
    pub best_expert: BestExpert,
    pub best_constant: BestConstant,
}

impl Oracles {
    pub fn new(scores: &PanelScores) -> Result<Self> {
        Ok(Self {
            best_expert: oracle_best_expert(scores.expert_losses())?,
            best_constant: oracle_best_constant(scores.terms())?,
        })
    }
}

/// Outcome of one strategy on one panel.
#[derive(Debug, Clone)]
pub struct AggregationRun {
    config: StrategyConfig,
    weights: Vec<WeightVector>,
    losses: ScoreSeries,
    regret_best_expert: Vec<f64>,
    regret_best_constant: Vec<f64>,
}

impl AggregationRun {
    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn n_days(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[WeightVector] {
        &self.weights
    }

    /// Weights used on day `t` (1-based).
    pub fn weights_at(&self, t: usize) -> &WeightVector {
        &self.weights[t - 1]
    }

    pub fn losses(&self) -> &ScoreSeries {
        &self.losses
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.losses.total()
    }

    pub fn mean_loss(&self) -> f64 {
        self.losses.mean()
    }

    pub fn regret_best_expert(&self) -> &[f64] {
        &self.regret_best_expert
    }

    pub fn regret_best_constant(&self) -> &[f64] {
        &self.regret_best_constant
    }

    /// Aggregated forecast of day `t` (1-based).
    pub fn aggregate_at(&self, panel: &ExpertPanel, t: usize) -> Result<StepwiseCdf> {
        convex_combine(&panel.day_owned(t), self.weights_at(t))
    }

    pub fn aggregates(&self, panel: &ExpertPanel) -> Result<Vec<StepwiseCdf>> {
        (1..=self.n_days()).map(|t| self.aggregate_at(panel, t)).collect()
    }
}

/// Runs `config` on `panel`, computing scores and oracles on the way.
pub fn run_aggregation(panel: &ExpertPanel, config: &StrategyConfig) -> Result<AggregationRun> {
    let scores = PanelScores::new(panel);
    let oracles = Oracles::new(&scores)?;
    run_with(panel, &scores, &oracles, config)
}

// Sliding reliability accumulators for SHARP, one per expert.
struct SharpState {
    accumulators: Vec<HersbachAccumulator>,
    start: usize,
    end: usize,
}

impl SharpState {
    fn new(panel: &ExpertPanel) -> Self {
        let accumulators = (0..panel.n_experts())
            .map(|e| HersbachAccumulator::for_forecast(panel.forecast(e, 1)))
            .collect();
        Self {
            accumulators,
            start: 0,
            end: 0,
        }
    }

    fn advance(&mut self, panel: &ExpertPanel, t: usize, window: Window) -> Result<Vec<f64>> {
        let range = window.range(t);
        let obs = panel.observations();
        for (e, acc) in self.accumulators.iter_mut().enumerate() {
            for d in self.end..range.end {
                acc.add(panel.forecast(e, d + 1), obs[d].value)?;
            }
            for d in self.start..range.start {
                acc.remove(panel.forecast(e, d + 1), obs[d].value)?;
            }
        }
        self.start = range.start;
        self.end = range.end;
        Ok(self.accumulators.iter().map(HersbachAccumulator::reliability).collect())
    }
}

/// Runs `config` on a panel whose scores and oracles are already computed.
///
/// The weights of day `t` only read days `1..t`.
pub fn run_with(
    panel: &ExpertPanel,
    scores: &PanelScores,
    oracles: &Oracles,
    config: &StrategyConfig,
) -> Result<AggregationRun> {
    config.validate()?;
    let n = scores.n_experts();
    let days = scores.n_days();
    if panel.n_experts() != n || panel.n_days() != days {
        return Err(Error::IncompletePanel("scores do not belong to this panel".into()));
    }
    let window = config.window;
    let mut sharp = (config.kind == StrategyKind::Sharp).then(|| SharpState::new(panel));
    let mut gradients: Vec<ScoreSeries> = vec![ScoreSeries::new(); n];
    let mut weights = Vec::with_capacity(days);
    let mut losses = ScoreSeries::new();

    for t in 1..=days {
        let w = if t == 1 {
            WeightVector::uniform(n)
        } else {
            let mean_losses = || -> Vec<f64> {
                scores
                    .expert_losses()
                    .iter()
                    .map(|s| s.windowed_mean(t, window).unwrap_or(0.0))
                    .collect()
            };
            match config.kind {
                StrategyKind::Inv => inv_weights(&mean_losses()),
                StrategyKind::Min => min_select(&mean_losses()),
                StrategyKind::Sharp => {
                    let reli = sharp.as_mut().expect("sharp state").advance(panel, t, window)?;
                    let iq90: Vec<f64> = scores
                        .iq90()
                        .iter()
                        .map(|s| s.windowed_mean(t, window).unwrap_or(0.0))
                        .collect();
                    sharp_select(&reli, &iq90, &mean_losses(), config.reli_threshold)
                }
                StrategyKind::Ewa => {
                    let sums: Vec<f64> = scores.expert_losses().iter().map(|s| s.windowed_sum(t, window)).collect();
                    ewa_weights(&sums, config.eta)?
                }
                StrategyKind::Grad => {
                    let sums: Vec<f64> = gradients.iter().map(|s| s.windowed_sum(t, window)).collect();
                    grad_weights(&sums, config.eta)?
                }
            }
        };
        let day = &scores.terms()[t - 1];
        losses.push(day.crps(w.as_slice()));
        if config.kind == StrategyKind::Grad {
            for (series, g) in gradients.iter_mut().zip(day.gradient(w.as_slice())) {
                series.push(g);
            }
        }
        weights.push(w);
    }

    let regret_best_expert = regret(&losses, &oracles.best_expert.losses)?;
    let regret_best_constant = regret(&losses, &oracles.best_constant.losses)?;
    Ok(AggregationRun {
        config: *config,
        weights,
        losses,
        regret_best_expert,
        regret_best_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn panel(series: Vec<Vec<StepwiseCdf>>, obs: &[f64]) -> ExpertPanel {
        let names = (0..series.len()).map(|e| format!("e{e}")).collect();
        ExpertPanel::new("loc", 24, NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(), names, series, obs).unwrap()
    }

    fn shifted_panel() -> ExpertPanel {
        let obs: Vec<f64> = (0..40).map(|t| 5.0 + (t % 7) as f64 * 0.3).collect();
        let a = obs.iter().map(|y| StepwiseCdf::from_sample(&[y - 0.2, y + 0.1]).unwrap()).collect();
        let b = obs.iter().map(|y| StepwiseCdf::from_sample(&[y + 1.0, y + 2.0]).unwrap()).collect();
        panel(vec![a, b], &obs)
    }

    #[test]
    fn ids() {
        assert_eq!(StrategyConfig::new(StrategyKind::Min, Window::Days(30)).id(), "MIN_W30");
        assert_eq!(StrategyConfig::ewa(Window::AllPast, 10f64.powf(0.5)).id(), "EWA_Wall_lg+0.50");
        assert_eq!(StrategyConfig::grad(Window::Days(7), 10f64.powf(-1.5)).id(), "GRAD_W7_lg-1.50");
        assert_eq!("sharp".parse::<StrategyKind>().unwrap(), StrategyKind::Sharp);
    }

    #[test]
    fn first_day_is_uniform_and_weights_on_simplex() {
        let p = shifted_panel();
        for kind in StrategyKind::ALL {
            let run = run_aggregation(&p, &StrategyConfig::new(kind, Window::Days(7))).unwrap();
            assert_eq!(run.weights_at(1).as_slice(), &[0.5, 0.5]);
            for w in run.weights() {
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
            // expert a is better every day
            assert!(run.weights_at(40)[0] > 0.5, "{kind}");
        }
    }

    #[test]
    fn single_expert_is_returned() {
        let p = shifted_panel().select_experts(&[1]).unwrap();
        let scores = PanelScores::new(&p);
        let run = run_aggregation(&p, &StrategyConfig::ewa(Window::AllPast, 1.0)).unwrap();
        assert_eq!(run.losses(), &scores.expert_losses()[0]);
        assert_eq!(run.aggregate_at(&p, 3).unwrap(), *p.forecast(0, 3));
    }

    #[test]
    fn invalid_eta_rejected() {
        let p = shifted_panel();
        assert!(run_aggregation(&p, &StrategyConfig::ewa(Window::Days(7), 0.0)).is_err());
    }
}
