//! Synthetic panels with known reliability properties.
//!
//! The square root of the observation on day `t` is drawn from
//! `N(mu_t, noise_sd^2)` truncated at zero, with
//!
//! ```text
//! mu_t = base + amplitude sin(2 pi t / 365) + u_t1 + ... + u_tK,   u_tj ~ N(0, signal_sd^2)
//! ```
//!
//! An expert knowing signals `j` in its set predicts the square root with the
//! conditional law: mean `base + seasonal + known signals`, variance
//! `noise_sd^2 + (unknown signals) signal_sd^2`. Members are drawn from (or
//! quantiles taken of) that law after shifting the mean by `bias` predictive
//! standard deviations and scaling the spread by `dispersion`, then squared. With
//! no bias and unit dispersion the expert is reliable up to the (small) effect
//! of truncation on the conditional law.

use std::sync::Arc;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepwise_cdf::StepwiseCdf;

use super::panel::ExpertPanel;
use super::truncnorm::truncnorm_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertKind {
    /// `M` members drawn at random.
    Sample,
    /// Quantiles of orders `i / (M + 1)`, `i = 1..=M`.
    Quantile,
}

/// How an expert departs from the conditional law of the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Distortion {
    /// Mean shift, in predictive standard deviations.
    pub bias: f64,
    /// Spread multiplier.
    pub dispersion: f64,
    /// Number of hidden signals the expert knows.
    pub known_signals: usize,
    /// Index of the first known signal (signals are taken cyclically).
    pub signal_offset: usize,
}

impl Default for Distortion {
    fn default() -> Self {
        Self {
            bias: 0.0,
            dispersion: 1.0,
            known_signals: 0,
            signal_offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSpec {
    pub name: String,
    #[serde(default = "default_kind")]
    pub kind: ExpertKind,
    /// Number of members or quantiles.
    pub members: usize,
    #[serde(flatten)]
    pub distortion: Distortion,
    /// Distortion from the switch day on.
    #[serde(default)]
    pub after_switch: Option<Distortion>,
}

fn default_kind() -> ExpertKind {
    ExpertKind::Sample
}

impl ExpertSpec {
    pub fn new(name: impl Into<String>, members: usize, distortion: Distortion) -> Self {
        Self {
            name: name.into(),
            kind: ExpertKind::Sample,
            members,
            distortion,
            after_switch: None,
        }
    }

    pub fn quantiles(mut self) -> Self {
        self.kind = ExpertKind::Quantile;
        self
    }

    pub fn switching_to(mut self, after: Distortion) -> Self {
        self.after_switch = Some(after);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationProcess {
    pub base: f64,
    pub seasonal_amplitude: f64,
    pub n_signals: usize,
    pub signal_sd: f64,
    pub noise_sd: f64,
    /// Relative growth of `noise_sd` per day of lead time beyond the first.
    pub lead_growth: f64,
}

impl Default for ObservationProcess {
    fn default() -> Self {
        Self {
            base: 2.5,
            seasonal_amplitude: 0.3,
            n_signals: 4,
            signal_sd: 0.3,
            noise_sd: 0.3,
            lead_growth: 0.1,
        }
    }
}

impl ObservationProcess {
    fn noise_sd_at(&self, lead_time_h: u32) -> f64 {
        let extra_days = (lead_time_h as f64 / 24.0 - 1.0).max(0.0);
        self.noise_sd * (1.0 + self.lead_growth * extra_days)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_days: usize,
    #[serde(default = "one")]
    pub n_locations: usize,
    #[serde(default = "default_leads")]
    pub lead_times_h: Vec<u32>,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub observation: ObservationProcess,
    /// First day (1-based) of the second regime.
    #[serde(default)]
    pub switch_day: Option<usize>,
    pub experts: Vec<ExpertSpec>,
}

fn one() -> usize {
    1
}

fn default_leads() -> Vec<u32> {
    vec![24]
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

impl ScenarioSpec {
    pub fn new(n_days: usize, experts: Vec<ExpertSpec>, seed: u64) -> Self {
        Self {
            n_days,
            n_locations: 1,
            lead_times_h: default_leads(),
            start_date: default_start(),
            seed,
            observation: ObservationProcess::default(),
            switch_day: None,
            experts,
        }
    }

    /// `n_experts` reliable experts of `members` members knowing an increasing
    /// number of signals.
    pub fn reliable(n_experts: usize, members: usize, n_days: usize, seed: u64) -> Self {
        let process = ObservationProcess::default();
        let experts = (0..n_experts)
            .map(|e| {
                ExpertSpec::new(
                    format!("reliable{}", e + 1),
                    members,
                    Distortion {
                        known_signals: e % (process.n_signals + 1),
                        ..Distortion::default()
                    },
                )
            })
            .collect();
        Self::new(n_days, experts, seed)
    }

    /// Two experts trading places at `switch_day`: the first knows every signal
    /// before the switch and none after, the second the opposite.
    pub fn regime_switch(n_days: usize, switch_day: usize, members: usize, seed: u64) -> Self {
        let all = ObservationProcess::default().n_signals;
        let informed = Distortion {
            known_signals: all,
            ..Distortion::default()
        };
        let blind = Distortion {
            bias: 1.0,
            ..Distortion::default()
        };
        let mut spec = Self::new(
            n_days,
            vec![
                ExpertSpec::new("A", members, informed).switching_to(blind),
                ExpertSpec::new("B", members, blind).switching_to(informed),
            ],
            seed,
        );
        spec.switch_day = Some(switch_day);
        spec
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_days < 2 {
            return bad(format!("scenario needs at least 2 days, got {}", self.n_days));
        }
        if self.experts.is_empty() {
            return Err(Error::Empty("experts"));
        }
        if self.n_locations == 0 || self.lead_times_h.is_empty() {
            return bad("scenario needs at least one location and one lead time".into());
        }
        let p = &self.observation;
        if !(p.noise_sd > 0.0) || !(p.signal_sd >= 0.0) || !(p.lead_growth >= 0.0) || !p.base.is_finite() {
            return bad("observation process needs noise_sd > 0, signal_sd >= 0 and lead_growth >= 0".into());
        }
        if let Some(s) = self.switch_day {
            if s < 1 || s > self.n_days {
                return bad(format!("switch day {s} outside 1..={}", self.n_days));
            }
        }
        for (i, e) in self.experts.iter().enumerate() {
            if self.experts[..i].iter().any(|o| o.name == e.name) {
                return bad(format!("duplicate expert name {:?}", e.name));
            }
            if e.members == 0 {
                return bad(format!("expert {:?} needs at least one member", e.name));
            }
            for d in std::iter::once(&e.distortion).chain(e.after_switch.as_ref()) {
                if !(d.dispersion > 0.0) || !d.bias.is_finite() {
                    return bad(format!("expert {:?} needs a positive dispersion and finite bias", e.name));
                }
                if d.known_signals > p.n_signals {
                    return bad(format!(
                        "expert {:?} knows {} signals but the process has {}",
                        e.name, d.known_signals, p.n_signals
                    ));
                }
            }
        }
        Ok(())
    }
}

fn uniform_open<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn draw_truncated<R: Rng>(rng: &mut R, mu: f64, sigma: f64) -> f64 {
    truncnorm_quantile(uniform_open(rng), mu, sigma).expect("valid truncated normal")
}

/// Panel for one location and lead time; `stream` selects an independent
/// random stream for the seed.
fn generate_one(spec: &ScenarioSpec, location: usize, lead_time_h: u32, stream: u64) -> Result<ExpertPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let p = &spec.observation;
    let noise_sd = p.noise_sd_at(lead_time_h);
    let quantile_orders: Vec<Option<Arc<[f64]>>> = spec
        .experts
        .iter()
        .map(|e| match e.kind {
            ExpertKind::Sample => None,
            ExpertKind::Quantile => {
                let m = e.members;
                Some((1..=m).map(|i| i as f64 / (m + 1) as f64).collect())
            }
        })
        .collect();

    let mut observed = Vec::with_capacity(spec.n_days);
    let mut forecasts: Vec<Vec<StepwiseCdf>> = vec![Vec::with_capacity(spec.n_days); spec.n_experts()];
    let mut signals = vec![0.0; p.n_signals];
    for t in 1..=spec.n_days {
        let seasonal = p.seasonal_amplitude * (2.0 * std::f64::consts::PI * t as f64 / 365.0).sin();
        for s in signals.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s = p.signal_sd * z;
        }
        let mu = p.base + seasonal + signals.iter().sum::<f64>();
        let root = draw_truncated(&mut rng, mu, noise_sd);
        observed.push(root * root);

        let switched = spec.switch_day.is_some_and(|s| t >= s);
        for (e, expert) in spec.experts.iter().enumerate() {
            let d = match (switched, &expert.after_switch) {
                (true, Some(after)) => after,
                _ => &expert.distortion,
            };
            let known: f64 = (0..d.known_signals)
                .map(|j| signals[(d.signal_offset + j) % p.n_signals.max(1)])
                .sum();
            let unknown = (p.n_signals - d.known_signals) as f64;
            let sigma = (noise_sd * noise_sd + unknown * p.signal_sd * p.signal_sd).sqrt();
            let centre = p.base + seasonal + known + d.bias * sigma;
            let spread = d.dispersion * sigma;
            let cdf = match &quantile_orders[e] {
                None => {
                    let members: Vec<f64> = (0..expert.members)
                        .map(|_| draw_truncated(&mut rng, centre, spread).powi(2))
                        .collect();
                    StepwiseCdf::from_sample(&members)?
                }
                Some(orders) => {
                    let values = orders
                        .iter()
                        .map(|&tau| truncnorm_quantile(tau, centre, spread).map(|q| q * q))
                        .collect::<Result<Vec<f64>>>()?;
                    StepwiseCdf::from_quantiles_shared(&values, orders.clone())?
                }
            };
            forecasts[e].push(cdf);
        }
    }
    let names = spec.experts.iter().map(|e| e.name.clone()).collect();
    ExpertPanel::new(
        location_id(location),
        lead_time_h,
        spec.start_date,
        names,
        forecasts,
        &observed,
    )
}

/// Identifier of the `i`-th synthetic location (0-based).
pub fn location_id(i: usize) -> String {
    format!("L{:03}", i + 1)
}

/// Panel of the first location and lead time of `spec`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<ExpertPanel> {
    spec.validate()?;
    generate_one(spec, 0, spec.lead_times_h[0], 0)
}

/// Panels of every location and lead time, ordered by location then lead time.
/// Each panel has its own random stream so the result does not depend on the
/// order of generation.
pub fn generate_scenario_set(spec: &ScenarioSpec) -> Result<Vec<ExpertPanel>> {
    spec.validate()?;
    let n_leads = spec.lead_times_h.len();
    let jobs: Vec<(usize, usize)> = (0..spec.n_locations)
        .flat_map(|l| (0..n_leads).map(move |h| (l, h)))
        .collect();
    use rayon::prelude::*;
    jobs.par_iter()
        .map(|&(l, h)| generate_one(spec, l, spec.lead_times_h[h], (l * n_leads + h) as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let spec = ScenarioSpec::reliable(3, 5, 20, 7);
        assert_eq!(generate_scenario(&spec).unwrap(), generate_scenario(&spec).unwrap());
        let other = ScenarioSpec::reliable(3, 5, 20, 8);
        assert_ne!(generate_scenario(&spec).unwrap(), generate_scenario(&other).unwrap());
    }

    #[test]
    fn shape() {
        let mut spec = ScenarioSpec::reliable(2, 4, 10, 1);
        spec.n_locations = 3;
        spec.lead_times_h = vec![24, 48];
        let panels = generate_scenario_set(&spec).unwrap();
        assert_eq!(panels.len(), 6);
        assert_eq!(panels[3].location_id(), "L002");
        assert_eq!(panels[3].lead_time_h(), 48);
        assert!(panels.iter().all(|p| p.n_days() == 10 && p.n_experts() == 2));
        assert_eq!(panels[0], generate_scenario(&spec).unwrap());
    }

    #[test]
    fn validation() {
        let mut spec = ScenarioSpec::reliable(2, 4, 10, 1);
        spec.experts[0].distortion.dispersion = 0.0;
        assert!(generate_scenario(&spec).is_err());
        let mut spec = ScenarioSpec::reliable(2, 4, 1, 1);
        assert!(spec.validate().is_err());
        spec.n_days = 5;
        spec.experts[1].members = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn quantile_experts() {
        let mut spec = ScenarioSpec::reliable(2, 9, 5, 3);
        spec.experts[1] = spec.experts[1].clone().quantiles();
        let panel = generate_scenario(&spec).unwrap();
        assert_eq!(panel.forecast(1, 2).len(), 9);
    }
}
