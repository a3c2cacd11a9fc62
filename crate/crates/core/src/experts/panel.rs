use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::stepwise_cdf::{Observation, StepwiseCdf};

/// Forecasts of `E` named experts and the matching observations, for one
/// location and lead time over `T` consecutive days.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPanel {
    location_id: String,
    lead_time_h: u32,
    start: NaiveDate,
    names: Vec<String>,
    // forecasts[e][t - 1]
    forecasts: Vec<Vec<StepwiseCdf>>,
    observations: Vec<Observation>,
}

impl ExpertPanel {
    /// Builds a panel from per-expert forecast series and observation values
    /// for the consecutive days starting at `start`.
    pub fn new(
        location_id: impl Into<String>,
        lead_time_h: u32,
        start: NaiveDate,
        names: Vec<String>,
        forecasts: Vec<Vec<StepwiseCdf>>,
        observed: &[f64],
    ) -> Result<Self> {
        let location_id = location_id.into();
        if names.is_empty() {
            return Err(Error::Empty("experts"));
        }
        if observed.is_empty() {
            return Err(Error::Empty("observations"));
        }
        if names.len() != forecasts.len() {
            return Err(Error::LengthMismatch {
                what: "expert names",
                expected: forecasts.len(),
                actual: names.len(),
            });
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidParameter(format!("duplicate expert name {name:?}")));
            }
        }
        for (name, series) in names.iter().zip(&forecasts) {
            if series.len() != observed.len() {
                return Err(Error::IncompletePanel(format!(
                    "expert {name:?} has {} forecasts for {} observed days",
                    series.len(),
                    observed.len()
                )));
            }
        }
        let observations = observed
            .iter()
            .enumerate()
            .map(|(i, &y)| Observation::new(y, i + 1, location_id.clone(), lead_time_h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            location_id,
            lead_time_h,
            start,
            names,
            forecasts,
            observations,
        })
    }

    pub fn location_id(&self) -> &str {
        &self.location_id
    }

    pub fn lead_time_h(&self) -> u32 {
        self.lead_time_h
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    /// Date of day `t` (1-based).
    pub fn date(&self, t: usize) -> NaiveDate {
        self.start + Days::new(t as u64 - 1)
    }

    pub fn n_experts(&self) -> usize {
        self.names.len()
    }

    pub fn n_days(&self) -> usize {
        self.observations.len()
    }

    pub fn expert_names(&self) -> &[String] {
        &self.names
    }

    /// Forecast series of expert `e`.
    pub fn series(&self, e: usize) -> &[StepwiseCdf] {
        &self.forecasts[e]
    }

    /// Forecast of expert `e` for day `t` (1-based).
    pub fn forecast(&self, e: usize, t: usize) -> &StepwiseCdf {
        &self.forecasts[e][t - 1]
    }

    /// Every expert's forecast for day `t` (1-based).
    pub fn day(&self, t: usize) -> Vec<&StepwiseCdf> {
        self.forecasts.iter().map(|s| &s[t - 1]).collect()
    }

    /// Owned copy of every expert's forecast for day `t`.
    pub fn day_owned(&self, t: usize) -> Vec<StepwiseCdf> {
        self.forecasts.iter().map(|s| s[t - 1].clone()).collect()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn observed_values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    /// Largest absolute excursion of the data: `max - min(0, min)` over
    /// observations and forecast locations, a bound on every daily CRPS.
    pub fn value_range(&self) -> f64 {
        let mut lo = 0.0f64;
        let mut hi = f64::NEG_INFINITY;
        for o in &self.observations {
            lo = lo.min(o.value);
            hi = hi.max(o.value);
        }
        for cdf in self.forecasts.iter().flatten() {
            lo = lo.min(cdf.min_location());
            hi = hi.max(cdf.max_location());
        }
        hi - lo
    }

    /// Sub-panel restricted to the experts in `indices`, in that order.
    pub fn select_experts(&self, indices: &[usize]) -> Result<Self> {
        let names = indices.iter().map(|&e| self.names[e].clone()).collect();
        let forecasts = indices.iter().map(|&e| self.forecasts[e].clone()).collect();
        Self::new(
            self.location_id.clone(),
            self.lead_time_h,
            self.start,
            names,
            forecasts,
            &self.observed_values(),
        )
    }
}
