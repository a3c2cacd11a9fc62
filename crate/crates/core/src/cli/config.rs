use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::aggregation::{StrategyConfig, StrategyKind, DEFAULT_RELI_THRESHOLD};
use crate::error::{Error, Result};
use crate::experts::{Distortion, ExpertSpec, ObservationProcess, ScenarioSpec};
use crate::reliability::DEFAULT_ALPHA;
use crate::scoring::Window;

/// Strategy grid: every kind is run with every window, and the kinds with a
/// learning rate additionally with every `eta = 10^log10_eta`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub kinds: Vec<StrategyKind>,
    pub windows: Vec<Window>,
    pub log10_eta: Vec<f64>,
    pub reli_threshold: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            kinds: StrategyKind::ALL.to_vec(),
            windows: vec![
                Window::Days(7),
                Window::Days(15),
                Window::Days(30),
                Window::Days(90),
                Window::Days(365),
                Window::AllPast,
            ],
            log10_eta: vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.5, 2.0],
            reli_threshold: DEFAULT_RELI_THRESHOLD,
        }
    }
}

impl GridConfig {
    /// Every configuration of the grid, in kind, window, learning-rate order.
    pub fn configs(&self) -> Result<Vec<StrategyConfig>> {
        if self.kinds.is_empty() || self.windows.is_empty() {
            return Err(Error::Config("the strategy grid needs at least one kind and one window".into()));
        }
        if self.kinds.iter().any(|k| k.uses_eta()) && self.log10_eta.is_empty() {
            return Err(Error::Config("EWA and GRAD need at least one learning rate".into()));
        }
        if let Some(lg) = self.log10_eta.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("invalid log10 learning rate {lg}")));
        }
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &window in &self.windows {
                let base = StrategyConfig::new(kind, window).with_reli_threshold(self.reli_threshold);
                if kind.uses_eta() {
                    out.extend(self.log10_eta.iter().map(|lg| base.with_eta(10f64.powf(*lg))));
                } else {
                    out.push(base);
                }
            }
        }
        for c in &out {
            c.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(out)
    }
}

/// Panel files to ingest instead of the simulated ones.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub forecasts: Option<PathBuf>,
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// False discovery rate of the flatness tests.
    pub alpha: f64,
    pub input: InputConfig,
    pub scenario: ScenarioSpec,
    pub grid: GridConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out: PathBuf::from("cdfagg-out"),
            jobs: 0,
            alpha: DEFAULT_ALPHA,
            input: InputConfig::default(),
            scenario: default_scenario(),
            grid: GridConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.input.forecasts.is_some() != self.input.observations.is_some() {
            return Err(Error::Config("input needs both a forecasts and an observations file".into()));
        }
        self.scenario.validate().map_err(|e| Error::Config(format!("scenario: {e}")))?;
        self.grid.configs()?;
        Ok(())
    }
}

/// Default synthetic setup: 28 experts on 20 locations over two years.
///
/// Four sharp raw ensembles are biased and under-dispersed; the other experts
/// are reliable with varying information, two of them knowing every signal.
pub fn default_scenario() -> ScenarioSpec {
    let process = ObservationProcess::default();
    let mut experts = Vec::with_capacity(28);
    let raw = [(0.6, 0.6, 50), (-0.5, 0.7, 35), (0.4, 0.5, 20), (0.8, 0.8, 50)];
    for (i, &(bias, dispersion, members)) in raw.iter().enumerate() {
        experts.push(ExpertSpec::new(
            format!("raw{}", i + 1),
            members,
            Distortion {
                bias,
                dispersion,
                known_signals: 3,
                signal_offset: i,
            },
        ));
    }
    for i in 0..24 {
        let known = match i {
            0 | 1 => process.n_signals,
            _ => 1 + i % 3,
        };
        let spec = ExpertSpec::new(
            format!("pp{:02}", i + 1),
            if i % 2 == 0 { 19 } else { 30 },
            Distortion {
                known_signals: known,
                signal_offset: i % process.n_signals,
                ..Distortion::default()
            },
        );
        experts.push(if i % 2 == 0 { spec.quantiles() } else { spec });
    }
    let mut spec = ScenarioSpec::new(730, experts, 42);
    spec.n_locations = 20;
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_size() {
        let configs = GridConfig::default().configs().unwrap();
        assert_eq!(configs.len(), 3 * 6 + 2 * 6 * 7);
        assert_eq!(configs[0].id(), "INV_W7");
        assert_eq!(configs.last().unwrap().id(), "GRAD_Wall_lg+2.00");
    }

    #[test]
    fn toml_overrides() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 7
            [grid]
            kinds = ["EWA"]
            windows = [30, "all"]
            log10_eta = [0.5]
            [scenario]
            n_days = 50
            [[scenario.experts]]
            name = "a"
            members = 10
            bias = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scenario.experts[0].distortion.bias, 0.5);
        let ids: Vec<String> = cfg.grid.configs().unwrap().iter().map(|c| c.id()).collect();
        assert_eq!(ids, ["EWA_W30_lg+0.50", "EWA_Wall_lg+0.50"]);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn default_scenario_is_valid() {
        let spec = default_scenario();
        assert_eq!(spec.n_experts(), 28);
        spec.validate().unwrap();
    }
}
