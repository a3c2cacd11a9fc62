//! Python bindings: step-wise CDFs, CRPS scoring, online aggregation and
//! rank-histogram flatness tests.

use std::path::PathBuf;

use chrono::NaiveDate;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cdfagg::cli::RunConfig;
use cdfagg::experts::{generate_scenario_set, load_panels_csv, write_panels_csv};
use cdfagg::reliability::{self, RankHistogram};
use cdfagg::scoring::{self, Window};
use cdfagg::stepwise_cdf::{self, Provenance};
use cdfagg::{aggregation, Error};

fn to_py(err: Error) -> PyErr {
    match err.category() {
        "io" => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn weight_vector(weights: Vec<f64>) -> PyResult<aggregation::WeightVector> {
    aggregation::WeightVector::new(weights).map_err(to_py)
}

/// Right-continuous step CDF with finitely many jumps.
#[pyclass(name = "StepwiseCdf", module = "cdfagg", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCdf {
    inner: stepwise_cdf::StepwiseCdf,
}

#[pymethods]
impl PyCdf {
    /// Empirical CDF of an ensemble.
    #[staticmethod]
    fn from_sample(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: stepwise_cdf::StepwiseCdf::from_sample(&values).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_quantiles(values: Vec<f64>, orders: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: stepwise_cdf::StepwiseCdf::from_quantiles(&values, &orders).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_weighted(locations: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: stepwise_cdf::StepwiseCdf::from_weighted(&locations, &weights).map_err(to_py)?,
        })
    }

    #[getter]
    fn locations(&self) -> Vec<f64> {
        self.inner.locations().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.provenance() {
            Provenance::RandomSample { .. } => "sample",
            Provenance::QuantileSet { .. } => "quantile",
            Provenance::Mixture => "mixture",
        }
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn evaluate(&self, x: f64) -> f64 {
        self.inner.evaluate(x)
    }

    fn quantile(&self, tau: f64) -> PyResult<f64> {
        self.inner.quantile(tau).map_err(to_py)
    }

    /// Exact CRPS against observation `y`.
    fn crps(&self, y: f64) -> f64 {
        scoring::crps(&self.inner, y)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("StepwiseCdf({} steps, {})", self.inner.len(), self.kind())
    }
}

fn unwrap_cdfs(cdfs: &[PyRef<'_, PyCdf>]) -> Vec<stepwise_cdf::StepwiseCdf> {
    cdfs.iter().map(|c| c.inner.clone()).collect()
}

#[pyfunction]
fn convex_combine(cdfs: Vec<PyRef<'_, PyCdf>>, weights: Vec<f64>) -> PyResult<PyCdf> {
    let inner = stepwise_cdf::convex_combine(&unwrap_cdfs(&cdfs), &weight_vector(weights)?).map_err(to_py)?;
    Ok(PyCdf { inner })
}

/// CRPS of the weighted mixture of `cdfs`.
#[pyfunction]
fn crps_mixture(cdfs: Vec<PyRef<'_, PyCdf>>, weights: Vec<f64>, y: f64) -> PyResult<f64> {
    scoring::crps_exact(&unwrap_cdfs(&cdfs), &weight_vector(weights)?, y).map_err(to_py)
}

#[pyfunction]
fn crps_gradient(cdfs: Vec<PyRef<'_, PyCdf>>, weights: Vec<f64>, y: f64) -> PyResult<Vec<f64>> {
    scoring::crps_gradient(&unwrap_cdfs(&cdfs), &weight_vector(weights)?, y).map_err(to_py)
}

/// Reliability, resolution and uncertainty of a forecast series.
#[pyfunction]
fn crps_decomposition<'py>(
    py: Python<'py>,
    forecasts: Vec<PyRef<'_, PyCdf>>,
    observations: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = scoring::hersbach_decompose(&unwrap_cdfs(&forecasts), &observations).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("reli", d.reli)?;
    out.set_item("res", d.res)?;
    out.set_item("unc", d.unc)?;
    out.set_item("mean_crps", d.mean_crps)?;
    Ok(out)
}

/// Forecasts of several experts and the observations, for one location and
/// lead time over consecutive days.
#[pyclass(name = "ExpertPanel", module = "cdfagg", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPanel {
    inner: cdfagg::ExpertPanel,
}

#[pymethods]
impl PyPanel {
    #[new]
    fn new(
        location_id: String,
        lead_time_h: u32,
        start_date: &str,
        names: Vec<String>,
        forecasts: Vec<Vec<PyRef<'_, PyCdf>>>,
        observed: Vec<f64>,
    ) -> PyResult<Self> {
        let start: NaiveDate = start_date
            .parse()
            .map_err(|e| PyValueError::new_err(format!("invalid date {start_date:?}: {e}")))?;
        let series = forecasts.iter().map(|s| unwrap_cdfs(s)).collect();
        let inner =
            cdfagg::ExpertPanel::new(location_id, lead_time_h, start, names, series, &observed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn location_id(&self) -> &str {
        self.inner.location_id()
    }

    #[getter]
    fn lead_time_h(&self) -> u32 {
        self.inner.lead_time_h()
    }

    #[getter]
    fn expert_names(&self) -> Vec<String> {
        self.inner.expert_names().to_vec()
    }

    #[getter]
    fn n_experts(&self) -> usize {
        self.inner.n_experts()
    }

    #[getter]
    fn n_days(&self) -> usize {
        self.inner.n_days()
    }

    fn observed_values(&self) -> Vec<f64> {
        self.inner.observed_values()
    }

    /// Forecast of expert `e` (0-based) on day `t` (1-based).
    fn forecast(&self, e: usize, t: usize) -> PyResult<PyCdf> {
        if e >= self.inner.n_experts() || t == 0 || t > self.inner.n_days() {
            return Err(PyValueError::new_err(format!("no forecast for expert {e} on day {t}")));
        }
        Ok(PyCdf {
            inner: self.inner.forecast(e, t).clone(),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "ExpertPanel({:?}, lead {} h, {} experts, {} days)",
            self.inner.location_id(),
            self.inner.lead_time_h(),
            self.inner.n_experts(),
            self.inner.n_days()
        )
    }
}

#[pyfunction]
fn load_panels(forecasts: PathBuf, observations: PathBuf) -> PyResult<Vec<PyPanel>> {
    let panels = load_panels_csv(&forecasts, &observations).map_err(to_py)?;
    Ok(panels.into_iter().map(|inner| PyPanel { inner }).collect())
}

#[pyfunction]
fn save_panels(panels: Vec<PyRef<'_, PyPanel>>, forecasts: PathBuf, observations: PathBuf) -> PyResult<()> {
    let panels: Vec<cdfagg::ExpertPanel> = panels.iter().map(|p| p.inner.clone()).collect();
    write_panels_csv(&panels, &forecasts, &observations).map_err(to_py)
}

/// Synthetic panels described by a TOML document with the same schema as the
/// command-line configuration (only its `seed` and `[scenario]` are used).
#[pyfunction]
#[pyo3(signature = (config_toml = ""))]
fn simulate(config_toml: &str) -> PyResult<Vec<PyPanel>> {
    let cfg = RunConfig::from_toml(config_toml).map_err(to_py)?;
    let mut spec = cfg.scenario;
    spec.seed = cfg.seed;
    let panels = generate_scenario_set(&spec).map_err(to_py)?;
    Ok(panels.into_iter().map(|inner| PyPanel { inner }).collect())
}

fn parse_window(window: &Bound<'_, PyAny>) -> PyResult<Window> {
    if let Ok(days) = window.extract::<usize>() {
        return format!("{days}").parse().map_err(to_py);
    }
    let text: String = window.extract()?;
    text.parse().map_err(to_py)
}

/// Strategy kind (INV, SHARP, MIN, EWA or GRAD) with its window and
/// learning rate.
#[pyclass(name = "StrategyConfig", module = "cdfagg", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStrategy {
    inner: aggregation::StrategyConfig,
}

#[pymethods]
impl PyStrategy {
    #[new]
    #[pyo3(signature = (kind, window, eta = 1.0, reli_threshold = aggregation::DEFAULT_RELI_THRESHOLD))]
    fn new(kind: &str, window: &Bound<'_, PyAny>, eta: f64, reli_threshold: f64) -> PyResult<Self> {
        let kind: aggregation::StrategyKind = kind.parse().map_err(to_py)?;
        let inner = aggregation::StrategyConfig::new(kind, parse_window(window)?)
            .with_eta(eta)
            .with_reli_threshold(reli_threshold);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    fn __repr__(&self) -> String {
        format!("StrategyConfig({})", self.inner.id())
    }
}

/// Weights, losses and regrets of one strategy on one panel.
#[pyclass(name = "AggregationRun", module = "cdfagg", frozen)]
struct PyRun {
    inner: aggregation::AggregationRun,
}

#[pymethods]
impl PyRun {
    /// Weights per day, one list per day.
    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights().iter().map(|w| w.as_slice().to_vec()).collect()
    }

    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.inner.losses().losses().to_vec()
    }

    #[getter]
    fn mean_loss(&self) -> f64 {
        self.inner.mean_loss()
    }

    #[getter]
    fn regret_best_expert(&self) -> Vec<f64> {
        self.inner.regret_best_expert().to_vec()
    }

    #[getter]
    fn regret_best_constant(&self) -> Vec<f64> {
        self.inner.regret_best_constant().to_vec()
    }

    /// Aggregated forecast of day `t` (1-based).
    fn aggregate_at(&self, panel: &PyPanel, t: usize) -> PyResult<PyCdf> {
        if t == 0 || t > self.inner.n_days() || panel.inner.n_days() != self.inner.n_days() {
            return Err(PyValueError::new_err(format!("no aggregate for day {t}")));
        }
        Ok(PyCdf {
            inner: self.inner.aggregate_at(&panel.inner, t).map_err(to_py)?,
        })
    }
}

#[pyfunction]
fn run_aggregation(py: Python<'_>, panel: &PyPanel, config: &PyStrategy) -> PyResult<PyRun> {
    let (panel, config) = (panel.inner.clone(), config.inner);
    let inner = py
        .detach(|| cdfagg::run_aggregation(&panel, &config))
        .map_err(to_py)?;
    Ok(PyRun { inner })
}

fn histogram(counts: Vec<u64>) -> PyResult<RankHistogram> {
    RankHistogram::from_counts(counts).map_err(to_py)
}

/// Chi-square statistic and p-value of a rank histogram.
#[pyfunction]
fn chi2_test(counts: Vec<u64>) -> PyResult<(f64, f64)> {
    let t = reliability::chi2_test(&histogram(counts)?);
    Ok((t.stat, t.pvalue))
}

/// Chi-square and slope, convexity and wave contrast tests of a rank histogram.
#[pyfunction]
fn flatness_test<'py>(py: Python<'py>, counts: Vec<u64>) -> PyResult<Bound<'py, PyDict>> {
    let r = reliability::jp_test(&histogram(counts)?).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("chi2", (r.chi2_stat, r.chi2_pvalue))?;
    out.set_item("slope", (r.slope.stat, r.slope.pvalue))?;
    out.set_item("convexity", (r.convexity.stat, r.convexity.pvalue))?;
    out.set_item("wave", (r.wave.stat, r.wave.pvalue))?;
    out.set_item("small_counts", r.small_counts)?;
    Ok(out)
}

/// Fraction of histograms deemed flat at false discovery rate `alpha`.
#[pyfunction]
#[pyo3(signature = (histograms, alpha = reliability::DEFAULT_ALPHA))]
fn flat_proportion(histograms: Vec<Vec<u64>>, alpha: f64) -> PyResult<f64> {
    let hs = histograms.into_iter().map(histogram).collect::<PyResult<Vec<_>>>()?;
    reliability::flat_proportion(&hs, alpha).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "cdfagg")]
fn cdfagg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCdf>()?;
    m.add_class::<PyPanel>()?;
    m.add_class::<PyStrategy>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(convex_combine, m)?)?;
    m.add_function(wrap_pyfunction!(crps_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(crps_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(crps_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(load_panels, m)?)?;
    m.add_function(wrap_pyfunction!(save_panels, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_aggregation, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_test, m)?)?;
    m.add_function(wrap_pyfunction!(flatness_test, m)?)?;
    m.add_function(wrap_pyfunction!(flat_proportion, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
