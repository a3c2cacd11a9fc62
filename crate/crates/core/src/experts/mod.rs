//! Expert supply: synthetic scenarios, panel files and NR post-processing.

mod csv_io;
mod nr;
mod panel;
mod scenario;
mod truncnorm;

pub use csv_io::{
    format_value, load_panel_csv, load_panels_csv, read_panels, write_forecasts, write_observations,
    write_panels_csv, FORECAST_HEADER, OBSERVATION_HEADER,
};
pub use nr::{
    nelder_mead, nr_expert, nr_fit, nr_forecast, nr_log_likelihood, nr_orders, nr_start, sqrt_moments,
    NelderMeadResult, NrFit, NrParams, TrainingDay, MIN_TRAINING_DAYS, MIN_VARIANCE,
};
pub use panel::ExpertPanel;
pub use scenario::{
    generate_scenario, generate_scenario_set, location_id, Distortion, ExpertKind, ExpertSpec, ObservationProcess,
    ScenarioSpec,
};
pub use truncnorm::{
    ln_norm_cdf, norm_cdf, norm_quantile, truncnorm_cdf, truncnorm_ln_pdf, truncnorm_quantile,
};
