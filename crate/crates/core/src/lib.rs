//! Online convex aggregation of probabilistic forecasts given as step-wise
//! CDFs, scored with the CRPS, with rank-histogram reliability checks.
//!
//! ```
//! use cdfagg::aggregation::WeightVector;
//! use cdfagg::stepwise_cdf::{convex_combine, StepwiseCdf};
//!
//! let a = StepwiseCdf::from_sample(&[1.0, 2.0, 5.0]).unwrap();
//! let b = StepwiseCdf::from_sample(&[3.0, 4.0, 6.0]).unwrap();
//! let mix = convex_combine(&[a, b], &WeightVector::uniform(2)).unwrap();
//! assert_eq!(mix.quantile(0.5).unwrap(), 3.0);
//! ```

pub mod aggregation;
pub mod cli;
pub mod error;
pub mod experts;
pub mod reliability;
pub mod scoring;
pub mod stepwise_cdf;

pub use aggregation::{run_aggregation, AggregationRun, StrategyConfig, StrategyKind, WeightVector};
pub use error::{Error, Result};
pub use experts::ExpertPanel;
pub use reliability::{FlatnessReport, RankHistogram};
pub use scoring::{CrpsDecomposition, ScoreSeries, Window};
pub use stepwise_cdf::{Observation, Provenance, StepwiseCdf};
