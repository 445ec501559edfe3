//! Experiment runner for the spectral bandit policies: BA synthetic runs,
//! ratings-derived graphs, timing studies, regret-bound checks, and CSV/SVG output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod pipeline;
pub mod timing;

pub use config::{ExperimentConfig, GraphSource, NormBound, PolicySpec};
pub use error::{HarnessError, Result};
pub use experiment::{bound_checks, run_experiment, run_experiment_cached, AggregateResult, RunRecord};
pub use output::emit_outputs;
pub use timing::{time_complexity_study, TimingRow};
