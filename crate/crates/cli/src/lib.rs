//! Experiment tooling over the simulation core: configuration files,
//! parameter sweeps with CSV output, contention-model curves, and plots.

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
pub use plot::{emit_plots, FigureKind, PlotError};
pub use sweep::{
    aggregate_csv, best_param_per_load, contention_csv, raw_csv, run_sweep, ResultRow, SweepError,
    SweepKind,
};
