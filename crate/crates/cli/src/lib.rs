//! Command-line harness for the privnet simulator: JSON configs, parallel
//! parameter sweeps, CSV tables and SVG rate plots.

pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{parse_config, parse_config_str, Axis, Experiment, ExperimentConfig, SweepSpec};
pub use error::CliError;
pub use output::{emit_csv, emit_plot, read_csv, render_svg, write_csv, CSV_HEADER};
pub use sweep::{run_experiment, run_sweep, run_sweep_with_workers, ResultRow, SweepResult};
