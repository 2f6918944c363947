//! Front end for the transfer-operator engine: configuration, presets and
//! run orchestration. The `sto` binary is a thin wrapper over this crate.

pub mod config;
pub mod presets;
pub mod scenario;

pub use config::{parse_config, ConfigError, ErrorCode, ExperimentConfig};
pub use scenario::{emit_plot_data, run_scenario, CliError, Command, Outcome, Plan};
