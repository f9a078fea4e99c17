//! Experiment runner for the `pcsft` library: JSON configs, seeded runs,
//! CSV and JSON outputs.

pub mod commands;
pub mod config;
pub mod output;
pub mod random;
pub mod verify;

pub use commands::{run, Command, CommandError, Output};
pub use config::{ConfigError, ExperimentConfig, Plan};
pub use output::Format;

/// Exit status of a finished invocation.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

/// Loads the config (defaults when `path` is `None`), applies the seed
/// override and validates it.
pub fn load_plan(
    path: Option<&std::path::Path>,
    seed: Option<u64>,
) -> Result<Plan, ConfigError> {
    let mut config = match path {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()
}
