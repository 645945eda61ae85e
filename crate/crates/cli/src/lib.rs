//! Scenario configuration, built-in presets and the runner behind the
//! `lrwsim` binary.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod presets;
pub mod runner;
pub mod workload;

pub use calibrate::{calibrate_loss, reliability_at, search_loss, Calibration};
pub use config::{
    CalibrationConfig, CommitSetting, InitiatorSelector, LossSetting, Mode, PrimitiveMode,
    RadioConfig, ScenarioConfig, TimersConfig, TopologyConfig, TopologyKind, WorkloadConfig,
};
pub use error::{CalibrationError, CliError, ConfigError};
pub use presets::{preset, preset_library, preset_names};
pub use runner::{lrw_points, run, run_lrw_point, Point, PointResult, Report};

/// Overrides the seed from the environment when no flag sets it.
pub const SEED_ENV: &str = "LRWSIM_SEED";
