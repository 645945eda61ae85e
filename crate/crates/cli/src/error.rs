use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("[{0}] unknown key `{1}`")]
    UnknownKey(String, String),
    #[error("[{section}] {key}: {message}")]
    Invalid {
        section: String,
        key: String,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] lrw_core::ConfigError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{0}")]
    Io(String),
}

impl ConfigError {
    pub fn invalid(section: &str, key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            section: section.to_owned(),
            key: key.to_owned(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Error)]
pub enum CalibrationError {
    #[error("no loss probability in [{lo}, {hi}] meets both reliability targets")]
    NoFeasiblePoint { lo: f64, hi: f64 },
    #[error("calibration run failed: {0}")]
    Run(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Sim(#[from] simnet::SimError),
    #[error("{0} audit violation(s); first: {1}")]
    Audit(usize, String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for anything that stops a run, 2 when a run completed but its audit failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Audit(..) => 2,
            _ => 1,
        }
    }

    /// Machine-parsable category for the stderr prefix.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Calibration(_) | CliError::Sim(_) => "config",
            CliError::Audit(..) => "audit",
            CliError::Io(_) => "io",
        }
    }
}
