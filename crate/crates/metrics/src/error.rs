use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no samples")]
    EmptyInput,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("bin width must be positive")]
    InvalidBinWidth,
}
