//! Outcome statistics and trace audits for simulated LRW runs.

pub mod audit;
pub mod csv;
pub mod error;
pub mod records;
pub mod stats;

pub use audit::{
    audit_consistency, audit_serializability, audit_single_engagement, ConsistencyReport,
    Divergence, Violation,
};
pub use csv::{write_durations, write_histogram, write_reliability, ReliabilityRow};
pub use error::MetricsError;
pub use records::{op_records, series_by_trial, OpRecord, SeriesRecord};
pub use stats::{
    duration_histogram, histogram, mean, mean_broadcasts, mean_ci95, reliability,
    series_reliability, std_dev, Bin, Histogram,
};
