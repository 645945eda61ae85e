//! Fixed-column CSV tables.
//!
//! - `reliability.csv`: `timeout_ms,op_reliability_pct,series_reliability_pct`
//! - `durations.csv`: `op_id,outcome,duration_ms`, with `op_id` as `trial/initiator:op`
//! - `histogram.csv`: `bin_lo_ms,bin_hi_ms,pct`

use std::io::{self, Write};

use crate::records::OpRecord;
use crate::stats::Histogram;

pub const RELIABILITY_HEADER: &str = "timeout_ms,op_reliability_pct,series_reliability_pct";
pub const DURATIONS_HEADER: &str = "op_id,outcome,duration_ms";
pub const HISTOGRAM_HEADER: &str = "bin_lo_ms,bin_hi_ms,pct";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReliabilityRow {
    /// `None` is an infinite timeout, written as `inf`.
    pub timeout_ms: Option<u64>,
    pub op_pct: f64,
    pub series_pct: f64,
}

pub fn write_reliability<W: Write>(mut w: W, rows: &[ReliabilityRow]) -> io::Result<()> {
    writeln!(w, "{RELIABILITY_HEADER}")?;
    for row in rows {
        match row.timeout_ms {
            Some(t) => write!(w, "{t}")?,
            None => write!(w, "inf")?,
        }
        writeln!(w, ",{:.2},{:.2}", row.op_pct, row.series_pct)?;
    }
    Ok(())
}

pub fn write_durations<W: Write>(mut w: W, ops: &[OpRecord]) -> io::Result<()> {
    writeln!(w, "{DURATIONS_HEADER}")?;
    for op in ops {
        writeln!(
            w,
            "{}/{},{},{:.3}",
            op.trial,
            op.op,
            op.outcome.as_str(),
            op.optimistic_ms()
        )?;
    }
    Ok(())
}

pub fn write_histogram<W: Write>(mut w: W, histogram: &Histogram) -> io::Result<()> {
    writeln!(w, "{HISTOGRAM_HEADER}")?;
    for b in &histogram.bins {
        writeln!(w, "{},{},{:.4}", b.lo_ms, b.hi_ms, b.pct)?;
    }
    Ok(())
}
