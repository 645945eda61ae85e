use crate::error::MetricsError;
use crate::records::{OpRecord, SeriesRecord};

/// Percentage of operations that did not fail.
pub fn reliability(ops: &[OpRecord]) -> Result<f64, MetricsError> {
    percent(ops.iter().filter(|o| !o.is_failed()).count(), ops.len())
}

/// Percentage of series without a failed member. Bounded above by
/// `reliability` of the member operations only when all series have the
/// same size.
pub fn series_reliability(series: &[SeriesRecord]) -> Result<f64, MetricsError> {
    percent(series.iter().filter(|s| !s.failed).count(), series.len())
}

fn percent(hits: usize, total: usize) -> Result<f64, MetricsError> {
    if total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(100.0 * hits as f64 / total as f64)
}

pub fn mean(samples: &[f64]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(samples: &[f64]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples(samples.len()));
    }
    let m = mean(samples)?;
    let ss: f64 = samples.iter().map(|x| (x - m).powi(2)).sum();
    Ok((ss / (samples.len() - 1) as f64).sqrt())
}

/// Mean and normal-approximation 95% half-width `1.96 s / sqrt(n)`.
/// Optimistic for small n.
pub fn mean_ci95(samples: &[f64]) -> Result<(f64, f64), MetricsError> {
    let s = std_dev(samples)?;
    Ok((mean(samples)?, 1.96 * s / (samples.len() as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bin {
    pub lo_ms: f64,
    pub hi_ms: f64,
    pub pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bin_width_ms: f64,
    /// Contiguous bins `[k w, (k+1) w)` from zero through the largest sample.
    pub bins: Vec<Bin>,
}

/// Percentage of samples per bin. Empty input yields no bins.
pub fn histogram(samples_ms: &[f64], bin_width_ms: f64) -> Result<Histogram, MetricsError> {
    if !(bin_width_ms > 0.0 && bin_width_ms.is_finite()) {
        return Err(MetricsError::InvalidBinWidth);
    }
    let index = |x: f64| (x.max(0.0) / bin_width_ms).floor() as usize;
    let len = samples_ms.iter().map(|x| index(*x) + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; len];
    for x in samples_ms {
        counts[index(*x)] += 1;
    }
    let total = samples_ms.len() as f64;
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| Bin {
            lo_ms: k as f64 * bin_width_ms,
            hi_ms: (k + 1) as f64 * bin_width_ms,
            pct: 100.0 * c as f64 / total,
        })
        .collect();
    Ok(Histogram { bin_width_ms, bins })
}

/// Histogram of optimistic durations.
pub fn duration_histogram(ops: &[OpRecord], bin_width_ms: f64) -> Result<Histogram, MetricsError> {
    let samples: Vec<f64> = ops.iter().map(OpRecord::optimistic_ms).collect();
    histogram(&samples, bin_width_ms)
}

impl Histogram {
    pub fn total_pct(&self) -> f64 {
        self.bins.iter().map(|b| b.pct).sum()
    }

    /// Bin indices of peaks holding at least `min_pct` whose topographic
    /// prominence is at least `min_prominence` percentage points, tallest
    /// first. A flat-topped peak is reported at its leftmost bin.
    pub fn modes(&self, min_pct: f64, min_prominence: f64) -> Vec<usize> {
        let h: Vec<f64> = self.bins.iter().map(|b| b.pct).collect();
        let mut peaks: Vec<usize> = (0..h.len())
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { h[i - 1] };
                let right = h.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
                h[i] >= min_pct && h[i] > left && h[i] >= right
            })
            .filter(|&i| prominence(&h, i) >= min_prominence)
            .collect();
        peaks.sort_by(|a, b| h[*b].total_cmp(&h[*a]).then(a.cmp(b)));
        peaks
    }

    pub fn bin_center_ms(&self, index: usize) -> f64 {
        let b = &self.bins[index];
        (b.lo_ms + b.hi_ms) / 2.0
    }
}

/// Height above the higher of the two lowest points separating `i` from
/// taller terrain on each side. The global peak is measured against zero.
fn prominence(h: &[f64], i: usize) -> f64 {
    let side_min = |range: &mut dyn Iterator<Item = usize>| {
        let mut low = h[i];
        for j in range {
            if h[j] > h[i] {
                return Some(low);
            }
            low = low.min(h[j]);
        }
        None
    };
    let left = side_min(&mut (0..i).rev());
    let right = side_min(&mut (i + 1..h.len()));
    let base = match (left, right) {
        (Some(l), Some(r)) => l.max(r),
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => 0.0,
    };
    h[i] - base
}

/// Mean broadcast frames per operation.
pub fn mean_broadcasts(ops: &[OpRecord]) -> Result<f64, MetricsError> {
    let counts: Vec<f64> = ops.iter().map(|o| o.broadcasts_sent as f64).collect();
    mean(&counts)
}
