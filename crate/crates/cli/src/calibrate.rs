//! Loss calibration against the no-contention reliability curve: one
//! initiator, a star of `neighbors` leaves, and two timeouts. Reliability
//! falls with loss at both timeouts, so each target splits `[lo, hi]` into
//! an admissible and an inadmissible side and bisection finds the boundary.
//!
//! Every evaluation reuses the same seed, so all candidates see the same
//! substreams.

use std::sync::{Mutex, OnceLock};

use lrw_metrics::reliability;

use crate::config::{
    CalibrationConfig, InitiatorSelector, LossSetting, PrimitiveMode, RadioConfig, ScenarioConfig,
    TopologyConfig, TopologyKind,
};
use crate::error::CalibrationError;
use crate::runner::{run_lrw_point, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub loss_prob: f64,
    /// Smallest loss found to push the short-timeout reliability below target.
    pub p_low: f64,
    /// Largest loss found to keep the long-timeout reliability on target.
    pub p_high: f64,
    pub evaluations: u32,
}

/// The scenario evaluated at each candidate loss.
pub fn calibration_scenario(c: &CalibrationConfig, radio: &RadioConfig, loss_prob: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        name: "calibration".into(),
        trials: c.trials,
        seed: c.seed,
        topology: TopologyConfig {
            kind: TopologyKind::Star,
            sizes: vec![c.neighbors],
            churn_rate: 0.0,
        },
        initiators: InitiatorSelector::Center,
        radio: RadioConfig {
            loss: LossSetting::Fixed(loss_prob),
            primitives: vec![PrimitiveMode::Broadcast],
            ..radio.clone()
        },
        ..ScenarioConfig::default()
    };
    cfg.timers.timeouts_ms = vec![Some(c.low_timeout_ms), Some(c.high_timeout_ms)];
    cfg
}

/// Operation reliability (percent) at one timeout and loss.
pub fn reliability_at(
    c: &CalibrationConfig,
    radio: &RadioConfig,
    timeout_ms: u64,
    loss_prob: f64,
) -> Result<f64, CalibrationError> {
    let cfg = calibration_scenario(c, radio, loss_prob);
    let point = Point {
        timeout_ms: Some(timeout_ms),
        size: c.neighbors,
        primitive: PrimitiveMode::Broadcast,
    };
    let result = run_lrw_point(&cfg, loss_prob, point, false)
        .map_err(|e| CalibrationError::Run(e.to_string()))?;
    Ok(reliability(&result.ops).unwrap_or(0.0))
}

/// Smallest `p` in `[lo, hi]` where `pred` holds, assuming `pred` is
/// monotone false-then-true. `None` if it never holds.
fn first_true(
    lo: f64,
    hi: f64,
    tolerance: f64,
    evaluations: &mut u32,
    mut pred: impl FnMut(f64) -> Result<bool, CalibrationError>,
) -> Result<Option<f64>, CalibrationError> {
    *evaluations += 1;
    if pred(lo)? {
        return Ok(Some(lo));
    }
    *evaluations += 1;
    if !pred(hi)? {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tolerance {
        let mid = 0.5 * (a + b);
        *evaluations += 1;
        if pred(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(b))
}

fn cache() -> &'static Mutex<Vec<(String, Calibration)>> {
    static CACHE: OnceLock<Mutex<Vec<(String, Calibration)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// [`search_loss`], memoized per process.
pub fn calibrate_loss(c: &CalibrationConfig, radio: &RadioConfig) -> Result<Calibration, CalibrationError> {
    let key = format!("{c:?}|{}|{}|{}", radio.mac_delay_lo_ms, radio.mac_delay_hi_ms, radio.ack_delay_ms);
    if let Some((_, hit)) = cache().lock().expect("cache lock").iter().find(|(k, _)| *k == key) {
        return Ok(*hit);
    }
    let result = search_loss(c, radio)?;
    cache().lock().expect("cache lock").push((key, result));
    Ok(result)
}

/// Midpoint of the loss interval that puts reliability below
/// `below_pct` at the short timeout and at least `at_least_pct` at the long
/// one.
pub fn search_loss(c: &CalibrationConfig, radio: &RadioConfig) -> Result<Calibration, CalibrationError> {
    let mut evaluations = 0;
    let p_low = first_true(c.lo, c.hi, c.tolerance, &mut evaluations, |p| {
        Ok(reliability_at(c, radio, c.low_timeout_ms, p)? < c.below_pct)
    })?;
    let too_lossy = first_true(c.lo, c.hi, c.tolerance, &mut evaluations, |p| {
        Ok(reliability_at(c, radio, c.high_timeout_ms, p)? < c.at_least_pct)
    })?;
    let infeasible = CalibrationError::NoFeasiblePoint { lo: c.lo, hi: c.hi };
    let p_low = p_low.ok_or(infeasible.clone())?;
    let p_high = match too_lossy {
        Some(p) if p <= c.lo => return Err(infeasible),
        // The boundary is the last admissible point below the first failure.
        Some(p) => (p - c.tolerance).max(c.lo),
        None => c.hi,
    };
    if p_low > p_high {
        return Err(infeasible);
    }
    Ok(Calibration {
        loss_prob: 0.5 * (p_low + p_high),
        p_low,
        p_high,
        evaluations,
    })
}
