use std::collections::BTreeMap;

use lrw_core::{ConfigError, NodeId, MS};
use rand::Rng;

/// Link-layer behavior. Collisions are folded into `loss_prob`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioModel {
    /// Drop probability on every directed link without an override.
    pub loss_prob: f64,
    /// Per directed link `(from, to)` overrides.
    pub link_loss: BTreeMap<(NodeId, NodeId), f64>,
    /// MAC backoff is uniform over `[mac_lo_us, mac_hi_us]` in whole µs.
    pub mac_lo_us: u64,
    pub mac_hi_us: u64,
    /// A delivered unicast is acknowledged by the receiver's radio after
    /// `ack_delay_us`, with no MAC backoff and no loss.
    pub unicast_hw_ack: bool,
    pub ack_delay_us: u64,
    /// Receive-side processing added between going on air and delivery.
    pub proc_delay_us: u64,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            loss_prob: 0.0,
            link_loss: BTreeMap::new(),
            mac_lo_us: 3 * MS,
            mac_hi_us: 12 * MS,
            unicast_hw_ack: false,
            ack_delay_us: MS,
            proc_delay_us: 0,
        }
    }
}

impl RadioModel {
    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn with_loss(loss_prob: f64) -> Self {
        RadioModel {
            loss_prob,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        if !in_range(self.loss_prob) {
            return Err(ConfigError::LossOutOfRange(self.loss_prob));
        }
        if let Some(p) = self.link_loss.values().find(|p| !in_range(**p)) {
            return Err(ConfigError::LossOutOfRange(*p));
        }
        if self.mac_lo_us > self.mac_hi_us {
            return Err(ConfigError::Invalid(format!(
                "mac delay bounds inverted: {} > {} us",
                self.mac_lo_us, self.mac_hi_us
            )));
        }
        Ok(())
    }

    pub fn loss_for(&self, from: NodeId, to: NodeId) -> f64 {
        self.link_loss
            .get(&(from, to))
            .copied()
            .unwrap_or(self.loss_prob)
    }

    pub fn draw_mac<R: Rng>(&self, rng: &mut R) -> u64 {
        rng.gen_range(self.mac_lo_us..=self.mac_hi_us)
    }

    /// One uniform draw per call regardless of `p`, so the random stream
    /// is aligned across loss settings.
    pub fn draw_lost<R: Rng>(&self, rng: &mut R, from: NodeId, to: NodeId) -> bool {
        let u: f64 = rng.gen();
        u < self.loss_for(from, to)
    }

    pub fn mean_mac_us(&self) -> f64 {
        (self.mac_lo_us + self.mac_hi_us) as f64 / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn defaults_match_mote_mac() {
        let r = RadioModel::default();
        assert_eq!((r.mac_lo_us, r.mac_hi_us), (3000, 12000));
        assert_eq!(r.mean_mac_us(), 7500.0);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert_eq!(
            RadioModel::with_loss(1.5).validate(),
            Err(ConfigError::LossOutOfRange(1.5))
        );
        let mut r = RadioModel::default();
        r.link_loss.insert((NodeId(1), NodeId(2)), -0.1);
        assert!(r.validate().is_err());
    }

    #[test]
    fn extreme_loss_is_deterministic() {
        let mut rng = substream(1, 0);
        let never = RadioModel::with_loss(0.0);
        let always = RadioModel::with_loss(1.0);
        for _ in 0..1000 {
            assert!(!never.draw_lost(&mut rng, NodeId(0), NodeId(1)));
            assert!(always.draw_lost(&mut rng, NodeId(0), NodeId(1)));
        }
    }

    #[test]
    fn mac_draws_stay_in_bounds() {
        let r = RadioModel::default();
        let mut rng = substream(2, 0);
        for _ in 0..10_000 {
            let d = r.draw_mac(&mut rng);
            assert!((3000..=12000).contains(&d));
        }
    }
}
