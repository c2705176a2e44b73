//! Per-node data and virtual queues and their block recursions.

use serde::{Deserialize, Serialize};

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// The five per-node queues. All start at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeQueues {
    /// Private data backlog (bits).
    pub q_p: f64,
    /// Open data backlog (bits).
    pub q_o: f64,
    /// Effective-private virtual queue (bits).
    pub q_pe: f64,
    /// Outage-ratio virtual queue (bits).
    pub z: f64,
    /// Average-power virtual queue.
    pub y: f64,
}

/// Service a node received in one block.
///
/// A node transmits in at most one mode per block, so `r_o` is zero whenever
/// `r_p` or `r_pe` is nonzero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockService {
    pub r_p: f64,
    pub r_o: f64,
    pub r_pe: f64,
    pub power_used: f64,
}

impl NodeQueues {
    /// `Q_p ← [Q_p − r_p]⁺ + A_p`, `Q_o ← [Q_o − r_o]⁺ + A_o`.
    pub fn update_data_queues(&self, service: &BlockService, a_p: f64, a_o: f64) -> Self {
        debug_assert!(a_p >= 0.0 && a_o >= 0.0);
        Self {
            q_p: pos(self.q_p - service.r_p) + a_p,
            q_o: pos(self.q_o - service.r_o) + a_o,
            ..*self
        }
    }

    /// `Q_pe ← [Q_pe − r_pe]⁺ + A_pe`, `Z ← [Z − A_pe + A_p(1−γ)]⁺`,
    /// `Y ← [Y + P_used − α]⁺`.
    pub fn update_virtual_queues(
        &self,
        service: &BlockService,
        a_p: f64,
        a_pe: f64,
        gamma: f64,
        alpha: f64,
    ) -> Self {
        debug_assert!((0.0..=1.0).contains(&gamma) && alpha > 0.0 && a_pe >= 0.0);
        Self {
            q_pe: pos(self.q_pe - service.r_pe) + a_pe,
            z: pos(self.z - a_pe + a_p * (1.0 - gamma)),
            y: pos(self.y + service.power_used - alpha),
            ..*self
        }
    }

    /// Bits actually drained from each data queue by `service`:
    /// `(min(Q_p, r_p), min(Q_o, r_o), min(Q_pe, r_pe))`.
    pub fn drained(&self, service: &BlockService) -> (f64, f64, f64) {
        (
            self.q_p.min(service.r_p),
            self.q_o.min(service.r_o),
            self.q_pe.min(service.r_pe),
        )
    }

    pub fn is_nonnegative(&self) -> bool {
        self.q_p >= 0.0 && self.q_o >= 0.0 && self.q_pe >= 0.0 && self.z >= 0.0 && self.y >= 0.0
    }

    /// Sum of the two real data backlogs.
    pub fn data_backlog(&self) -> f64 {
        self.q_p + self.q_o
    }
}
