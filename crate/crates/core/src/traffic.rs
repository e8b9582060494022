//! Constant-bit-rate flows with an adjustable rate.

use crate::engine::SimTime;
use crate::ids::{FlowId, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowState {
    PendingAdmission,
    Active,
    Rejected,
    Done,
}

#[derive(Clone, Debug)]
pub struct CbrFlow {
    pub id: FlowId,
    pub source: NodeId,
    pub destination: NodeId,
    pub packet_bytes: u32,
    /// Current sending rate, bits/s.
    pub rate_bps: f64,
    /// Bandwidth requested at admission, bits/s.
    pub rbw_bps: f64,
    /// Bounds the congestion controller may move the rate within.
    pub rate_min_bps: f64,
    pub rate_max_bps: f64,
    pub start: SimTime,
    pub stop: Option<SimTime>,
    pub state: FlowState,
    pub sent: u64,
}

impl CbrFlow {
    pub fn packet_bits(&self) -> u32 {
        self.packet_bytes * 8
    }

    /// Gap until the next packet at the current rate.
    pub fn interval(&self) -> SimTime {
        SimTime::from_secs(self.packet_bits() as f64 / self.rate_bps)
    }

    pub fn set_rate(&mut self, rate_bps: f64) {
        self.rate_bps = rate_bps.clamp(self.rate_min_bps, self.rate_max_bps);
    }

    pub fn is_active(&self) -> bool {
        self.state == FlowState::Active
    }
}
