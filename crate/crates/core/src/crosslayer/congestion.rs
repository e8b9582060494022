//! MAC-overhead-driven rate control.

use serde::{Deserialize, Serialize};

use crate::ids::FlowId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongestionParams {
    /// Overhead threshold per window, seconds.
    pub t_rh_s: f64,
    pub window_s: f64,
    pub rt_min_bps: f64,
    pub rt_max_bps: f64,
    /// Minimum |ΔS| relative to the flow rate worth acting on.
    pub hysteresis: f64,
}

impl Default for CongestionParams {
    fn default() -> Self {
        CongestionParams {
            t_rh_s: 0.2,
            window_s: 0.5,
            rt_min_bps: 8_192.0,
            rt_max_bps: 2e6,
            hysteresis: 0.05,
        }
    }
}

/// Channel-resource surplus (positive) or deficit (negative) given the
/// measured overhead `oh_mac` against threshold `t_rh` at load `s`:
/// `((t_rh - oh_mac) / oh_mac) * s`. An overhead of exactly zero returns
/// `delta_max` instead of dividing by zero.
pub fn channel_resource_delta(oh_mac: f64, t_rh: f64, s: f64, delta_max: f64) -> f64 {
    debug_assert!(s >= 0.0 && oh_mac >= 0.0);
    if oh_mac == 0.0 {
        return delta_max;
    }
    (t_rh - oh_mac) / oh_mac * s
}

/// Applies feedback `fd` to rate `rt`, clamped to `[rt_min, rt_max]`.
pub fn adjust_rate(rt: f64, fd: f64, rt_min: f64, rt_max: f64) -> f64 {
    (rt + fd).clamp(rt_min, rt_max)
}

/// Splits a node-level ΔS across flows in proportion to the bits each flow
/// pushed through the node during the window.
pub fn apportion(delta: f64, flow_bits: &[(FlowId, u64)]) -> Vec<(FlowId, f64)> {
    let total: u64 = flow_bits.iter().map(|(_, b)| b).sum();
    if total == 0 {
        return Vec::new();
    }
    flow_bits
        .iter()
        .map(|&(f, b)| (f, delta * b as f64 / total as f64))
        .collect()
}

pub fn exceeds_hysteresis(delta: f64, rate: f64, fraction: f64) -> bool {
    delta.abs() >= fraction * rate
}
