use serde::{Deserialize, Serialize};

use crate::engine::SimTime;

/// DCF timing and control-frame sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacTiming {
    pub sifs_s: f64,
    pub difs_s: f64,
    pub slot_s: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub control_rate_bps: f64,
    pub rts_bits: u32,
    pub cts_bits: u32,
    pub ack_bits: u32,
}

impl Default for MacTiming {
    fn default() -> Self {
        MacTiming {
            sifs_s: 10e-6,
            difs_s: 50e-6,
            slot_s: 20e-6,
            cw_min: 31,
            cw_max: 1023,
            control_rate_bps: 2e6,
            rts_bits: 160,
            cts_bits: 112,
            ack_bits: 112,
        }
    }
}

impl MacTiming {
    pub fn t_rts(&self) -> f64 {
        self.rts_bits as f64 / self.control_rate_bps
    }

    pub fn t_cts(&self) -> f64 {
        self.cts_bits as f64 / self.control_rate_bps
    }

    pub fn t_ack(&self) -> f64 {
        self.ack_bits as f64 / self.control_rate_bps
    }

    /// Next contention window after a failed attempt (binary exponential).
    pub fn grow_cw(&self, cw: u32) -> u32 {
        (2 * cw + 1).min(self.cw_max)
    }
}

/// Channel occupation of one RTS/CTS handshake: `t_RTS + t_CTS + 3 t_SIFS`.
pub fn channel_occupation(timing: &MacTiming) -> f64 {
    timing.t_rts() + timing.t_cts() + 3.0 * timing.sifs_s
}

/// Per-window accumulation of MAC overhead at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentionWindowStats {
    pub window_start: SimTime,
    /// Access-contention time summed over the window's handshakes, seconds.
    pub t_acc_total: f64,
    pub handshake_count: u32,
}

impl ContentionWindowStats {
    pub fn new(window_start: SimTime) -> Self {
        ContentionWindowStats {
            window_start,
            t_acc_total: 0.0,
            handshake_count: 0,
        }
    }

    pub fn record_handshake(&mut self, t_acc: f64) {
        debug_assert!(t_acc >= 0.0);
        self.handshake_count += 1;
        self.t_acc_total += t_acc;
    }

    /// `OH_MAC` accumulated so far, without closing the window.
    pub fn overhead(&self, c_occ: f64) -> f64 {
        self.handshake_count as f64 * c_occ + self.t_acc_total
    }

    /// Closes the window at `now`, returning `OH_MAC` and starting a fresh one.
    pub fn measure_overhead(&mut self, c_occ: f64, now: SimTime) -> f64 {
        let oh = self.overhead(c_occ);
        *self = ContentionWindowStats::new(now);
        oh
    }
}
