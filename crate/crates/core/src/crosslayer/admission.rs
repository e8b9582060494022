//! Hello-based feasible-bandwidth estimation and the four-step admission test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::FlowId;

/// How the weight factor applies in `FBW = (CHBW - UBW / WT)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FbwMode {
    /// `(CHBW - UBW) / WT`
    DiscountTotal,
    /// `CHBW - UBW / WT`
    DiscountUsed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissionParams {
    pub channel_bps: f64,
    pub weight: f64,
    pub min_bw_bps: f64,
    pub max_bw_bps: f64,
    pub fbw_mode: FbwMode,
}

impl Default for AdmissionParams {
    fn default() -> Self {
        AdmissionParams {
            channel_bps: 2e6,
            weight: 2.0,
            min_bw_bps: 0.05 * 2e6,
            max_bw_bps: 0.40 * 2e6,
            fbw_mode: FbwMode::DiscountTotal,
        }
    }
}

/// Feasible bandwidth given the total consumed bandwidth in the two-hop
/// neighborhood. Never negative.
pub fn feasible_bandwidth(channel_bps: f64, used_bps: f64, weight: f64, mode: FbwMode) -> f64 {
    let fbw = match mode {
        FbwMode::DiscountTotal => (channel_bps - used_bps) / weight,
        FbwMode::DiscountUsed => channel_bps - used_bps / weight,
    };
    fbw.max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdmissionDecision {
    Admit,
    Reject,
    Probe,
}

/// Admission test: reject when local FBW cannot carry RBW; admit small flows;
/// reject oversized flows; probe the path for everything in between.
pub fn admit_flow(rbw: f64, fbw_local: f64, min_bw: f64, max_bw: f64) -> AdmissionDecision {
    if fbw_local < rbw {
        AdmissionDecision::Reject
    } else if rbw < min_bw {
        AdmissionDecision::Admit
    } else if rbw > max_bw {
        AdmissionDecision::Reject
    } else {
        AdmissionDecision::Probe
    }
}

/// Final verdict for a probed flow from the path-minimum FBW.
pub fn probe_verdict(min_fbw: f64, rbw: f64) -> AdmissionDecision {
    if min_fbw >= rbw {
        AdmissionDecision::Admit
    } else {
        AdmissionDecision::Reject
    }
}

/// A node's own bandwidth register: reservations of admitted flows it
/// sources, plus measured relay load.
#[derive(Clone, Debug, Default)]
pub struct BandwidthBook {
    reservations: BTreeMap<FlowId, f64>,
    admitted_total: f64,
    released_total: f64,
    pub relay_bps: f64,
}

impl BandwidthBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve(&mut self, flow: FlowId, rbw: f64) {
        debug_assert!(rbw > 0.0);
        if self.reservations.insert(flow, rbw).is_none() {
            self.admitted_total += rbw;
        }
    }

    pub fn release(&mut self, flow: FlowId) {
        if let Some(r) = self.reservations.remove(&flow) {
            self.released_total += r;
        }
    }

    pub fn reserved(&self) -> f64 {
        self.reservations.values().sum()
    }

    /// Admissions minus releases, tracked independently of the map.
    pub fn net_admitted(&self) -> f64 {
        self.admitted_total - self.released_total
    }

    pub fn own_consumed(&self) -> f64 {
        self.reserved() + self.relay_bps
    }

    pub fn feasible(&self, neighborhood_bps: f64, p: &AdmissionParams) -> f64 {
        feasible_bandwidth(p.channel_bps, self.own_consumed() + neighborhood_bps, p.weight, p.fbw_mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AdmissionDecision::*;

    #[test]
    fn fbw_examples() {
        assert_eq!(feasible_bandwidth(2000e3, 1000e3, 2.0, FbwMode::DiscountTotal), 500e3);
        assert_eq!(feasible_bandwidth(2000e3, 0.0, 1.0, FbwMode::DiscountTotal), 2000e3);
        assert_eq!(feasible_bandwidth(2000e3, 2500e3, 2.0, FbwMode::DiscountTotal), 0.0);
        assert_eq!(feasible_bandwidth(2000e3, 1000e3, 2.0, FbwMode::DiscountUsed), 1500e3);
    }

    #[test]
    fn admission_steps() {
        assert_eq!(admit_flow(600.0, 500.0, 200.0, 800.0), Reject);
        assert_eq!(admit_flow(100.0, 800.0, 200.0, 800.0), Admit);
        assert_eq!(admit_flow(900.0, 2000.0, 200.0, 800.0), Reject);
        assert_eq!(admit_flow(500.0, 2000.0, 200.0, 800.0), Probe);
        assert_eq!(admit_flow(200.0, 2000.0, 200.0, 800.0), Probe);
        assert_eq!(admit_flow(800.0, 2000.0, 200.0, 800.0), Probe);
    }

    #[test]
    fn probe_verdicts() {
        assert_eq!(probe_verdict(300.0, 300.0), Admit);
        assert_eq!(probe_verdict(299.0, 300.0), Reject);
    }

    #[test]
    fn reservation_bookkeeping() {
        let mut b = BandwidthBook::new();
        b.reserve(FlowId(1), 100.0);
        b.reserve(FlowId(2), 50.0);
        b.release(FlowId(1));
        b.release(FlowId(9));
        assert_eq!(b.reserved(), 50.0);
        assert_eq!(b.net_admitted(), b.reserved());
        b.relay_bps = 25.0;
        assert_eq!(b.own_consumed(), 75.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fbw_nonincreasing_in_neighbor_load(base in 0.0f64..3e6, extra in 0.0f64..1e6, wt in 0.5f64..4.0) {
                let p = AdmissionParams { weight: wt, ..AdmissionParams::default() };
                let b = BandwidthBook::new();
                prop_assert!(b.feasible(base + extra, &p) <= b.feasible(base, &p));
            }
        }
    }
}
