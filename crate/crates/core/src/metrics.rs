//! Run-time counters and end-of-run metrics.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::engine::SimTime;
use crate::ids::FlowId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropCause {
    QueueFull,
    RetryLimit,
    NoRoute,
    BufferFull,
    TtlExpired,
    NodeDead,
}

impl DropCause {
    pub const ALL: [DropCause; 6] = [
        DropCause::QueueFull,
        DropCause::RetryLimit,
        DropCause::NoRoute,
        DropCause::BufferFull,
        DropCause::TtlExpired,
        DropCause::NodeDead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DropCause::QueueFull => "queue_full",
            DropCause::RetryLimit => "retry_limit",
            DropCause::NoRoute => "no_route",
            DropCause::BufferFull => "buffer_full",
            DropCause::TtlExpired => "ttl_expired",
            DropCause::NodeDead => "node_dead",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlKind {
    Rreq,
    Rrep,
    Rerr,
    Hello,
    Probe,
    Notice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fate {
    InFlight,
    Delivered,
    Dropped,
}

/// Fate of one data packet plus the number of live copies in the network.
/// A copy exists at every node holding the packet; a MAC hop briefly leaves
/// two (sender until ACK, receiver once accepted).
#[derive(Clone, Copy, Debug)]
struct Track {
    fate: Fate,
    copies: u32,
    /// Why the most recent copy was lost, if any was.
    lost: Option<DropCause>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConsistencyError {
    #[error("packet conservation violated: sent {sent} != delivered {delivered} + dropped {dropped} + in flight {in_flight}")]
    Conservation {
        sent: u64,
        delivered: u64,
        dropped: u64,
        in_flight: u64,
    },
    #[error("energy ledger mismatch on node {node}: meter {meter} J, ledger {ledger} J")]
    EnergyLedger { node: usize, meter: f64, ledger: f64 },
    #[error("node {node} left the area at t={t}s: ({x}, {y})")]
    OutOfBounds { node: usize, t: f64, x: f64, y: f64 },
    #[error("data packet {uid} vanished without a delivery or drop record")]
    Leak { uid: u64 },
    #[error("packet delivery ratio {0} outside [0, 1]")]
    Pdr(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesSample {
    pub t: f64,
    pub value: f64,
}

/// Per-node energy as seen by the simulation at finalize.
#[derive(Clone, Copy, Debug)]
pub struct NodeEnergy {
    pub initial: f64,
    pub residual: f64,
    pub consumed: f64,
}

#[derive(Clone, Debug, Default)]
pub struct MetricsCollector {
    fates: HashMap<u64, Track>,
    sent: u64,
    delivered: u64,
    dropped: u64,
    delivered_bits: u64,
    delay_sum: f64,
    drops_by_cause: BTreeMap<DropCause, u64>,
    control: BTreeMap<ControlKind, u64>,
    energy_charged: Vec<f64>,
    flows_admitted: u64,
    flows_rejected: u64,
    per_flow_sent: BTreeMap<FlowId, u64>,
    series: BTreeMap<String, Vec<TimeSeriesSample>>,
}

impl MetricsCollector {
    pub fn new(nodes: usize) -> Self {
        MetricsCollector {
            energy_charged: vec![0.0; nodes],
            ..Default::default()
        }
    }

    pub fn data_sent(&mut self, uid: u64, flow: FlowId) {
        let prev = self.fates.insert(uid, Track { fate: Fate::InFlight, copies: 1, lost: None });
        assert!(prev.is_none(), "data uid {uid} sent twice");
        self.sent += 1;
        *self.per_flow_sent.entry(flow).or_default() += 1;
    }

    /// A receiver accepted a copy while the sender still holds its own.
    pub fn data_copied(&mut self, uid: u64) {
        if let Some(t) = self.fates.get_mut(&uid) {
            t.copies += 1;
        }
    }

    /// A sender's copy was handed on successfully.
    /// When a downstream copy was already lost and this was the last one
    /// (the receiver dropped it, then acknowledged a retransmission as a
    /// duplicate), the packet is dropped with that earlier cause.
    pub fn data_released(&mut self, uid: u64) {
        let Some(t) = self.fates.get_mut(&uid) else { return };
        t.copies = t.copies.saturating_sub(1);
        if t.copies == 0 && t.fate == Fate::InFlight {
            if let Some(cause) = t.lost {
                t.fate = Fate::Dropped;
                self.dropped += 1;
                *self.drops_by_cause.entry(cause).or_default() += 1;
            }
        }
    }

    /// A copy reached the destination. Only the first arrival counts;
    /// returns whether this one did.
    pub fn data_delivered(&mut self, uid: u64, delay: SimTime, bits: u32) -> bool {
        let Some(t) = self.fates.get_mut(&uid) else { return false };
        t.copies = t.copies.saturating_sub(1);
        if t.fate != Fate::InFlight {
            return false;
        }
        t.fate = Fate::Delivered;
        self.delivered += 1;
        self.delivered_bits += bits as u64;
        self.delay_sum += delay.as_secs();
        true
    }

    /// A copy was lost. The packet counts as dropped once its last copy is
    /// gone without any copy having been delivered; returns whether that
    /// happened now.
    pub fn data_dropped(&mut self, uid: u64, cause: DropCause) -> bool {
        let Some(t) = self.fates.get_mut(&uid) else { return false };
        t.copies = t.copies.saturating_sub(1);
        t.lost = Some(cause);
        if t.fate != Fate::InFlight || t.copies > 0 {
            return false;
        }
        t.fate = Fate::Dropped;
        self.dropped += 1;
        *self.drops_by_cause.entry(cause).or_default() += 1;
        true
    }

    pub fn control_packet(&mut self, kind: ControlKind) {
        *self.control.entry(kind).or_default() += 1;
    }

    pub fn energy_charge(&mut self, node: usize, joules: f64) {
        self.energy_charged[node] += joules;
    }

    pub fn flow_admitted(&mut self) {
        self.flows_admitted += 1;
    }

    pub fn flow_rejected(&mut self) {
        self.flows_rejected += 1;
    }

    pub fn sent_for(&self, flow: FlowId) -> u64 {
        self.per_flow_sent.get(&flow).copied().unwrap_or(0)
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn control_count(&self, include_hello: bool) -> u64 {
        self.control
            .iter()
            .filter(|(k, _)| include_hello || **k != ControlKind::Hello)
            .map(|(_, v)| v)
            .sum()
    }

    /// Appends a sample; samples at or before the label's last time are ignored.
    pub fn sample(&mut self, label: &str, t: f64, value: f64) {
        let s = self.series.entry(label.to_string()).or_default();
        if s.last().is_some_and(|last| last.t >= t) {
            return;
        }
        s.push(TimeSeriesSample { t, value });
    }

    pub fn finalize(
        self,
        energy: &[NodeEnergy],
        sim_time_s: f64,
        include_hello: bool,
    ) -> Result<MetricsReport, ConsistencyError> {
        let in_flight = self.fates.values().filter(|t| t.fate == Fate::InFlight).count() as u64;
        let by_fate = |want: Fate| self.fates.values().filter(|t| t.fate == want).count() as u64;
        if self.sent != self.delivered + self.dropped + in_flight
            || self.fates.len() as u64 != self.sent
            || by_fate(Fate::Delivered) != self.delivered
            || by_fate(Fate::Dropped) != self.dropped
        {
            return Err(ConsistencyError::Conservation {
                sent: self.sent,
                delivered: self.delivered,
                dropped: self.dropped,
                in_flight,
            });
        }
        let mut leaked: Vec<u64> = self
            .fates
            .iter()
            .filter(|(_, t)| t.fate == Fate::InFlight && t.copies == 0)
            .map(|(uid, _)| *uid)
            .collect();
        leaked.sort_unstable();
        if let Some(&uid) = leaked.first() {
            return Err(ConsistencyError::Leak { uid });
        }
        for (i, e) in energy.iter().enumerate() {
            let ledger = self.energy_charged[i];
            let scale = e.initial.abs().max(1e-300);
            if (e.consumed - ledger).abs() > 1e-9 * scale
                || (e.initial - e.residual - e.consumed).abs() > 1e-9 * scale
            {
                return Err(ConsistencyError::EnergyLedger { node: i, meter: e.consumed, ledger });
            }
        }

        let nodes = energy.len().max(1) as f64;
        let avg_energy = energy.iter().map(|e| e.consumed).sum::<f64>() / nodes;
        let control = self.control_count(include_hello);
        let pdr = if self.sent > 0 {
            Some(self.delivered as f64 / self.sent as f64)
        } else {
            None
        };
        if let Some(p) = pdr {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConsistencyError::Pdr(p));
            }
        }
        let (avg_delay, overhead) = if self.delivered > 0 {
            (
                Some(self.delay_sum / self.delivered as f64),
                Some(control as f64 / self.delivered as f64),
            )
        } else {
            (None, None)
        };

        Ok(MetricsReport {
            sent: self.sent,
            delivered: self.delivered,
            dropped: self.dropped,
            in_flight,
            control_packets: control,
            control_by_kind: self.control,
            drops_by_cause: self.drops_by_cause,
            pdr,
            avg_e2e_delay_s: avg_delay,
            control_overhead: overhead,
            throughput_pkts: self.delivered,
            throughput_bps: if sim_time_s > 0.0 {
                self.delivered_bits as f64 / sim_time_s
            } else {
                0.0
            },
            avg_energy_j: avg_energy,
            flows_admitted: self.flows_admitted,
            flows_rejected: self.flows_rejected,
            per_flow_sent: self.per_flow_sent,
            series: self.series,
        })
    }
}

/// Immutable end-of-run metrics. Ratios that are undefined for the run
/// (nothing sent, nothing delivered) are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub control_packets: u64,
    pub control_by_kind: BTreeMap<ControlKind, u64>,
    pub drops_by_cause: BTreeMap<DropCause, u64>,
    pub pdr: Option<f64>,
    pub avg_e2e_delay_s: Option<f64>,
    pub control_overhead: Option<f64>,
    pub throughput_pkts: u64,
    pub throughput_bps: f64,
    pub avg_energy_j: f64,
    pub flows_admitted: u64,
    pub flows_rejected: u64,
    pub per_flow_sent: BTreeMap<FlowId, u64>,
    pub series: BTreeMap<String, Vec<TimeSeriesSample>>,
}

impl MetricsReport {
    /// PDR with the undefined case reported as zero.
    pub fn pdr_or_zero(&self) -> f64 {
        self.pdr.unwrap_or(0.0)
    }

    pub fn drops(&self, cause: DropCause) -> u64 {
        self.drops_by_cause.get(&cause).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(consumed: &[f64]) -> Vec<NodeEnergy> {
        consumed
            .iter()
            .map(|&c| NodeEnergy { initial: 4.7, residual: 4.7 - c, consumed: c })
            .collect()
    }

    fn collector_with(sent: u64, delivered: u64) -> MetricsCollector {
        let mut m = MetricsCollector::new(0);
        for uid in 0..sent {
            m.data_sent(uid, FlowId(0));
        }
        for uid in 0..delivered {
            m.data_delivered(uid, SimTime::from_secs(0.1), 4096);
        }
        m
    }

    #[test]
    fn pdr_ratio() {
        let r = collector_with(200, 180).finalize(&[], 10.0, true).unwrap();
        assert_eq!(r.pdr, Some(0.9));
        assert_eq!(r.in_flight, 20);
    }

    #[test]
    fn overhead_ratio() {
        let mut m = collector_with(200, 200);
        for _ in 0..50 {
            m.control_packet(ControlKind::Rreq);
        }
        let r = m.finalize(&[], 10.0, true).unwrap();
        assert_eq!(r.control_overhead, Some(0.25));
    }

    #[test]
    fn hello_exclusion_flag() {
        let mut m = collector_with(10, 10);
        m.control_packet(ControlKind::Hello);
        m.control_packet(ControlKind::Rrep);
        assert_eq!(m.clone().finalize(&[], 1.0, true).unwrap().control_packets, 2);
        assert_eq!(m.finalize(&[], 1.0, false).unwrap().control_packets, 1);
    }

    #[test]
    fn mean_delay() {
        let mut m = MetricsCollector::new(0);
        m.data_sent(1, FlowId(0));
        m.data_sent(2, FlowId(0));
        m.data_delivered(1, SimTime::from_secs(0.1), 8);
        m.data_delivered(2, SimTime::from_secs(0.3), 8);
        let r = m.finalize(&[], 1.0, true).unwrap();
        assert!((r.avg_e2e_delay_s.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn average_energy() {
        let mut m = MetricsCollector::new(2);
        m.energy_charge(0, 1.0);
        m.energy_charge(1, 3.0);
        let r = m.finalize(&energy(&[1.0, 3.0]), 1.0, true).unwrap();
        assert_eq!(r.avg_energy_j, 2.0);
    }

    #[test]
    fn nothing_delivered_is_undefined() {
        let r = collector_with(5, 0).finalize(&[], 1.0, true).unwrap();
        assert_eq!(r.control_overhead, None);
        assert_eq!(r.avg_e2e_delay_s, None);
        assert_eq!(r.pdr, Some(0.0));
        let r = collector_with(0, 0).finalize(&[], 1.0, true).unwrap();
        assert_eq!(r.pdr, None);
        assert_eq!(r.pdr_or_zero(), 0.0);
    }

    #[test]
    fn late_copies_not_double_counted() {
        let mut m = collector_with(1, 1);
        assert!(!m.data_dropped(0, DropCause::RetryLimit));
        assert!(!m.data_delivered(0, SimTime::ZERO, 8));
        let r = m.finalize(&[], 1.0, true).unwrap();
        assert_eq!((r.sent, r.delivered, r.dropped), (1, 1, 0));
    }

    #[test]
    fn drop_counts_only_with_last_copy() {
        let mut m = collector_with(1, 0);
        m.data_copied(0);
        assert!(!m.data_dropped(0, DropCause::RetryLimit));
        assert!(m.data_delivered(0, SimTime::ZERO, 8));
        let r = m.finalize(&[], 1.0, true).unwrap();
        assert_eq!((r.delivered, r.dropped, r.in_flight), (1, 0, 0));
    }

    #[test]
    fn vanished_packet_is_an_error() {
        let mut m = collector_with(2, 0);
        m.data_released(1);
        assert_eq!(m.finalize(&[], 1.0, true).unwrap_err(), ConsistencyError::Leak { uid: 1 });
    }

    #[test]
    fn counter_mismatch_is_an_error() {
        let mut m = collector_with(3, 1);
        m.sent += 1;
        assert!(matches!(m.finalize(&[], 1.0, true), Err(ConsistencyError::Conservation { .. })));
    }

    #[test]
    fn energy_mismatch_is_an_error() {
        let mut m = MetricsCollector::new(1);
        m.energy_charge(0, 1.0);
        let err = m.finalize(&energy(&[1.5]), 1.0, true).unwrap_err();
        assert!(matches!(err, ConsistencyError::EnergyLedger { node: 0, .. }));
    }

    #[test]
    fn series_strictly_increasing() {
        let mut m = MetricsCollector::new(0);
        m.sample("pdr", 1.0, 0.5);
        m.sample("pdr", 1.0, 0.6);
        m.sample("pdr", 0.5, 0.7);
        m.sample("pdr", 2.0, 0.8);
        let r = m.finalize(&[], 1.0, true).unwrap();
        let ts: Vec<f64> = r.series["pdr"].iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![1.0, 2.0]);
    }
}
