//! Per-node DCF state. The event wiring lives in the simulator; this module
//! owns the queue discipline and the backoff bookkeeping.

use std::collections::{HashMap, VecDeque};

use crate::engine::{EventId, SimTime};
use crate::ids::NodeId;
use crate::mac::frame::Frame;
use crate::mac::timing::ContentionWindowStats;
use crate::packet::Packet;

#[derive(Clone, Debug)]
pub struct QueuedPacket {
    pub packet: Packet,
    /// `None` sends the packet as a link-local broadcast.
    pub next_hop: Option<NodeId>,
    /// Power the exchange should use, when power control has one cached.
    pub p_tmin: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Nothing at head of line.
    Idle,
    /// Head-of-line frame is waiting for DIFS + backoff.
    Backoff,
    /// RTS or broadcast frame on the air.
    Sending,
    AwaitCts,
    /// CTS received; DATA goes out after SIFS.
    CtsReceived,
    SendingData,
    AwaitAck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    RetriesExhausted,
}

#[derive(Debug)]
pub struct Dcf {
    queue: VecDeque<QueuedPacket>,
    limit: usize,
    pub hol: Option<QueuedPacket>,
    pub phase: Phase,
    pub cw: u32,
    pub attempts: u32,
    pub backoff_slots: u32,
    /// Instant from which backoff slots are being counted down.
    pub countdown_anchor: Option<SimTime>,
    pub access_timer: Option<(SimTime, EventId)>,
    pub timeout_timer: Option<EventId>,
    pub medium_busy: bool,
    pub nav_until: SimTime,
    pub nav_timer: Option<EventId>,
    /// Start of the current access-contention interval.
    pub acc_from: SimTime,
    pub pending_response: Option<(Frame, EventId)>,
    next_seq: u32,
    last_seq_from: HashMap<NodeId, u32>,
    pub window: ContentionWindowStats,
    pub last_backoff_draw: u32,
    pub last_t_acc: f64,
}

impl Dcf {
    pub fn new(cw_min: u32, queue_limit: usize) -> Self {
        Dcf {
            queue: VecDeque::new(),
            limit: queue_limit,
            hol: None,
            phase: Phase::Idle,
            cw: cw_min,
            attempts: 0,
            backoff_slots: 0,
            countdown_anchor: None,
            access_timer: None,
            timeout_timer: None,
            medium_busy: false,
            nav_until: SimTime::ZERO,
            nav_timer: None,
            acc_from: SimTime::ZERO,
            pending_response: None,
            next_seq: 0,
            last_seq_from: HashMap::new(),
            window: ContentionWindowStats::new(SimTime::ZERO),
            last_backoff_draw: 0,
            last_t_acc: 0.0,
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Adds a packet behind the head of line. Control packets overtake queued
    /// data. Returns the packet back when the queue is full.
    pub fn enqueue(&mut self, qp: QueuedPacket) -> Result<(), QueuedPacket> {
        if self.queue.len() >= self.limit {
            return Err(qp);
        }
        if qp.packet.is_data() {
            self.queue.push_back(qp);
        } else {
            let pos = self
                .queue
                .iter()
                .position(|q| q.packet.is_data())
                .unwrap_or(self.queue.len());
            self.queue.insert(pos, qp);
        }
        Ok(())
    }

    pub fn pop_next(&mut self) -> Option<QueuedPacket> {
        self.queue.pop_front()
    }

    /// Removes every queued (not head-of-line) packet addressed to `hop`.
    pub fn drain_for_hop(&mut self, hop: NodeId) -> Vec<QueuedPacket> {
        let (taken, kept): (Vec<_>, Vec<_>) = self
            .queue
            .drain(..)
            .partition(|q| q.next_hop == Some(hop));
        self.queue = kept.into();
        taken
    }

    pub fn drain_all(&mut self) -> Vec<QueuedPacket> {
        let mut out: Vec<_> = self.hol.take().into_iter().collect();
        out.extend(self.queue.drain(..));
        out
    }

    pub fn next_mac_seq(&mut self) -> u32 {
        self.next_seq = self.next_seq.wrapping_add(1);
        self.next_seq
    }

    /// Records a received unicast sequence number; false for a retransmitted
    /// duplicate.
    pub fn accept_seq(&mut self, from: NodeId, seq: u32) -> bool {
        match self.last_seq_from.insert(from, seq) {
            Some(prev) => prev != seq,
            None => true,
        }
    }

    /// Fire time of the access timer for a countdown starting at `anchor`.
    pub fn access_time(&self, anchor: SimTime, slot: SimTime) -> SimTime {
        anchor + SimTime::from_nanos(slot.as_nanos() * self.backoff_slots as u64)
    }

    /// Freezes an active countdown at `now`, keeping the slots not yet
    /// consumed. Returns the cancelled timer, if any.
    pub fn freeze(&mut self, now: SimTime, slot: SimTime) -> Option<EventId> {
        let anchor = self.countdown_anchor.take()?;
        if now > anchor {
            let elapsed = (now - anchor).as_nanos() / slot.as_nanos();
            self.backoff_slots -= (elapsed as u32).min(self.backoff_slots);
        }
        self.access_timer.take().map(|(_, id)| id)
    }
}
