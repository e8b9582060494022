//! Discrete-event engine: integer-nanosecond clock, cancellable event queue
//! with FIFO tie-breaking, and a running digest of every fired event.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Sub};

use sha2::{Digest, Sha256};

/// Simulation time, stored as nanoseconds since the start of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    /// Rounds to the nearest nanosecond. Negative inputs saturate at zero.
    pub fn from_secs(s: f64) -> Self {
        SimTime((s * 1e9).round().max(0.0) as u64)
    }

    pub fn from_micros(us: f64) -> Self {
        SimTime((us * 1e3).round().max(0.0) as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs())
    }
}

/// Handle returned by [`Engine::schedule`]; used to cancel a pending event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(u64);

struct Pending<E> {
    at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Pending<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Pending<E> {}

impl<E> PartialOrd for Pending<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Pending<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue plus clock. Events are ordered by `(fire_time, sequence_id)`,
/// so equal-time events fire in the order they were scheduled.
pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Pending<E>>,
    cancelled: HashSet<u64>,
    fired: u64,
    trace: Sha256,
}

impl<E: Hash> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            fired: 0,
            trace: Sha256::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events fired so far (cancelled events excluded).
    pub fn fired(&self) -> u64 {
        self.fired
    }

    /// Enqueues `payload` to fire at `at`.
    ///
    /// Panics when `at` lies before the current clock: scheduling into the
    /// past is a contract violation, not a recoverable condition.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> EventId {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={} now={}",
            at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Pending { at, seq, payload });
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventId {
        let at = self.now + delay;
        self.schedule(at, payload)
    }

    /// Cancels a pending event. Callers must only cancel events that have not
    /// fired yet; the id is remembered until the event is popped.
    pub fn cancel(&mut self, id: EventId) {
        if id.0 < self.next_seq {
            self.cancelled.insert(id.0);
        }
    }

    /// Pops the next live event with `fire_time <= end`, advancing the clock
    /// to it. Returns `None` (and advances the clock to `end`) once no such
    /// event remains.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = match self.heap.peek() {
                Some(p) if p.at <= end => self.heap.pop().unwrap(),
                _ => {
                    if end > self.now {
                        self.now = end;
                    }
                    return None;
                }
            };
            if self.cancelled.remove(&head.seq) {
                continue;
            }
            self.now = head.at;
            self.fired += 1;
            let mut h = TraceHasher(&mut self.trace);
            head.at.hash(&mut h);
            head.seq.hash(&mut h);
            head.payload.hash(&mut h);
            return Some((head.at, head.payload));
        }
    }

    /// Processes every event with `fire_time <= end` through `handler`.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Engine<E>, SimTime, E),
    {
        assert!(end >= self.now, "run_until end precedes the clock");
        while let Some((at, ev)) = self.pop_until(end) {
            handler(self, at, ev);
        }
        self.now
    }

    /// Hex SHA-256 of the `(time, sequence, payload)` stream of fired events.
    pub fn trace_digest(&self) -> String {
        let d = self.trace.clone().finalize();
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl<E: Hash> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

struct TraceHasher<'a>(&'a mut Sha256);

impl Hasher for TraceHasher<'_> {
    fn finish(&self) -> u64 {
        0
    }

    fn write(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }
}
