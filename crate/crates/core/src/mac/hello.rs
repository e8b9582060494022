//! Hello messages carrying consumed-bandwidth state, and the one-/two-hop
//! neighbor table they maintain.

use std::collections::BTreeMap;

use crate::engine::SimTime;
use crate::ids::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct HelloEntry {
    pub neighbor: NodeId,
    pub consumed_bps: f64,
    pub timestamp: SimTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HelloPayload {
    pub origin: NodeId,
    pub own_consumed_bps: f64,
    pub own_timestamp: SimTime,
    pub neighbor_entries: Vec<HelloEntry>,
}

impl HelloPayload {
    /// Encoded size: 12-byte own field plus 12 bytes per neighbor entry.
    pub fn bytes(&self) -> u32 {
        12 + 12 * self.neighbor_entries.len() as u32
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborRecord {
    pub id: NodeId,
    pub consumed_bps: f64,
    pub timestamp: SimTime,
}

/// Neighbor state learned from Hello messages.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    me: NodeId,
    expiry: SimTime,
    one_hop: BTreeMap<NodeId, NeighborRecord>,
    two_hop: BTreeMap<NodeId, NeighborRecord>,
}

fn update_if_newer(map: &mut BTreeMap<NodeId, NeighborRecord>, rec: NeighborRecord) -> bool {
    match map.get_mut(&rec.id) {
        Some(old) if rec.timestamp <= old.timestamp => false,
        Some(old) => {
            *old = rec;
            true
        }
        None => {
            map.insert(rec.id, rec);
            true
        }
    }
}

impl NeighborTable {
    /// `expiry` is how long an entry survives without a fresher timestamp.
    pub fn new(me: NodeId, expiry: SimTime) -> Self {
        NeighborTable {
            me,
            expiry,
            one_hop: BTreeMap::new(),
            two_hop: BTreeMap::new(),
        }
    }

    fn fresh(&self, rec: &NeighborRecord, now: SimTime) -> bool {
        rec.timestamp + self.expiry >= now
    }

    /// Drops entries older than the expiry horizon.
    pub fn prune(&mut self, now: SimTime) {
        let horizon = self.expiry;
        self.one_hop.retain(|_, r| r.timestamp + horizon >= now);
        self.two_hop.retain(|_, r| r.timestamp + horizon >= now);
    }

    /// Builds this node's Hello: own bandwidth plus every fresh one-hop entry.
    pub fn emit_hello(&self, own_consumed_bps: f64, now: SimTime) -> HelloPayload {
        HelloPayload {
            origin: self.me,
            own_consumed_bps,
            own_timestamp: now,
            neighbor_entries: self
                .one_hop
                .values()
                .filter(|r| self.fresh(r, now))
                .map(|r| HelloEntry {
                    neighbor: r.id,
                    consumed_bps: r.consumed_bps,
                    timestamp: r.timestamp,
                })
                .collect(),
        }
    }

    /// Merges a received Hello. Each entry replaces the stored one only when
    /// its timestamp is strictly newer. Returns whether anything changed.
    pub fn process_hello(&mut self, payload: &HelloPayload) -> bool {
        if payload.origin == self.me {
            return false;
        }
        let mut changed = update_if_newer(
            &mut self.one_hop,
            NeighborRecord {
                id: payload.origin,
                consumed_bps: payload.own_consumed_bps,
                timestamp: payload.own_timestamp,
            },
        );
        for e in &payload.neighbor_entries {
            if e.neighbor == self.me {
                continue;
            }
            changed |= update_if_newer(
                &mut self.two_hop,
                NeighborRecord {
                    id: e.neighbor,
                    consumed_bps: e.consumed_bps,
                    timestamp: e.timestamp,
                },
            );
        }
        changed
    }

    pub fn one_hop(&self, id: NodeId) -> Option<&NeighborRecord> {
        self.one_hop.get(&id)
    }

    pub fn two_hop(&self, id: NodeId) -> Option<&NeighborRecord> {
        self.two_hop.get(&id)
    }

    pub fn one_hop_count(&self) -> usize {
        self.one_hop.len()
    }

    /// Bandwidth consumed by all fresh one- and two-hop neighbors; a node
    /// known at both distances is counted once, with its one-hop value.
    pub fn neighborhood_consumed(&self, now: SimTime) -> f64 {
        let one: f64 = self
            .one_hop
            .values()
            .filter(|r| self.fresh(r, now))
            .map(|r| r.consumed_bps)
            .sum();
        let two: f64 = self
            .two_hop
            .values()
            .filter(|r| self.fresh(r, now) && !self.one_hop.contains_key(&r.id))
            .map(|r| r.consumed_bps)
            .sum();
        one + two
    }
}
