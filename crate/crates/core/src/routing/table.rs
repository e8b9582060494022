//! AODV routing table, duplicate-RREQ cache and per-destination packet buffer.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::packet::Packet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AodvParams {
    pub active_route_timeout_s: f64,
    pub net_traversal_time_s: f64,
    pub rreq_retries: u32,
    pub buffer_limit: usize,
    pub ttl: u8,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            active_route_timeout_s: 3.0,
            net_traversal_time_s: 2.8,
            rreq_retries: 2,
            buffer_limit: 64,
            ttl: 35,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u8,
    pub dest_seq: u32,
    /// Minimum transmit power toward `next_hop`, when power control measured one.
    pub p_tmin: Option<f64>,
    pub expiry: SimTime,
    pub valid: bool,
    pub precursors: BTreeSet<NodeId>,
}

impl RouteEntry {
    pub fn usable(&self, now: SimTime) -> bool {
        self.valid && self.expiry > now
    }
}

/// Candidate route learned from a RREQ (reverse) or RREP (forward).
#[derive(Clone, Debug, PartialEq)]
pub struct RouteOffer {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u8,
    pub dest_seq: u32,
    pub p_tmin: Option<f64>,
    pub expiry: SimTime,
}

#[derive(Clone, Debug, Default)]
pub struct RouteTable {
    entries: BTreeMap<NodeId, RouteEntry>,
}

impl RouteTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dest)
    }

    pub fn lookup(&self, dest: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.entries.get(&dest).filter(|e| e.usable(now))
    }

    pub fn entries(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }

    /// Applies the AODV freshness rule: an offer wins over an unusable entry,
    /// a higher sequence number, or an equal one with fewer hops. Returns
    /// true when the table changed.
    pub fn offer(&mut self, o: RouteOffer, now: SimTime) -> bool {
        if let Some(e) = self.entries.get_mut(&o.destination) {
            let better = !e.usable(now)
                || o.dest_seq > e.dest_seq
                || (o.dest_seq == e.dest_seq && o.hop_count < e.hop_count);
            if better {
                if e.next_hop != o.next_hop {
                    e.precursors.clear();
                }
                e.next_hop = o.next_hop;
                e.hop_count = o.hop_count;
                e.dest_seq = o.dest_seq;
                e.p_tmin = o.p_tmin;
                e.expiry = o.expiry;
                e.valid = true;
                return true;
            }
            if o.dest_seq == e.dest_seq && o.next_hop == e.next_hop && o.expiry > e.expiry {
                // Same route heard again: refresh its lifetime only.
                e.expiry = o.expiry;
            }
            false
        } else {
            self.entries.insert(
                o.destination,
                RouteEntry {
                    destination: o.destination,
                    next_hop: o.next_hop,
                    hop_count: o.hop_count,
                    dest_seq: o.dest_seq,
                    p_tmin: o.p_tmin,
                    expiry: o.expiry,
                    valid: true,
                    precursors: BTreeSet::new(),
                },
            );
            true
        }
    }

    pub fn refresh(&mut self, dest: NodeId, until: SimTime) {
        if let Some(e) = self.entries.get_mut(&dest) {
            if e.valid && e.expiry < until {
                e.expiry = until;
            }
        }
    }

    pub fn add_precursor(&mut self, dest: NodeId, precursor: NodeId) {
        if let Some(e) = self.entries.get_mut(&dest) {
            e.precursors.insert(precursor);
        }
    }

    /// Invalidates every valid route through `hop`. Returns the affected
    /// destinations with their bumped sequence numbers, and whether any of
    /// them had precursors that need a RERR.
    pub fn invalidate_via(&mut self, hop: NodeId) -> (Vec<(NodeId, u32)>, bool) {
        let mut lost = Vec::new();
        let mut notify = false;
        for e in self.entries.values_mut() {
            if e.valid && e.next_hop == hop {
                e.valid = false;
                e.dest_seq = e.dest_seq.wrapping_add(1);
                notify |= !e.precursors.is_empty();
                lost.push((e.destination, e.dest_seq));
            }
        }
        (lost, notify)
    }

    /// Invalidates `dest` if it is currently routed via `hop`. Returns whether
    /// the entry had precursors.
    pub fn invalidate_if_via(&mut self, dest: NodeId, hop: NodeId, seq: u32) -> Option<bool> {
        let e = self.entries.get_mut(&dest)?;
        if e.valid && e.next_hop == hop {
            e.valid = false;
            e.dest_seq = e.dest_seq.max(seq);
            Some(!e.precursors.is_empty())
        } else {
            None
        }
    }
}

/// Duplicate suppression for `(origin, rreq_id)` pairs.
#[derive(Clone, Debug)]
pub struct RreqCache {
    lifetime: SimTime,
    seen: HashMap<(NodeId, u32), SimTime>,
}

impl RreqCache {
    pub fn new(lifetime: SimTime) -> Self {
        RreqCache {
            lifetime,
            seen: HashMap::new(),
        }
    }

    /// True the first time a pair is seen within the lifetime window.
    pub fn first_sighting(&mut self, origin: NodeId, id: u32, now: SimTime) -> bool {
        if self.seen.len() > 512 {
            let lifetime = self.lifetime;
            self.seen.retain(|_, t| *t + lifetime > now);
        }
        match self.seen.get(&(origin, id)) {
            Some(t) if *t + self.lifetime > now => false,
            _ => {
                self.seen.insert((origin, id), now);
                true
            }
        }
    }
}

/// Packets waiting for a route, grouped by destination.
#[derive(Clone, Debug)]
pub struct PendingBuffer {
    limit: usize,
    len: usize,
    by_dest: BTreeMap<NodeId, VecDeque<Packet>>,
}

impl PendingBuffer {
    pub fn new(limit: usize) -> Self {
        PendingBuffer {
            limit,
            len: 0,
            by_dest: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, dest: NodeId, p: Packet) -> Result<(), Packet> {
        if self.len >= self.limit {
            return Err(p);
        }
        self.by_dest.entry(dest).or_default().push_back(p);
        self.len += 1;
        Ok(())
    }

    pub fn has(&self, dest: NodeId) -> bool {
        self.by_dest.get(&dest).is_some_and(|q| !q.is_empty())
    }

    pub fn take(&mut self, dest: NodeId) -> Vec<Packet> {
        let q = self.by_dest.remove(&dest).unwrap_or_default();
        self.len -= q.len();
        q.into()
    }

    pub fn take_all(&mut self) -> Vec<Packet> {
        self.len = 0;
        std::mem::take(&mut self.by_dest)
            .into_values()
            .flatten()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offer(dest: u32, hop: u32, hops: u8, seq: u32) -> RouteOffer {
        RouteOffer {
            destination: NodeId(dest),
            next_hop: NodeId(hop),
            hop_count: hops,
            dest_seq: seq,
            p_tmin: None,
            expiry: SimTime::from_secs(10.0),
        }
    }

    #[test]
    fn fresher_sequence_replaces() {
        let mut t = RouteTable::new();
        let now = SimTime::ZERO;
        assert!(t.offer(offer(5, 1, 3, 10), now));
        assert!(!t.offer(offer(5, 2, 1, 9), now));
        assert!(t.offer(offer(5, 2, 4, 11), now));
        assert_eq!(t.lookup(NodeId(5), now).unwrap().next_hop, NodeId(2));
        assert!(t.offer(offer(5, 3, 2, 11), now));
        assert_eq!(t.lookup(NodeId(5), now).unwrap().hop_count, 2);
    }

    #[test]
    fn expired_routes_are_unusable_and_replaceable() {
        let mut t = RouteTable::new();
        t.offer(offer(5, 1, 3, 10), SimTime::ZERO);
        let later = SimTime::from_secs(11.0);
        assert!(t.lookup(NodeId(5), later).is_none());
        let mut o = offer(5, 2, 6, 1);
        o.expiry = SimTime::from_secs(20.0);
        assert!(t.offer(o, later));
    }

    #[test]
    fn break_invalidates_dependent_routes() {
        let mut t = RouteTable::new();
        let now = SimTime::ZERO;
        t.offer(offer(5, 1, 3, 10), now);
        t.offer(offer(6, 1, 2, 4), now);
        t.offer(offer(7, 2, 2, 4), now);
        let (lost, notify) = t.invalidate_via(NodeId(1));
        assert_eq!(lost, vec![(NodeId(5), 11), (NodeId(6), 5)]);
        assert!(!notify);
        assert!(t.lookup(NodeId(7), now).is_some());

        t.add_precursor(NodeId(7), NodeId(9));
        let (_, notify) = t.invalidate_via(NodeId(2));
        assert!(notify);
    }

    #[test]
    fn rreq_dedup() {
        let mut c = RreqCache::new(SimTime::from_secs(3.0));
        assert!(c.first_sighting(NodeId(1), 1, SimTime::ZERO));
        assert!(!c.first_sighting(NodeId(1), 1, SimTime::from_secs(1.0)));
        assert!(c.first_sighting(NodeId(1), 2, SimTime::from_secs(1.0)));
        assert!(c.first_sighting(NodeId(1), 1, SimTime::from_secs(4.0)));
    }

    #[test]
    fn buffer_limit_and_take() {
        let mut b = PendingBuffer::new(2);
        let p = || Packet::Rerr(crate::packet::Rerr { unreachable: vec![] });
        b.push(NodeId(1), p()).unwrap();
        b.push(NodeId(2), p()).unwrap();
        assert!(b.push(NodeId(1), p()).is_err());
        assert_eq!(b.take(NodeId(1)).len(), 1);
        assert_eq!(b.len(), 1);
        assert!(!b.has(NodeId(1)));
        assert_eq!(b.take_all().len(), 1);
        assert!(b.is_empty());
    }
}
