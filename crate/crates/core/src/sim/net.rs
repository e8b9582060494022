//! Mobility, traffic sources, AODV and the cross-layer controllers.

use crate::crosslayer::{
    adjust_rate, admit_flow, apportion, channel_resource_delta, exceeds_hysteresis, probe_verdict,
    AdmissionDecision,
};
use crate::engine::SimTime;
use crate::ids::{FlowId, NodeId};
use crate::mac::{channel_occupation, QueuedPacket};
use crate::metrics::{ConsistencyError, DropCause};
use crate::packet::{CongestionNotice, DataPacket, Packet, Probe, Rerr, Rrep, Rreq};
use crate::routing::{link_quality_filter, min_tx_power, path_loss, LinkVerdict, RouteOffer};
use crate::rng::StreamLabel;
use crate::traffic::FlowState;

use super::{Discovery, Event, Simulation};

/// The previous hop of a received packet and how it was heard.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Link {
    pub from: NodeId,
    pub p_rx: f64,
    pub tx_dbm: f64,
}

impl Simulation {
    fn check_bounds(&mut self, n: NodeId) {
        let now = self.engine.now();
        let pos = self.nodes[n.index()].motion.position_at(now);
        if !self.p.area.contains(pos) && self.violation.is_none() {
            self.violation = Some(ConsistencyError::OutOfBounds { node: n.index(), t: now.as_secs(), x: pos.x, y: pos.y });
        }
    }

    pub(crate) fn on_leg_start(&mut self, n: NodeId) {
        if !self.nodes[n.index()].alive {
            return;
        }
        let now = self.engine.now();
        let (lo, hi) = self.p.speed;
        let speed = if lo < hi { self.rng.uniform(StreamLabel::Mobility, lo, hi) } else { hi };
        if speed <= 0.0 {
            return;
        }
        let arrive = self.nodes[n.index()].motion.next_waypoint(now, &self.p.area, speed, self.rng.stream(StreamLabel::Mobility));
        let target = self.nodes[n.index()].motion.waypoint;
        if !self.p.area.contains(target) && self.violation.is_none() {
            self.violation = Some(ConsistencyError::OutOfBounds { node: n.index(), t: now.as_secs(), x: target.x, y: target.y });
        }
        if arrive <= self.p.end {
            self.engine.schedule(arrive, Event::WaypointReached(n));
        }
    }

    pub(crate) fn on_waypoint_reached(&mut self, n: NodeId) {
        if !self.nodes[n.index()].alive {
            return;
        }
        self.check_bounds(n);
        let now = self.engine.now();
        let until = self.nodes[n.index()].motion.arrive_and_pause(now, self.p.pause);
        if until <= self.p.end {
            self.engine.schedule(until, Event::LegStart(n));
        }
    }

    fn local_fbw(&self, n: NodeId) -> f64 {
        let node = &self.nodes[n.index()];
        let hood = node.neighbors.neighborhood_consumed(self.engine.now());
        node.book.feasible(hood, &self.p.admission)
    }

    pub(crate) fn on_flow_start(&mut self, f: FlowId) {
        let flow = &self.flows[f.index()];
        if flow.state != FlowState::PendingAdmission {
            return;
        }
        let (src, dst, rbw) = (flow.source, flow.destination, flow.rbw_bps);
        if !self.nodes[src.index()].alive {
            self.flows[f.index()].state = FlowState::Done;
            return;
        }
        if !self.p.features.admission_control {
            self.activate_flow(f);
            return;
        }
        let fbw = self.local_fbw(src);
        let a = &self.p.admission;
        match admit_flow(rbw, fbw, a.min_bw_bps, a.max_bw_bps) {
            AdmissionDecision::Admit => self.activate_flow(f),
            AdmissionDecision::Reject => self.reject_flow(f),
            AdmissionDecision::Probe => {
                let timeout = SimTime::from_secs(2.0 * self.p.aodv.net_traversal_time_s);
                let id = self.engine.schedule_in(timeout, Event::ProbeTimeout(f));
                self.probe_timers.insert(f, id);
                let probe = Probe { flow: f, origin: src, dest: dst, rbw_bps: rbw, min_fbw_bps: fbw, echo: false };
                self.route_packet(src, Packet::Probe(probe), true);
            }
        }
    }

    fn activate_flow(&mut self, f: FlowId) {
        let flow = &mut self.flows[f.index()];
        flow.state = FlowState::Active;
        let (src, rbw) = (flow.source, flow.rbw_bps);
        self.metrics.flow_admitted();
        if self.p.features.admission_control && rbw > 0.0 {
            self.nodes[src.index()].book.reserve(f, rbw);
        }
        let now = self.engine.now();
        self.engine.schedule(now, Event::TrafficSend(f));
    }

    fn reject_flow(&mut self, f: FlowId) {
        self.flows[f.index()].state = FlowState::Rejected;
        self.metrics.flow_rejected();
    }

    pub(crate) fn on_probe_timeout(&mut self, f: FlowId) {
        self.probe_timers.remove(&f);
        if self.flows[f.index()].state == FlowState::PendingAdmission {
            self.reject_flow(f);
        }
    }

    pub(crate) fn on_flow_stop(&mut self, f: FlowId) {
        let flow = &mut self.flows[f.index()];
        if matches!(flow.state, FlowState::Active | FlowState::PendingAdmission) {
            flow.state = FlowState::Done;
        }
        let src = flow.source;
        self.nodes[src.index()].book.release(f);
        if let Some(id) = self.probe_timers.remove(&f) {
            self.engine.cancel(id);
        }
    }

    pub(crate) fn on_traffic_send(&mut self, f: FlowId) {
        let now = self.engine.now();
        let flow = &mut self.flows[f.index()];
        if !flow.is_active() || flow.stop.is_some_and(|s| now >= s) {
            return;
        }
        let uid = self.next_uid;
        self.next_uid += 1;
        flow.sent += 1;
        let pkt = DataPacket {
            uid,
            flow: f,
            src: flow.source,
            dst: flow.destination,
            payload_bytes: flow.packet_bytes,
            created: now,
            source_rate_bps: flow.rate_bps,
            ttl: self.p.aodv.ttl,
        };
        let src = flow.source;
        let next = now + flow.interval();
        if next <= self.p.end && flow.stop.is_none_or(|s| next < s) {
            self.engine.schedule(next, Event::TrafficSend(f));
        }
        self.metrics.data_sent(uid, f);
        self.route_packet(src, Packet::Data(pkt), true);
    }

    /// Forwards a packet one hop toward its destination, buffering it behind a
    /// route discovery when `n` originated it.
    pub(crate) fn route_packet(&mut self, n: NodeId, pkt: Packet, originated: bool) {
        let Some(dest) = pkt.destination() else { return };
        if dest == n {
            self.deliver_local(n, pkt);
            return;
        }
        let now = self.engine.now();
        let lifetime = SimTime::from_secs(self.p.aodv.active_route_timeout_s);
        let node = &mut self.nodes[n.index()];
        if let Some(e) = node.routes.lookup(dest, now) {
            let (hop, p_tmin) = (e.next_hop, e.p_tmin);
            node.routes.refresh(dest, now + lifetime);
            if let Packet::Data(d) = &pkt {
                let bits = pkt.bits() as u64;
                *node.window_flow_bits.entry(d.flow).or_default() += bits;
                if d.src != n {
                    node.window_relay_bits += bits;
                }
                node.window_flow_rate.insert(d.flow, d.source_rate_bps);
            }
            let p_tmin = if self.p.features.power_control { p_tmin } else { None };
            self.mac_submit(n, QueuedPacket { packet: pkt, next_hop: Some(hop), p_tmin });
        } else if originated {
            if let Err(p) = node.pending.push(dest, pkt) {
                self.drop_packet(&p, DropCause::BufferFull);
            }
            self.start_discovery(n, dest);
        } else {
            let seq = node.routes.get(dest).map_or(0, |e| e.dest_seq);
            self.drop_packet(&pkt, DropCause::NoRoute);
            self.send_rerr(n, vec![(dest, seq)]);
        }
    }

    fn deliver_local(&mut self, n: NodeId, pkt: Packet) {
        let now = self.engine.now();
        match pkt {
            Packet::Data(d) => {
                self.metrics.data_delivered(d.uid, now - d.created, d.payload_bytes * 8);
            }
            Packet::Probe(p) if !p.echo => {
                let echo = Probe { echo: true, ..p };
                self.route_packet(n, Packet::Probe(echo), true);
            }
            Packet::Probe(p) => {
                if self.flows[p.flow.index()].state != FlowState::PendingAdmission {
                    return;
                }
                if let Some(id) = self.probe_timers.remove(&p.flow) {
                    self.engine.cancel(id);
                }
                match probe_verdict(p.min_fbw_bps, p.rbw_bps) {
                    AdmissionDecision::Admit => self.activate_flow(p.flow),
                    _ => self.reject_flow(p.flow),
                }
            }
            Packet::Notice(c) => {
                let flow = &mut self.flows[c.flow.index()];
                if flow.is_active() && flow.source == n {
                    let rate = adjust_rate(flow.rate_bps, c.delta_bps, flow.rate_min_bps, flow.rate_max_bps);
                    flow.set_rate(rate);
                }
            }
            _ => {}
        }
    }

    pub(crate) fn net_receive(&mut self, n: NodeId, pkt: Packet, from: NodeId, p_rx: f64, tx_dbm: f64) {
        let link = Link { from, p_rx, tx_dbm };
        match pkt {
            Packet::Hello(h) => {
                self.nodes[n.index()].neighbors.process_hello(&h);
            }
            Packet::Rreq(r) => self.on_rreq(n, r, link),
            Packet::Rrep(r) => self.on_rrep(n, r, link),
            Packet::Rerr(e) => self.on_rerr(n, e, from),
            Packet::Data(mut d) => {
                if d.dst == n {
                    self.deliver_local(n, Packet::Data(d));
                    return;
                }
                if d.ttl <= 1 {
                    self.drop_packet(&Packet::Data(d), DropCause::TtlExpired);
                    return;
                }
                d.ttl -= 1;
                self.nodes[n.index()].routes.add_precursor(d.dst, from);
                self.route_packet(n, Packet::Data(d), false);
            }
            Packet::Probe(mut p) => {
                if !p.echo {
                    p.min_fbw_bps = p.min_fbw_bps.min(self.local_fbw(n));
                }
                self.route_packet(n, Packet::Probe(p), false);
            }
            Packet::Notice(c) => self.route_packet(n, Packet::Notice(c), false),
        }
    }

    fn filtered(&self, p_rx: f64) -> bool {
        self.p.features.link_filter && link_quality_filter(p_rx, self.p.rss_accept_dbm) == LinkVerdict::Discard
    }

    fn on_rreq(&mut self, n: NodeId, r: Rreq, link: Link) {
        if r.origin == n || self.filtered(link.p_rx) {
            return;
        }
        let now = self.engine.now();
        let lifetime = SimTime::from_secs(self.p.aodv.active_route_timeout_s);
        let node = &mut self.nodes[n.index()];
        if !node.rreq_cache.first_sighting(r.origin, r.rreq_id, now) {
            return;
        }
        node.routes.offer(
            RouteOffer {
                destination: r.origin,
                next_hop: link.from,
                hop_count: r.hop_count.saturating_add(1),
                dest_seq: r.origin_seq,
                p_tmin: None,
                expiry: now + lifetime,
            },
            now,
        );
        if r.dest == n {
            node.seq = node.seq.wrapping_add(1).max(r.dest_seq.map_or(0, |s| s.wrapping_add(1)));
            let rrep = Rrep { origin: r.origin, dest: n, dest_seq: node.seq, hop_count: 0 };
            self.unicast_toward(n, r.origin, Packet::Rrep(rrep));
            return;
        }
        if r.ttl <= 1 {
            return;
        }
        let known = node.routes.get(r.dest).map(|e| e.dest_seq);
        let fwd = Rreq {
            hop_count: r.hop_count.saturating_add(1),
            ttl: r.ttl - 1,
            dest_seq: match (r.dest_seq, known) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            ..r
        };
        self.mac_submit(n, QueuedPacket { packet: Packet::Rreq(fwd), next_hop: None, p_tmin: None });
    }

    /// Sends a routing reply one hop along the route to `toward`.
    fn unicast_toward(&mut self, n: NodeId, toward: NodeId, pkt: Packet) -> bool {
        let now = self.engine.now();
        let Some(e) = self.nodes[n.index()].routes.lookup(toward, now) else { return false };
        let hop = e.next_hop;
        let p_tmin = if self.p.features.power_control { e.p_tmin } else { None };
        self.mac_submit(n, QueuedPacket { packet: pkt, next_hop: Some(hop), p_tmin });
        true
    }

    fn on_rrep(&mut self, n: NodeId, r: Rrep, link: Link) {
        if self.filtered(link.p_rx) {
            self.rrep_dropped += 1;
            return;
        }
        let now = self.engine.now();
        let lifetime = SimTime::from_secs(self.p.aodv.active_route_timeout_s);
        let pl = path_loss(link.tx_dbm, link.p_rx);
        if pl.clamped {
            self.path_loss_anomalies += 1;
        }
        let p_tmin = self.p.features.power_control.then(|| {
            let radio = &self.p.radio;
            min_tx_power(pl.db, radio.rx_threshold_dbm, self.p.k, radio.min_tx_dbm, radio.max_tx_dbm)
        });
        let node = &mut self.nodes[n.index()];
        node.routes.offer(
            RouteOffer {
                destination: r.dest,
                next_hop: link.from,
                hop_count: r.hop_count.saturating_add(1),
                dest_seq: r.dest_seq,
                p_tmin,
                expiry: now + lifetime,
            },
            now,
        );
        if r.origin == n {
            if let Some(d) = node.discoveries.remove(&r.dest) {
                self.engine.cancel(d.timer);
            }
            let waiting = self.nodes[n.index()].pending.take(r.dest);
            for p in waiting {
                self.route_packet(n, p, true);
            }
            return;
        }
        let Some(back) = node.routes.lookup(r.origin, now).map(|e| e.next_hop) else {
            self.rrep_dropped += 1;
            return;
        };
        node.routes.add_precursor(r.dest, back);
        node.routes.add_precursor(r.origin, link.from);
        node.routes.refresh(r.origin, now + lifetime);
        let fwd = Rrep { hop_count: r.hop_count.saturating_add(1), ..r };
        self.unicast_toward(n, fwd.origin, Packet::Rrep(fwd));
    }

    fn on_rerr(&mut self, n: NodeId, e: Rerr, from: NodeId) {
        let node = &mut self.nodes[n.index()];
        let mut propagate = Vec::new();
        for &(dest, seq) in &e.unreachable {
            if node.routes.invalidate_if_via(dest, from, seq) == Some(true) {
                propagate.push((dest, node.routes.get(dest).map_or(seq, |r| r.dest_seq)));
            }
        }
        if !propagate.is_empty() {
            self.send_rerr(n, propagate);
        }
    }

    fn send_rerr(&mut self, n: NodeId, unreachable: Vec<(NodeId, u32)>) {
        let pkt = Packet::Rerr(Rerr { unreachable });
        self.mac_submit(n, QueuedPacket { packet: pkt, next_hop: None, p_tmin: None });
    }

    /// The MAC gave up on `failed`: the link to its next hop is considered broken.
    pub(crate) fn net_link_failed(&mut self, n: NodeId, failed: QueuedPacket) {
        let Some(hop) = failed.next_hop else { return };
        let node = &mut self.nodes[n.index()];
        let (lost, notify) = node.routes.invalidate_via(hop);
        let stranded = node.dcf.drain_for_hop(hop);
        if notify && !lost.is_empty() {
            self.send_rerr(n, lost);
        }
        self.reroute_or_drop(n, failed.packet, DropCause::RetryLimit);
        for q in stranded {
            self.reroute_or_drop(n, q.packet, DropCause::NoRoute);
        }
    }

    fn reroute_or_drop(&mut self, n: NodeId, pkt: Packet, cause: DropCause) {
        match &pkt {
            Packet::Data(d) if d.src == n => self.route_packet(n, pkt, true),
            Packet::Data(_) => self.drop_packet(&pkt, cause),
            Packet::Rrep(_) => self.rrep_dropped += 1,
            _ => {}
        }
    }

    fn start_discovery(&mut self, n: NodeId, dest: NodeId) {
        if self.nodes[n.index()].discoveries.contains_key(&dest) {
            return;
        }
        self.send_rreq(n, dest, 0);
    }

    fn send_rreq(&mut self, n: NodeId, dest: NodeId, retries: u32) {
        let now = self.engine.now();
        let ttl = self.p.aodv.ttl;
        let node = &mut self.nodes[n.index()];
        node.seq = node.seq.wrapping_add(1);
        node.rreq_id = node.rreq_id.wrapping_add(1);
        node.rreq_cache.first_sighting(n, node.rreq_id, now);
        let rreq = Rreq {
            origin: n,
            origin_seq: node.seq,
            rreq_id: node.rreq_id,
            dest,
            dest_seq: node.routes.get(dest).map(|e| e.dest_seq),
            hop_count: 0,
            ttl,
        };
        let timer = self
            .engine
            .schedule_in(SimTime::from_secs(self.p.aodv.net_traversal_time_s), Event::DiscoveryTimeout(n, dest));
        self.nodes[n.index()].discoveries.insert(dest, Discovery { retries, timer });
        self.mac_submit(n, QueuedPacket { packet: Packet::Rreq(rreq), next_hop: None, p_tmin: None });
    }

    pub(crate) fn on_discovery_timeout(&mut self, n: NodeId, dest: NodeId) {
        let now = self.engine.now();
        let node = &mut self.nodes[n.index()];
        let Some(d) = node.discoveries.remove(&dest) else { return };
        if !node.alive {
            return;
        }
        if node.routes.lookup(dest, now).is_some() {
            for p in node.pending.take(dest) {
                self.route_packet(n, p, true);
            }
        } else if d.retries < self.p.aodv.rreq_retries {
            self.send_rreq(n, dest, d.retries + 1);
        } else {
            for p in node.pending.take(dest) {
                self.drop_packet(&p, DropCause::NoRoute);
            }
        }
    }

    pub(crate) fn on_hello_due(&mut self, n: NodeId) {
        let now = self.engine.now();
        let node = &mut self.nodes[n.index()];
        if !node.alive {
            return;
        }
        node.neighbors.prune(now);
        let hello = node.neighbors.emit_hello(node.book.own_consumed(), now);
        self.mac_submit(n, QueuedPacket { packet: Packet::Hello(hello), next_hop: None, p_tmin: None });
        let next = now + self.p.hello_interval;
        if next <= self.p.end {
            self.engine.schedule(next, Event::HelloDue(n));
        }
    }

    pub(crate) fn on_window_close(&mut self, n: NodeId) {
        let now = self.engine.now();
        let next = now + self.p.window;
        if next <= self.p.end {
            self.engine.schedule(next, Event::WindowClose(n));
        }
        let window_s = self.p.window.as_secs();
        let c_occ = channel_occupation(&self.p.timing);
        let node = &mut self.nodes[n.index()];
        if !node.alive {
            return;
        }
        let oh = node.dcf.window.measure_overhead(c_occ, now);
        let flow_bits: Vec<(FlowId, u64)> = std::mem::take(&mut node.window_flow_bits).into_iter().collect();
        let rates = std::mem::take(&mut node.window_flow_rate);
        node.book.relay_bps = std::mem::take(&mut node.window_relay_bits) as f64 / window_s;
        if !self.p.features.congestion_control {
            return;
        }
        let total: u64 = flow_bits.iter().map(|(_, b)| b).sum();
        if total == 0 {
            return;
        }
        let s = total as f64 / window_s;
        let delta = channel_resource_delta(oh, self.p.congestion.t_rh_s, s, s);
        let hysteresis = self.p.congestion.hysteresis;
        for (f, share) in apportion(delta, &flow_bits) {
            let flow = &mut self.flows[f.index()];
            if flow.source == n {
                if flow.is_active() && exceeds_hysteresis(share, flow.rate_bps, hysteresis) {
                    let rate = adjust_rate(flow.rate_bps, share, flow.rate_min_bps, flow.rate_max_bps);
                    flow.set_rate(rate);
                }
            } else if share < 0.0 {
                let rate = rates.get(&f).copied().unwrap_or(flow.rate_bps);
                if exceeds_hysteresis(share, rate, hysteresis) {
                    let notice = CongestionNotice { flow: f, source: flow.source, reporter: n, delta_bps: share };
                    self.route_packet(n, Packet::Notice(notice), true);
                }
            }
        }
    }
}
