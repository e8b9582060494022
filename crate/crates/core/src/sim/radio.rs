//! Shared channel: frame propagation, collisions, radio state and energy.

use crate::energy::RadioState;
use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::mac::{Frame, FrameKind};
use crate::metrics::DropCause;
use crate::packet::Packet;
use crate::phy;
use crate::traffic::FlowState;

use super::{Arrival, Event, FrameRecord, Outgoing, Simulation, Transmission};

/// Distances below this are treated as this, so co-located nodes stay finite.
const MIN_DISTANCE_M: f64 = 0.01;

impl Simulation {
    pub(crate) fn start_tx(&mut self, sender: NodeId, frame: Frame) {
        let now = self.engine.now();
        let rate = match frame.kind {
            FrameKind::Data => self.p.radio.channel_rate_bps,
            _ => self.p.timing.control_rate_bps,
        };
        let end = now + SimTime::from_secs(phy::airtime(frame.bits, rate));
        let id = self.next_tx;
        self.next_tx += 1;

        let from = self.nodes[sender.index()].motion.position_at(now);
        let mut receivers = Vec::new();
        for node in self.nodes.iter_mut() {
            if node.id == sender || !node.alive {
                continue;
            }
            let d = from.distance(node.motion.position_at(now)).max(MIN_DISTANCE_M);
            let p_rx = phy::received_power(frame.tx_power_dbm, d, &self.p.radio);
            if !phy::senses_carrier(p_rx, &self.p.radio) {
                continue;
            }
            let overlapping = !node.arrivals.is_empty();
            for a in node.arrivals.iter_mut() {
                a.corrupted = true;
            }
            node.arrivals.push(Arrival {
                tx: id,
                corrupted: overlapping || node.outgoing.is_some(),
            });
            receivers.push((node.id, p_rx));
        }

        let s = &mut self.nodes[sender.index()];
        for a in s.arrivals.iter_mut() {
            a.corrupted = true;
        }
        s.outgoing = Some(Outgoing {
            tx: id,
            kind: frame.kind,
            broadcast: frame.is_broadcast(),
            power: frame.tx_power_dbm,
        });
        if let Some(log) = self.frame_log.as_mut() {
            log.push(FrameRecord {
                t: now,
                from: sender,
                at: None,
                kind: frame.kind,
                packet: frame.packet.as_ref().map(Packet::label),
                power_dbm: frame.tx_power_dbm,
                ok: true,
            });
        }
        let affected: Vec<NodeId> = receivers.iter().map(|r| r.0).collect();
        self.txs.insert(id, Transmission { sender, frame, receivers });
        self.engine.schedule(end, Event::TxEnd(id));

        self.update_radio(sender);
        self.mac_medium_changed(sender);
        for n in affected {
            self.update_radio(n);
            self.mac_medium_changed(n);
        }
    }

    pub(crate) fn on_tx_end(&mut self, id: u64) {
        let Some(tx) = self.txs.remove(&id) else { return };
        let now = self.engine.now();
        let sender = tx.sender;
        let out = {
            let s = &mut self.nodes[sender.index()];
            match s.outgoing {
                Some(o) if o.tx == id => s.outgoing.take(),
                _ => None,
            }
        };

        let mut decoded = Vec::new();
        for &(n, p_rx) in &tx.receivers {
            let node = &mut self.nodes[n.index()];
            let Some(pos) = node.arrivals.iter().position(|a| a.tx == id) else { continue };
            let a = node.arrivals.remove(pos);
            let ok = node.alive && !a.corrupted && phy::can_receive(p_rx, &self.p.radio);
            if let Some(log) = self.frame_log.as_mut() {
                log.push(FrameRecord {
                    t: now,
                    from: sender,
                    at: Some(n),
                    kind: tx.frame.kind,
                    packet: tx.frame.packet.as_ref().map(Packet::label),
                    power_dbm: p_rx,
                    ok,
                });
            }
            if ok {
                decoded.push((n, p_rx));
            }
        }
        for (n, p_rx) in decoded {
            if self.nodes[n.index()].alive {
                self.mac_receive(n, &tx.frame, p_rx);
            }
        }
        if let Some(o) = out {
            if self.nodes[sender.index()].alive {
                self.mac_tx_complete(sender, o);
            }
        }
        self.update_radio(sender);
        self.mac_medium_changed(sender);
        for &(n, _) in &tx.receivers {
            self.update_radio(n);
            self.mac_medium_changed(n);
        }
    }

    /// Re-derives a node's radio state and charges the interval just ended.
    pub(crate) fn update_radio(&mut self, n: NodeId) {
        let now = self.engine.now();
        let node = &mut self.nodes[n.index()];
        if !node.alive {
            return;
        }
        let want = match node.outgoing {
            Some(o) => RadioState::Tx(o.power),
            None if !node.arrivals.is_empty() => RadioState::Rx,
            None => RadioState::Idle,
        };
        if want == node.energy.state() {
            return;
        }
        let charge = node.energy.transition(want, now, &self.p.draw);
        let dead = node.energy.is_dead();
        self.metrics.energy_charge(n.index(), charge);
        if dead {
            self.node_died(n);
        } else {
            self.reschedule_depletion(n);
        }
    }

    pub(crate) fn reschedule_depletion(&mut self, n: NodeId) {
        let node = &mut self.nodes[n.index()];
        if let Some(id) = node.depletion.take() {
            self.engine.cancel(id);
        }
        if let Some(at) = node.energy.depletion_time(&self.p.draw) {
            if at <= self.p.end {
                node.depletion = Some(self.engine.schedule(at, Event::EnergyDepleted(n)));
            }
        }
    }

    pub(crate) fn on_energy_depleted(&mut self, n: NodeId) {
        let now = self.engine.now();
        let node = &mut self.nodes[n.index()];
        node.depletion = None;
        if !node.alive {
            return;
        }
        let charge = node.energy.settle(now, &self.p.draw);
        let dead = node.energy.is_dead();
        self.metrics.energy_charge(n.index(), charge);
        if dead {
            self.node_died(n);
        } else {
            self.reschedule_depletion(n);
        }
    }

    /// Removes a node whose battery is empty from every protocol activity.
    pub(crate) fn node_died(&mut self, n: NodeId) {
        let node = &mut self.nodes[n.index()];
        if !node.alive {
            return;
        }
        node.alive = false;
        let mut timers: Vec<_> = [node.depletion.take(), node.dcf.timeout_timer.take(), node.dcf.nav_timer.take()]
            .into_iter()
            .flatten()
            .collect();
        if let Some((_, id)) = node.dcf.access_timer.take() {
            timers.push(id);
        }
        if let Some((_, id)) = node.dcf.pending_response.take() {
            timers.push(id);
        }
        timers.extend(std::mem::take(&mut node.discoveries).into_values().map(|d| d.timer));
        node.dcf.countdown_anchor = None;
        node.dcf.phase = crate::mac::Phase::Idle;
        node.arrivals.clear();
        let mut lost: Vec<Packet> = node.dcf.drain_all().into_iter().map(|q| q.packet).collect();
        lost.extend(node.pending.take_all());
        let outgoing = node.outgoing.take();
        for id in timers {
            self.engine.cancel(id);
        }
        if let Some(o) = outgoing {
            if let Some(tx) = self.txs.get(&o.tx) {
                for &(r, _) in &tx.receivers {
                    if let Some(a) = self.nodes[r.index()].arrivals.iter_mut().find(|a| a.tx == o.tx) {
                        a.corrupted = true;
                    }
                }
            }
        }
        for p in lost {
            self.drop_packet(&p, DropCause::NodeDead);
        }
        for f in self.flows.iter_mut() {
            if f.source == n && matches!(f.state, FlowState::Active | FlowState::PendingAdmission) {
                f.state = FlowState::Done;
            }
        }
    }

    pub(crate) fn drop_packet(&mut self, p: &Packet, cause: DropCause) {
        if let Packet::Data(d) = p {
            self.metrics.data_dropped(d.uid, cause);
        }
    }
}
