//! DCF with RTS/CTS for unicast frames and plain broadcast for the rest.

use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::mac::{Frame, FrameKind, Phase, QueuedPacket};
use crate::metrics::{ControlKind, DropCause};
use crate::packet::Packet;
use crate::phy;
use crate::rng::StreamLabel;

use super::{Event, Outgoing, Simulation};

fn control_kind(p: &Packet) -> Option<ControlKind> {
    match p {
        Packet::Data(_) => None,
        Packet::Rreq(_) => Some(ControlKind::Rreq),
        Packet::Rrep(_) => Some(ControlKind::Rrep),
        Packet::Rerr(_) => Some(ControlKind::Rerr),
        Packet::Hello(_) => Some(ControlKind::Hello),
        Packet::Probe(_) => Some(ControlKind::Probe),
        Packet::Notice(_) => Some(ControlKind::Notice),
    }
}

impl Simulation {
    pub(crate) fn mac_submit(&mut self, n: NodeId, qp: QueuedPacket) {
        if !self.nodes[n.index()].alive {
            self.drop_packet(&qp.packet, DropCause::NodeDead);
            return;
        }
        if let Some(kind) = control_kind(&qp.packet) {
            self.metrics.control_packet(kind);
        }
        if let Err(qp) = self.nodes[n.index()].dcf.enqueue(qp) {
            self.drop_packet(&qp.packet, DropCause::QueueFull);
            return;
        }
        self.mac_promote(n);
    }

    /// Moves the next queued packet to the head of line and starts contending.
    fn mac_promote(&mut self, n: NodeId) {
        let now = self.engine.now();
        let cw_min = self.p.timing.cw_min;
        let node = &mut self.nodes[n.index()];
        if !node.alive || node.dcf.hol.is_some() {
            return;
        }
        let Some(qp) = node.dcf.pop_next() else {
            node.dcf.phase = Phase::Idle;
            return;
        };
        node.dcf.hol = Some(qp);
        node.hol_seq = node.dcf.next_mac_seq();
        node.dcf.attempts = 0;
        node.dcf.cw = cw_min;
        node.dcf.acc_from = now;
        self.mac_begin_backoff(n);
    }

    fn mac_begin_backoff(&mut self, n: NodeId) {
        let cw = self.nodes[n.index()].dcf.cw;
        let slots = self.rng.uniform_int(StreamLabel::MacBackoff, 0, cw as u64) as u32;
        let dcf = &mut self.nodes[n.index()].dcf;
        dcf.backoff_slots = slots;
        dcf.last_backoff_draw = slots;
        dcf.countdown_anchor = None;
        dcf.phase = Phase::Backoff;
        self.mac_medium_changed(n);
    }

    fn medium_busy(&self, n: NodeId) -> bool {
        let node = &self.nodes[n.index()];
        node.outgoing.is_some()
            || !node.arrivals.is_empty()
            || node.dcf.nav_until > self.engine.now()
            || node.dcf.pending_response.is_some()
    }

    /// Freezes or resumes the backoff countdown after any change on the medium.
    pub(crate) fn mac_medium_changed(&mut self, n: NodeId) {
        if !self.nodes[n.index()].alive || self.nodes[n.index()].dcf.phase != Phase::Backoff {
            return;
        }
        let now = self.engine.now();
        let slot = SimTime::from_secs(self.p.timing.slot_s);
        let busy = self.medium_busy(n);
        self.nodes[n.index()].dcf.medium_busy = busy;
        let dcf = &mut self.nodes[n.index()].dcf;
        if busy {
            // A countdown expiring in this very instant still transmits.
            if matches!(dcf.access_timer, Some((t, _)) if t == now) {
                return;
            }
            if let Some(id) = dcf.freeze(now, slot) {
                self.engine.cancel(id);
            }
        } else if dcf.countdown_anchor.is_none() {
            let anchor = now + SimTime::from_secs(self.p.timing.difs_s);
            let at = dcf.access_time(anchor, slot);
            dcf.countdown_anchor = Some(anchor);
            let id = self.engine.schedule(at, Event::MacAccess(n));
            self.nodes[n.index()].dcf.access_timer = Some((at, id));
        }
    }

    pub(crate) fn on_mac_access(&mut self, n: NodeId) {
        let node = &mut self.nodes[n.index()];
        node.dcf.access_timer = None;
        node.dcf.countdown_anchor = None;
        node.dcf.backoff_slots = 0;
        if !node.alive || node.dcf.phase != Phase::Backoff {
            return;
        }
        if node.outgoing.is_some() || node.dcf.pending_response.is_some() {
            // Wait for the medium to clear, then a bare DIFS.
            return;
        }
        self.transmit_hol(n);
    }

    fn transmit_hol(&mut self, n: NodeId) {
        let now = self.engine.now();
        let max = self.p.radio.max_tx_dbm;
        let power_control = self.p.features.power_control;
        let timing = self.p.timing.clone();
        let node = &mut self.nodes[n.index()];
        let Some(hol) = node.dcf.hol.clone() else { return };
        node.dcf.phase = Phase::Sending;
        let frame = match hol.next_hop {
            None => Frame {
                kind: FrameKind::Data,
                src: n,
                dst: None,
                tx_power_dbm: max,
                p_tmin_request: None,
                bits: Frame::data_bits(&hol.packet),
                nav: SimTime::ZERO,
                mac_seq: node.hol_seq,
                packet: Some(hol.packet),
            },
            Some(hop) => {
                let t_acc = (now - node.dcf.acc_from).as_secs();
                node.dcf.window.record_handshake(t_acc);
                node.dcf.last_t_acc = t_acc;
                let data_air = phy::airtime(Frame::data_bits(&hol.packet), self.p.radio.channel_rate_bps);
                let nav = 3.0 * timing.sifs_s + timing.t_cts() + data_air + timing.t_ack();
                let request = if power_control { hol.p_tmin } else { None };
                let power = match (self.p.rts_power, request) {
                    (crate::config::RtsPower::PTmin, Some(p)) => p,
                    _ => max,
                };
                Frame {
                    kind: FrameKind::Rts,
                    src: n,
                    dst: Some(hop),
                    tx_power_dbm: power,
                    p_tmin_request: request,
                    bits: timing.rts_bits,
                    nav: SimTime::from_secs(nav),
                    mac_seq: node.hol_seq,
                    packet: None,
                }
            }
        };
        self.start_tx(n, frame);
    }

    pub(crate) fn mac_tx_complete(&mut self, n: NodeId, out: Outgoing) {
        let t = &self.p.timing;
        let wait = match (out.kind, out.broadcast) {
            (FrameKind::Rts, _) => Some((Phase::AwaitCts, t.sifs_s + t.t_cts() + t.slot_s)),
            (FrameKind::Data, false) => Some((Phase::AwaitAck, t.sifs_s + t.t_ack() + t.slot_s)),
            (FrameKind::Data, true) => {
                if self.nodes[n.index()].dcf.phase == Phase::Sending {
                    self.finish_hol(n);
                }
                None
            }
            _ => None,
        };
        if let Some((phase, timeout)) = wait {
            let expected = match phase {
                Phase::AwaitCts => Phase::Sending,
                _ => Phase::SendingData,
            };
            if self.nodes[n.index()].dcf.phase != expected {
                return;
            }
            let id = self.engine.schedule_in(SimTime::from_secs(timeout), Event::MacTimeout(n));
            let dcf = &mut self.nodes[n.index()].dcf;
            dcf.phase = phase;
            dcf.timeout_timer = Some(id);
        }
    }

    /// The head-of-line packet left this node for good.
    fn finish_hol(&mut self, n: NodeId) {
        let cw_min = self.p.timing.cw_min;
        let dcf = &mut self.nodes[n.index()].dcf;
        if let Some(id) = dcf.timeout_timer.take() {
            self.engine.cancel(id);
        }
        let hol = dcf.hol.take();
        dcf.phase = Phase::Idle;
        dcf.cw = cw_min;
        dcf.attempts = 0;
        if let Some(QueuedPacket { packet: Packet::Data(d), next_hop: Some(_), .. }) = hol {
            self.metrics.data_released(d.uid);
        }
        self.mac_promote(n);
    }

    fn schedule_response(&mut self, n: NodeId, frame: Frame) {
        let id = self
            .engine
            .schedule_in(SimTime::from_secs(self.p.timing.sifs_s), Event::MacRespond(n));
        self.nodes[n.index()].dcf.pending_response = Some((frame, id));
        self.mac_medium_changed(n);
    }

    fn set_nav(&mut self, n: NodeId, duration: SimTime) {
        let until = self.engine.now() + duration;
        let dcf = &mut self.nodes[n.index()].dcf;
        if until <= dcf.nav_until {
            return;
        }
        dcf.nav_until = until;
        if let Some(id) = dcf.nav_timer.take() {
            self.engine.cancel(id);
        }
        let id = self.engine.schedule(until, Event::NavEnd(n));
        self.nodes[n.index()].dcf.nav_timer = Some(id);
    }

    pub(crate) fn mac_receive(&mut self, n: NodeId, frame: &Frame, p_rx: f64) {
        let now = self.engine.now();
        let max = self.p.radio.max_tx_dbm;
        let power_control = self.p.features.power_control;
        match frame.dst {
            None => {
                if let Some(p) = &frame.packet {
                    self.net_receive(n, p.clone(), frame.src, p_rx, frame.tx_power_dbm);
                }
                return;
            }
            Some(d) if d != n => {
                self.set_nav(n, frame.nav);
                return;
            }
            Some(_) => {}
        }
        let t = self.p.timing.clone();
        let node = &mut self.nodes[n.index()];
        let free = node.outgoing.is_none() && node.dcf.pending_response.is_none();
        match frame.kind {
            FrameKind::Rts => {
                let mid_exchange = matches!(
                    node.dcf.phase,
                    Phase::AwaitCts | Phase::CtsReceived | Phase::SendingData | Phase::AwaitAck
                );
                if !free || mid_exchange || node.dcf.nav_until > now {
                    return;
                }
                let power = if power_control { frame.p_tmin_request.unwrap_or(max) } else { max };
                let nav = frame.nav.saturating_sub(SimTime::from_secs(t.sifs_s + t.t_cts()));
                let cts = Frame {
                    kind: FrameKind::Cts,
                    src: n,
                    dst: Some(frame.src),
                    tx_power_dbm: power,
                    p_tmin_request: frame.p_tmin_request,
                    bits: t.cts_bits,
                    nav,
                    mac_seq: frame.mac_seq,
                    packet: None,
                };
                self.schedule_response(n, cts);
            }
            FrameKind::Cts => {
                let Some(hol) = node.dcf.hol.clone() else { return };
                if node.dcf.phase != Phase::AwaitCts || hol.next_hop != Some(frame.src) {
                    return;
                }
                if let Some(id) = node.dcf.timeout_timer.take() {
                    self.engine.cancel(id);
                }
                node.dcf.phase = Phase::CtsReceived;
                let request = if power_control { hol.p_tmin } else { None };
                let data = Frame {
                    kind: FrameKind::Data,
                    src: n,
                    dst: Some(frame.src),
                    tx_power_dbm: request.unwrap_or(max),
                    p_tmin_request: request,
                    bits: Frame::data_bits(&hol.packet),
                    nav: SimTime::from_secs(t.sifs_s + t.t_ack()),
                    mac_seq: self.nodes[n.index()].hol_seq,
                    packet: Some(hol.packet),
                };
                self.schedule_response(n, data);
            }
            FrameKind::Data => {
                if free {
                    let power = if power_control { frame.p_tmin_request.unwrap_or(max) } else { max };
                    let ack = Frame {
                        kind: FrameKind::Ack,
                        src: n,
                        dst: Some(frame.src),
                        tx_power_dbm: power,
                        p_tmin_request: None,
                        bits: t.ack_bits,
                        nav: SimTime::ZERO,
                        mac_seq: frame.mac_seq,
                        packet: None,
                    };
                    self.schedule_response(n, ack);
                }
                if !self.nodes[n.index()].dcf.accept_seq(frame.src, frame.mac_seq) {
                    return;
                }
                if let Some(p) = &frame.packet {
                    if let Packet::Data(d) = p {
                        self.metrics.data_copied(d.uid);
                    }
                    self.net_receive(n, p.clone(), frame.src, p_rx, frame.tx_power_dbm);
                }
            }
            FrameKind::Ack => {
                let ok = node.dcf.phase == Phase::AwaitAck
                    && node.dcf.hol.as_ref().is_some_and(|h| h.next_hop == Some(frame.src));
                if ok {
                    self.finish_hol(n);
                }
            }
        }
    }

    pub(crate) fn on_mac_respond(&mut self, n: NodeId) {
        let node = &mut self.nodes[n.index()];
        let Some((frame, _)) = node.dcf.pending_response.take() else { return };
        if !node.alive {
            return;
        }
        if node.outgoing.is_some() {
            if frame.kind == FrameKind::Data {
                self.attempt_failed(n);
            }
            return;
        }
        if frame.kind == FrameKind::Data {
            node.dcf.phase = Phase::SendingData;
        }
        self.start_tx(n, frame);
    }

    pub(crate) fn on_mac_timeout(&mut self, n: NodeId) {
        let dcf = &mut self.nodes[n.index()].dcf;
        dcf.timeout_timer = None;
        if matches!(dcf.phase, Phase::AwaitCts | Phase::AwaitAck) {
            self.attempt_failed(n);
        }
    }

    fn attempt_failed(&mut self, n: NodeId) {
        let now = self.engine.now();
        let limit = self.p.retry_limit;
        let grown = self.p.timing.grow_cw(self.nodes[n.index()].dcf.cw);
        let dcf = &mut self.nodes[n.index()].dcf;
        dcf.attempts += 1;
        if dcf.attempts >= limit {
            let hol = dcf.hol.take();
            dcf.phase = Phase::Idle;
            dcf.cw = self.p.timing.cw_min;
            dcf.attempts = 0;
            if let Some(qp) = hol {
                self.net_link_failed(n, qp);
            }
            self.mac_promote(n);
        } else {
            dcf.cw = grown;
            dcf.acc_from = now;
            self.mac_begin_backoff(n);
        }
    }

    pub(crate) fn on_nav_end(&mut self, n: NodeId) {
        self.nodes[n.index()].dcf.nav_timer = None;
        self.mac_medium_changed(n);
    }
}
