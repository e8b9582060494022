//! The simulated network: nodes, the shared channel and every protocol
//! layer, driven by one event queue.

mod mac;
mod net;
mod radio;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::config::{Features, MobilityModel, RtsPower, ScenarioConfig};
use crate::crosslayer::{AdmissionParams, BandwidthBook, CongestionParams};
use crate::energy::{DrawModel, EnergyMeter};
use crate::engine::{Engine, EventId, SimTime};
use crate::ids::{FlowId, NodeId};
use crate::mac::{Dcf, FrameKind, MacTiming, NeighborTable, QueuedPacket};
use crate::metrics::{ConsistencyError, MetricsCollector, MetricsReport, NodeEnergy};
use crate::mobility::{Area, Position, WaypointState};
use crate::packet::Packet;
use crate::phy::RadioParams;
use crate::report::RunRow;
use crate::rng::{RandomStreams, StreamLabel};
use crate::routing::{AodvParams, PendingBuffer, RouteTable, RreqCache};
use crate::traffic::{CbrFlow, FlowState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Event {
    TxEnd(u64),
    MacAccess(NodeId),
    MacTimeout(NodeId),
    MacRespond(NodeId),
    NavEnd(NodeId),
    LegStart(NodeId),
    WaypointReached(NodeId),
    HelloDue(NodeId),
    WindowClose(NodeId),
    FlowStart(FlowId),
    FlowStop(FlowId),
    TrafficSend(FlowId),
    DiscoveryTimeout(NodeId, NodeId),
    ProbeTimeout(FlowId),
    EnergyDepleted(NodeId),
    MetricSample,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

/// One reception in progress at a node.
#[derive(Clone, Debug)]
pub(crate) struct Arrival {
    pub tx: u64,
    pub corrupted: bool,
}

/// One frame on the air.
#[derive(Clone, Debug)]
pub(crate) struct Transmission {
    pub sender: NodeId,
    pub frame: crate::mac::Frame,
    pub receivers: Vec<(NodeId, f64)>,
}

/// What a node is currently transmitting.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Outgoing {
    pub tx: u64,
    pub kind: FrameKind,
    pub broadcast: bool,
    pub power: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Discovery {
    pub retries: u32,
    pub timer: EventId,
}

pub(crate) struct Node {
    pub id: NodeId,
    pub alive: bool,
    pub motion: WaypointState,
    pub energy: EnergyMeter,
    pub depletion: Option<EventId>,
    pub outgoing: Option<Outgoing>,
    pub arrivals: Vec<Arrival>,
    pub dcf: Dcf,
    pub hol_seq: u32,
    pub routes: RouteTable,
    pub rreq_cache: RreqCache,
    pub pending: PendingBuffer,
    pub seq: u32,
    pub rreq_id: u32,
    pub discoveries: BTreeMap<NodeId, Discovery>,
    pub neighbors: NeighborTable,
    pub book: BandwidthBook,
    /// Data bits this node transmitted in the current window, per flow.
    pub window_flow_bits: BTreeMap<FlowId, u64>,
    /// Of those, bits for flows this node does not source.
    pub window_relay_bits: u64,
    /// Latest source rate seen on each flow's packets this window.
    pub window_flow_rate: BTreeMap<FlowId, f64>,
}

/// A frame event observed on the channel, recorded when tracing is on.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub t: SimTime,
    pub from: NodeId,
    /// Receiving node for decode records, `None` for the transmission itself.
    pub at: Option<NodeId>,
    pub kind: FrameKind,
    pub packet: Option<&'static str>,
    pub power_dbm: f64,
    /// Decoded without collision.
    pub ok: bool,
}

pub(crate) struct Params {
    pub features: Features,
    pub radio: RadioParams,
    pub timing: MacTiming,
    pub draw: DrawModel,
    pub aodv: AodvParams,
    pub congestion: CongestionParams,
    pub admission: AdmissionParams,
    pub retry_limit: u32,
    pub rts_power: RtsPower,
    pub k: f64,
    pub rss_accept_dbm: f64,
    pub hello_interval: SimTime,
    pub window: SimTime,
    pub area: Area,
    pub mobile: bool,
    pub speed: (f64, f64),
    pub pause: SimTime,
    pub end: SimTime,
    pub sample_interval: Option<SimTime>,
    pub count_hello: bool,
}

pub struct Simulation {
    pub(crate) p: Params,
    pub(crate) engine: Engine<Event>,
    pub(crate) rng: RandomStreams,
    pub(crate) nodes: Vec<Node>,
    pub(crate) flows: Vec<CbrFlow>,
    pub(crate) txs: HashMap<u64, Transmission>,
    pub(crate) next_tx: u64,
    pub(crate) next_uid: u64,
    pub(crate) metrics: MetricsCollector,
    pub(crate) probe_timers: BTreeMap<FlowId, EventId>,
    pub(crate) violation: Option<ConsistencyError>,
    pub(crate) frame_log: Option<Vec<FrameRecord>>,
    pub(crate) path_loss_anomalies: u64,
    pub(crate) rrep_dropped: u64,
    config: ScenarioConfig,
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub scenario_id: String,
    pub protocol: String,
    pub seed: u64,
    pub nodes: u32,
    pub pause: f64,
    pub features: Features,
    pub report: MetricsReport,
    pub trace_digest: String,
    pub events_fired: u64,
}

impl RunOutput {
    pub fn row(&self) -> RunRow {
        RunRow::new(&self.scenario_id, &self.protocol, self.seed, self.nodes, self.pause, &self.report)
    }
}

impl Simulation {
    /// Builds the initial network. `cfg` must already be validated.
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let features = cfg.features();
        let radio = cfg.radio.params();
        let timing = cfg.mac.timing(cfg.radio.channel_rate_bps);
        let draw = DrawModel::new(&cfg.energy.params(), radio.max_tx_dbm);
        let hello_interval = SimTime::from_secs(cfg.crosslayer.hello_interval_s);
        let p = Params {
            features,
            rss_accept_dbm: radio.rx_threshold_dbm + cfg.crosslayer.rss_margin_db,
            radio,
            timing: timing.clone(),
            draw,
            aodv: cfg.aodv.params(),
            congestion: cfg.crosslayer.congestion(),
            admission: cfg.crosslayer.admission(cfg.radio.channel_rate_bps),
            retry_limit: cfg.mac.retry_limit,
            rts_power: cfg.mac.rts_power,
            k: cfg.crosslayer.k,
            hello_interval,
            window: SimTime::from_secs(cfg.crosslayer.window_s),
            area: cfg.area(),
            mobile: cfg.mobility.model == MobilityModel::RandomWaypoint,
            speed: (cfg.mobility.min_speed_mps.unwrap_or(cfg.mobility.speed_mps), cfg.mobility.speed_mps),
            pause: SimTime::from_secs(cfg.mobility.pause_s),
            end: SimTime::from_secs(cfg.sim_time_s),
            sample_interval: (cfg.metrics.sample_interval_s > 0.0)
                .then(|| SimTime::from_secs(cfg.metrics.sample_interval_s)),
            count_hello: cfg.crosslayer.count_hello_as_control,
        };
        let mut rng = RandomStreams::new(cfg.seed);
        let n = cfg.nodes.count as usize;

        let positions: Vec<Position> = match &cfg.nodes.positions {
            Some(list) => list.iter().map(|q| Position::new(q[0], q[1])).collect(),
            None => (0..n).map(|_| p.area.sample(rng.stream(StreamLabel::Topology))).collect(),
        };
        let route_lifetime = SimTime::from_secs(p.aodv.net_traversal_time_s * 2.0);
        let nodes: Vec<Node> = positions
            .into_iter()
            .enumerate()
            .map(|(i, pos)| Node {
                id: NodeId(i as u32),
                alive: true,
                motion: WaypointState::stationary(pos),
                energy: EnergyMeter::new(cfg.energy.initial_j),
                depletion: None,
                outgoing: None,
                arrivals: Vec::new(),
                dcf: Dcf::new(timing.cw_min, cfg.mac.queue_limit),
                hol_seq: 0,
                routes: RouteTable::new(),
                rreq_cache: RreqCache::new(route_lifetime),
                pending: PendingBuffer::new(p.aodv.buffer_limit),
                seq: 0,
                rreq_id: 0,
                discoveries: BTreeMap::new(),
                neighbors: NeighborTable::new(NodeId(i as u32), hello_interval + hello_interval),
                book: BandwidthBook::new(),
                window_flow_bits: BTreeMap::new(),
                window_relay_bits: 0,
                window_flow_rate: BTreeMap::new(),
            })
            .collect();

        let flows = build_flows(cfg, &p, &mut rng);
        let mut sim = Simulation {
            p,
            engine: Engine::new(),
            rng,
            metrics: MetricsCollector::new(n),
            nodes,
            flows,
            txs: HashMap::new(),
            next_tx: 0,
            next_uid: 0,
            probe_timers: BTreeMap::new(),
            violation: None,
            frame_log: None,
            path_loss_anomalies: 0,
            rrep_dropped: 0,
            config: cfg.clone(),
        };
        sim.bootstrap();
        sim
    }

    fn bootstrap(&mut self) {
        for i in 0..self.nodes.len() {
            self.reschedule_depletion(NodeId(i as u32));
        }
        if self.p.mobile {
            for i in 0..self.nodes.len() {
                self.engine.schedule(SimTime::ZERO, Event::LegStart(NodeId(i as u32)));
            }
        }
        let f = self.p.features;
        if f.admission_control {
            for i in 0..self.nodes.len() {
                let offset = self.rng.uniform(StreamLabel::Topology, 0.0, self.p.hello_interval.as_secs());
                self.engine.schedule(SimTime::from_secs(offset), Event::HelloDue(NodeId(i as u32)));
            }
        }
        if f.congestion_control || f.admission_control {
            for i in 0..self.nodes.len() {
                self.engine.schedule(self.p.window, Event::WindowClose(NodeId(i as u32)));
            }
        }
        for fl in &self.flows {
            self.engine.schedule(fl.start, Event::FlowStart(fl.id));
            if let Some(stop) = fl.stop {
                self.engine.schedule(stop, Event::FlowStop(fl.id));
            }
        }
        if let Some(dt) = self.p.sample_interval {
            self.engine.schedule(dt, Event::MetricSample);
        }
    }

    /// Records every transmission and decode in memory (for inspection).
    pub fn enable_frame_log(&mut self) {
        self.frame_log = Some(Vec::new());
    }

    pub fn frame_log(&self) -> &[FrameRecord] {
        self.frame_log.as_deref().unwrap_or(&[])
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn features(&self) -> Features {
        self.p.features
    }

    pub fn radio(&self) -> &RadioParams {
        &self.p.radio
    }

    pub fn timing(&self) -> &MacTiming {
        &self.p.timing
    }

    pub fn position(&self, node: NodeId) -> Position {
        self.nodes[node.index()].motion.position_at(self.engine.now())
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.nodes[node.index()].alive
    }

    pub fn routes(&self, node: NodeId) -> &RouteTable {
        &self.nodes[node.index()].routes
    }

    pub fn neighbors(&self, node: NodeId) -> &NeighborTable {
        &self.nodes[node.index()].neighbors
    }

    pub fn dcf(&self, node: NodeId) -> &Dcf {
        &self.nodes[node.index()].dcf
    }

    pub fn energy(&self, node: NodeId) -> &EnergyMeter {
        &self.nodes[node.index()].energy
    }

    pub fn book(&self, node: NodeId) -> &BandwidthBook {
        &self.nodes[node.index()].book
    }

    pub fn book_mut(&mut self, node: NodeId) -> &mut BandwidthBook {
        &mut self.nodes[node.index()].book
    }

    pub fn flows(&self) -> &[CbrFlow] {
        &self.flows
    }

    pub fn metrics(&self) -> &MetricsCollector {
        &self.metrics
    }

    /// Number of RREP frames whose sender advertised less power than was
    /// received (path loss clamped to zero).
    pub fn path_loss_anomalies(&self) -> u64 {
        self.path_loss_anomalies
    }

    pub fn rrep_dropped(&self) -> u64 {
        self.rrep_dropped
    }

    /// Hands a packet straight to a node's MAC, bypassing routing.
    pub fn mac_enqueue(&mut self, node: NodeId, packet: Packet, next_hop: Option<NodeId>, p_tmin: Option<f64>) {
        self.mac_submit(node, QueuedPacket { packet, next_hop, p_tmin });
    }

    /// Kills a node at the current time, as if its battery emptied.
    pub fn kill(&mut self, node: NodeId) {
        let now = self.engine.now();
        let charge = self.nodes[node.index()]
            .energy
            .transition(crate::energy::RadioState::Dead, now, &self.p.draw);
        self.metrics.energy_charge(node.index(), charge);
        self.node_died(node);
    }

    /// Processes every event up to and including `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while let Some((_, ev)) = self.engine.pop_until(t) {
            self.dispatch(ev);
        }
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::TxEnd(tx) => self.on_tx_end(tx),
            Event::MacAccess(n) => self.on_mac_access(n),
            Event::MacTimeout(n) => self.on_mac_timeout(n),
            Event::MacRespond(n) => self.on_mac_respond(n),
            Event::NavEnd(n) => self.on_nav_end(n),
            Event::LegStart(n) => self.on_leg_start(n),
            Event::WaypointReached(n) => self.on_waypoint_reached(n),
            Event::HelloDue(n) => self.on_hello_due(n),
            Event::WindowClose(n) => self.on_window_close(n),
            Event::FlowStart(f) => self.on_flow_start(f),
            Event::FlowStop(f) => self.on_flow_stop(f),
            Event::TrafficSend(f) => self.on_traffic_send(f),
            Event::DiscoveryTimeout(n, d) => self.on_discovery_timeout(n, d),
            Event::ProbeTimeout(f) => self.on_probe_timeout(f),
            Event::EnergyDepleted(n) => self.on_energy_depleted(n),
            Event::MetricSample => self.on_metric_sample(),
        }
    }

    /// Runs to the configured end time and finalizes the metrics.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let end = self.p.end;
        self.run_until(end);
        self.finish()
    }

    /// Settles energy at the current clock and computes the report.
    pub fn finish(mut self) -> Result<RunOutput, SimError> {
        let now = self.engine.now();
        for i in 0..self.nodes.len() {
            let charge = self.nodes[i].energy.settle(now, &self.p.draw);
            self.metrics.energy_charge(i, charge);
        }
        if let Some(v) = self.violation.take() {
            return Err(v.into());
        }
        let energy: Vec<NodeEnergy> = self
            .nodes
            .iter()
            .map(|n| NodeEnergy {
                initial: n.energy.initial(),
                residual: n.energy.residual(),
                consumed: n.energy.consumed(),
            })
            .collect();
        let trace_digest = self.engine.trace_digest();
        let events_fired = self.engine.fired();
        let report = self.metrics.finalize(&energy, now.as_secs(), self.p.count_hello)?;
        Ok(RunOutput {
            scenario_id: self.config.scenario_id.clone(),
            protocol: self.p.features.label(),
            seed: self.config.seed,
            nodes: self.config.nodes.count,
            pause: self.config.mobility.pause_s,
            features: self.p.features,
            report,
            trace_digest,
            events_fired,
        })
    }

    fn on_metric_sample(&mut self) {
        let now = self.engine.now();
        let t = now.as_secs();
        let sent = self.metrics.sent();
        let delivered = self.metrics.delivered();
        let pdr = if sent > 0 { delivered as f64 / sent as f64 } else { 0.0 };
        let n = self.nodes.len() as f64;
        let consumed: f64 = self
            .nodes
            .iter()
            .map(|node| node.energy.consumed() + node.energy.pending_charge(now, &self.p.draw))
            .sum();
        let alive = self.nodes.iter().filter(|n| n.alive).count() as f64;
        let control = self.metrics.control_count(self.p.count_hello) as f64;
        let dropped = self.metrics.dropped() as f64;
        self.metrics.sample("pdr", t, pdr);
        self.metrics.sample("delivered", t, delivered as f64);
        self.metrics.sample("dropped", t, dropped);
        self.metrics.sample("control_pkts", t, control);
        self.metrics.sample("avg_energy_j", t, consumed / n);
        self.metrics.sample("alive_nodes", t, alive);
        if let Some(dt) = self.p.sample_interval {
            self.engine.schedule(now + dt, Event::MetricSample);
        }
    }
}

fn build_flows(cfg: &ScenarioConfig, p: &Params, rng: &mut RandomStreams) -> Vec<CbrFlow> {
    let t = &cfg.traffic;
    let make = |id: u32, src: u32, dst: u32, rate: f64, rbw: f64, bytes: u32, start: f64, stop: Option<f64>| CbrFlow {
        id: FlowId(id),
        source: NodeId(src),
        destination: NodeId(dst),
        packet_bytes: bytes,
        rate_bps: rate,
        rbw_bps: rbw,
        rate_min_bps: p.congestion.rt_min_bps.min(rate),
        rate_max_bps: p.congestion.rt_max_bps.min(rate),
        start: SimTime::from_secs(start),
        stop: stop.map(SimTime::from_secs),
        state: FlowState::PendingAdmission,
        sent: 0,
    };
    if !cfg.flows.is_empty() {
        return cfg
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let rate = f.rate_bps.unwrap_or(t.rate_bps);
                let rbw = f.rbw_bps.or(t.rbw_bps).unwrap_or(rate);
                make(i as u32, f.source, f.destination, rate, rbw, f.packet_bytes.unwrap_or(t.packet_bytes), f.start_s, f.stop_s)
            })
            .collect();
    }
    let n = cfg.nodes.count as u64;
    (0..t.random_flows)
        .map(|i| {
            let src = rng.uniform_int(StreamLabel::Traffic, 0, n - 1);
            let mut dst = rng.uniform_int(StreamLabel::Traffic, 0, n - 2);
            if dst >= src {
                dst += 1;
            }
            let start = rng.uniform(StreamLabel::Traffic, t.start_min_s, t.start_max_s);
            let rbw = t.rbw_bps.unwrap_or(t.rate_bps);
            make(i, src as u32, dst as u32, t.rate_bps, rbw, t.packet_bytes, start, None)
        })
        .collect()
}

/// Builds, runs and finalizes one scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    Simulation::new(cfg).run()
}
