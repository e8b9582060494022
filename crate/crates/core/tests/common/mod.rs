#![allow(dead_code)]

use xlsim::config::{FlowConfig, MobilityModel, Protocol, ScenarioConfig};
use xlsim::engine::SimTime;
use xlsim::ids::{FlowId, NodeId};
use xlsim::mac::FrameKind;
use xlsim::packet::{DataPacket, Packet};
use xlsim::sim::{FrameRecord, Simulation};

/// Static nodes at the given points, no random traffic, baseline protocol.
pub fn static_scenario(points: &[(f64, f64)], sim_time_s: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario_id = "test".into();
    cfg.protocol = Protocol::AodvBaseline;
    cfg.sim_time_s = sim_time_s;
    cfg.nodes.count = points.len() as u32;
    cfg.nodes.positions = Some(points.iter().map(|&(x, y)| [x, y]).collect());
    cfg.mobility.model = MobilityModel::Static;
    cfg.traffic.random_flows = 0;
    cfg
}

/// Nodes on a horizontal line `spacing` meters apart.
pub fn chain(n: usize, spacing: f64, sim_time_s: f64) -> ScenarioConfig {
    let pts: Vec<(f64, f64)> = (0..n).map(|i| (50.0 + i as f64 * spacing, 250.0)).collect();
    static_scenario(&pts, sim_time_s)
}

pub fn flow(source: u32, destination: u32, start_s: f64) -> FlowConfig {
    FlowConfig {
        source,
        destination,
        rate_bps: None,
        rbw_bps: None,
        packet_bytes: None,
        start_s,
        stop_s: None,
    }
}

pub fn data(uid: u64, src: u32, dst: u32) -> Packet {
    Packet::Data(DataPacket {
        uid,
        flow: FlowId(0),
        src: NodeId(src),
        dst: NodeId(dst),
        payload_bytes: 512,
        created: SimTime::ZERO,
        source_rate_bps: 40960.0,
        ttl: 35,
    })
}

pub fn sim_with_log(cfg: &ScenarioConfig) -> Simulation {
    cfg.validate().expect("test scenario is valid");
    let mut sim = Simulation::new(cfg);
    sim.enable_frame_log();
    sim
}

/// Transmissions (not decodes) of `kind` by `from`.
pub fn sent_by(log: &[FrameRecord], from: u32, kind: FrameKind) -> Vec<&FrameRecord> {
    log.iter()
        .filter(|r| r.at.is_none() && r.from == NodeId(from) && r.kind == kind)
        .collect()
}

/// Transmissions carrying a packet with the given label.
pub fn carrying<'a>(log: &'a [FrameRecord], label: &str) -> Vec<&'a FrameRecord> {
    log.iter().filter(|r| r.at.is_none() && r.packet == Some(label)).collect()
}

/// Forces every toggle; the protocol label follows from the result.
pub fn with_features(mut cfg: ScenarioConfig, f: xlsim::config::Features) -> ScenarioConfig {
    cfg.protocol = Protocol::Mcba;
    cfg.features = xlsim::config::FeatureOverrides {
        link_filter: Some(f.link_filter),
        power_control: Some(f.power_control),
        congestion_control: Some(f.congestion_control),
        admission_control: Some(f.admission_control),
    };
    cfg
}

pub fn only_power_control(cfg: ScenarioConfig) -> ScenarioConfig {
    with_features(
        cfg,
        xlsim::config::Features { link_filter: false, power_control: true, congestion_control: false, admission_control: false },
    )
}

pub fn only_link_filter(cfg: ScenarioConfig) -> ScenarioConfig {
    with_features(
        cfg,
        xlsim::config::Features { link_filter: true, power_control: false, congestion_control: false, admission_control: false },
    )
}

/// Friis from first principles: Pt Gt Gr lambda^2 / (4 pi d)^2, in dBm.
pub fn friis_dbm(pt_w: f64, d: f64) -> f64 {
    let lambda = 299_792_458.0 / 914e6;
    let pr = pt_w * lambda * lambda / (4.0 * std::f64::consts::PI * d).powi(2);
    10.0 * (pr * 1000.0).log10()
}
