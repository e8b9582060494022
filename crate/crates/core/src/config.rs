//! Scenario and sweep files (TOML) with defaults and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crosslayer::{AdmissionParams, CongestionParams, FbwMode};
use crate::energy::EnergyParams;
use crate::mac::MacTiming;
use crate::mobility::Area;
use crate::phy::{self, RadioParams};
use crate::rng::derive_seed;
use crate::routing::AodvParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Mcba,
    AodvBaseline,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Mcba => "mcba",
            Protocol::AodvBaseline => "aodv-baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        match s {
            "mcba" => Some(Protocol::Mcba),
            "aodv-baseline" | "aodv" => Some(Protocol::AodvBaseline),
            _ => None,
        }
    }
}

/// Effective cross-layer toggles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Features {
    pub link_filter: bool,
    pub power_control: bool,
    pub congestion_control: bool,
    pub admission_control: bool,
}

impl Features {
    pub fn all(on: bool) -> Self {
        Features { link_filter: on, power_control: on, congestion_control: on, admission_control: on }
    }

    /// Row label: `mcba` with every toggle on, `aodv-baseline` with none,
    /// otherwise `mcba+` followed by the enabled toggles.
    pub fn label(&self) -> String {
        if *self == Features::all(true) {
            return "mcba".into();
        }
        if *self == Features::all(false) {
            return "aodv-baseline".into();
        }
        let mut parts = vec!["mcba"];
        for (on, name) in [
            (self.link_filter, "link_filter"),
            (self.power_control, "power_control"),
            (self.congestion_control, "congestion_control"),
            (self.admission_control, "admission_control"),
        ] {
            if on {
                parts.push(name);
            }
        }
        parts.join("+")
    }
}

/// Per-toggle overrides applied on top of the protocol's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_filter: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_control: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub congestion_control: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admission_control: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        AreaConfig { width_m: 1500.0, height_m: 500.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodesConfig {
    pub count: u32,
    /// Fixed initial positions; drawn uniformly over the area when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl Default for NodesConfig {
    fn default() -> Self {
        NodesConfig { count: 50, positions: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityModel {
    RandomWaypoint,
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub model: MobilityModel,
    pub speed_mps: f64,
    pub pause_s: f64,
    /// When set, each leg's speed is uniform in `[min_speed_mps, speed_mps]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_speed_mps: Option<f64>,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig { model: MobilityModel::RandomWaypoint, speed_mps: 5.0, pause_s: 10.0, min_speed_mps: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub wavelength_m: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub max_tx_power_w: f64,
    pub min_tx_power_dbm: f64,
    /// Decode range at full power; sets the reception threshold.
    pub range_m: f64,
    /// Carrier-sense range at full power.
    pub carrier_sense_range_m: f64,
    pub channel_rate_bps: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            wavelength_m: phy::wavelength_for(phy::DEFAULT_FREQUENCY_HZ),
            tx_gain: 1.0,
            rx_gain: 1.0,
            max_tx_power_w: phy::DEFAULT_MAX_TX_W,
            min_tx_power_dbm: 0.0,
            range_m: phy::DEFAULT_RANGE_M,
            carrier_sense_range_m: phy::DEFAULT_CS_RANGE_M,
            channel_rate_bps: 2e6,
        }
    }
}

impl RadioConfig {
    pub fn params(&self) -> RadioParams {
        let mut p = RadioParams {
            wavelength_m: self.wavelength_m,
            tx_gain: self.tx_gain,
            rx_gain: self.rx_gain,
            rx_threshold_dbm: 0.0,
            carrier_sense_dbm: 0.0,
            max_tx_dbm: phy::watts_to_dbm(self.max_tx_power_w),
            min_tx_dbm: self.min_tx_power_dbm,
            channel_rate_bps: self.channel_rate_bps,
        };
        p.rx_threshold_dbm = phy::received_power(p.max_tx_dbm, self.range_m, &p);
        p.carrier_sense_dbm = phy::received_power(p.max_tx_dbm, self.carrier_sense_range_m, &p);
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub initial_j: f64,
    pub rx_w: f64,
    pub tx_w: f64,
    pub idle_w: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        let e = EnergyParams::default();
        EnergyConfig { initial_j: e.initial_j, rx_w: e.rx_w, tx_w: e.tx_w, idle_w: e.idle_w }
    }
}

impl EnergyConfig {
    pub fn params(&self) -> EnergyParams {
        EnergyParams { initial_j: self.initial_j, rx_w: self.rx_w, tx_w: self.tx_w, idle_w: self.idle_w }
    }
}

/// Power used for RTS frames when power control is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RtsPower {
    /// Same reduced power as the data frame.
    PTmin,
    /// Always full power so every exposed node hears the reservation.
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub sifs_us: f64,
    pub difs_us: f64,
    pub slot_us: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub queue_limit: usize,
    pub rts_bits: u32,
    pub cts_bits: u32,
    pub ack_bits: u32,
    pub rts_power: RtsPower,
}

impl Default for MacConfig {
    fn default() -> Self {
        let t = MacTiming::default();
        MacConfig {
            sifs_us: t.sifs_s * 1e6,
            difs_us: t.difs_s * 1e6,
            slot_us: t.slot_s * 1e6,
            cw_min: t.cw_min,
            cw_max: t.cw_max,
            retry_limit: 4,
            queue_limit: 50,
            rts_bits: t.rts_bits,
            cts_bits: t.cts_bits,
            ack_bits: t.ack_bits,
            rts_power: RtsPower::PTmin,
        }
    }
}

impl MacConfig {
    pub fn timing(&self, channel_rate_bps: f64) -> MacTiming {
        MacTiming {
            sifs_s: self.sifs_us * 1e-6,
            difs_s: self.difs_us * 1e-6,
            slot_s: self.slot_us * 1e-6,
            cw_min: self.cw_min,
            cw_max: self.cw_max,
            control_rate_bps: channel_rate_bps,
            rts_bits: self.rts_bits,
            cts_bits: self.cts_bits,
            ack_bits: self.ack_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AodvConfig {
    pub active_route_timeout_s: f64,
    pub net_traversal_time_s: f64,
    pub rreq_retries: u32,
    pub buffer_limit: usize,
    pub ttl: u8,
}

impl Default for AodvConfig {
    fn default() -> Self {
        let a = AodvParams::default();
        AodvConfig {
            active_route_timeout_s: a.active_route_timeout_s,
            net_traversal_time_s: a.net_traversal_time_s,
            rreq_retries: a.rreq_retries,
            buffer_limit: a.buffer_limit,
            ttl: a.ttl,
        }
    }
}

impl AodvConfig {
    pub fn params(&self) -> AodvParams {
        AodvParams {
            active_route_timeout_s: self.active_route_timeout_s,
            net_traversal_time_s: self.net_traversal_time_s,
            rreq_retries: self.rreq_retries,
            buffer_limit: self.buffer_limit,
            ttl: self.ttl,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossLayerConfig {
    pub window_s: f64,
    pub t_rh_s: f64,
    /// Safety factor on the minimum transmit power.
    pub k: f64,
    /// Headroom above the reception threshold for a link to be kept.
    pub rss_margin_db: f64,
    pub weight: f64,
    pub min_bw_bps: f64,
    pub max_bw_bps: f64,
    pub fbw_mode: FbwMode,
    pub hello_interval_s: f64,
    pub rt_min_bps: f64,
    pub rt_max_bps: f64,
    pub hysteresis: f64,
    pub count_hello_as_control: bool,
}

impl Default for CrossLayerConfig {
    fn default() -> Self {
        let c = CongestionParams::default();
        let a = AdmissionParams::default();
        CrossLayerConfig {
            window_s: c.window_s,
            t_rh_s: c.t_rh_s,
            k: 1.0,
            rss_margin_db: 10.0,
            weight: a.weight,
            min_bw_bps: a.min_bw_bps,
            max_bw_bps: a.max_bw_bps,
            fbw_mode: a.fbw_mode,
            hello_interval_s: 0.5,
            rt_min_bps: c.rt_min_bps,
            rt_max_bps: c.rt_max_bps,
            hysteresis: c.hysteresis,
            count_hello_as_control: true,
        }
    }
}

impl CrossLayerConfig {
    pub fn congestion(&self) -> CongestionParams {
        CongestionParams {
            t_rh_s: self.t_rh_s,
            window_s: self.window_s,
            rt_min_bps: self.rt_min_bps,
            rt_max_bps: self.rt_max_bps,
            hysteresis: self.hysteresis,
        }
    }

    pub fn admission(&self, channel_bps: f64) -> AdmissionParams {
        AdmissionParams {
            channel_bps,
            weight: self.weight,
            min_bw_bps: self.min_bw_bps,
            max_bw_bps: self.max_bw_bps,
            fbw_mode: self.fbw_mode,
        }
    }
}

/// Randomly generated CBR flows, used when no explicit `[[flows]]` exist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub random_flows: u32,
    pub rate_bps: f64,
    /// Requested bandwidth for admission; the rate when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rbw_bps: Option<f64>,
    pub packet_bytes: u32,
    pub start_min_s: f64,
    pub start_max_s: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            random_flows: 10,
            rate_bps: 40_960.0,
            rbw_bps: None,
            packet_bytes: 512,
            start_min_s: 1.0,
            start_max_s: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub source: u32,
    pub destination: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rbw_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_bytes: Option<u32>,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Time-series sampling period; zero disables sampling.
    pub sample_interval_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub seed: u64,
    pub sim_time_s: f64,
    pub protocol: Protocol,
    pub features: FeatureOverrides,
    pub area: AreaConfig,
    pub nodes: NodesConfig,
    pub mobility: MobilityConfig,
    pub radio: RadioConfig,
    pub energy: EnergyConfig,
    pub mac: MacConfig,
    pub aodv: AodvConfig,
    pub crosslayer: CrossLayerConfig,
    pub traffic: TrafficConfig,
    pub metrics: MetricsConfig,
    pub flows: Vec<FlowConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario_id: "default".into(),
            seed: 1,
            sim_time_s: 100.0,
            protocol: Protocol::Mcba,
            features: FeatureOverrides::default(),
            area: AreaConfig::default(),
            nodes: NodesConfig::default(),
            mobility: MobilityConfig::default(),
            radio: RadioConfig::default(),
            energy: EnergyConfig::default(),
            mac: MacConfig::default(),
            aodv: AodvConfig::default(),
            crosslayer: CrossLayerConfig::default(),
            traffic: TrafficConfig::default(),
            metrics: MetricsConfig::default(),
            flows: Vec::new(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn features(&self) -> Features {
        let base = Features::all(self.protocol == Protocol::Mcba);
        let o = &self.features;
        Features {
            link_filter: o.link_filter.unwrap_or(base.link_filter),
            power_control: o.power_control.unwrap_or(base.power_control),
            congestion_control: o.congestion_control.unwrap_or(base.congestion_control),
            admission_control: o.admission_control.unwrap_or(base.admission_control),
        }
    }

    pub fn area(&self) -> Area {
        Area { width_m: self.area.width_m, height_m: self.area.height_m }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("sim_time_s", self.sim_time_s)?;
        positive("area.width_m", self.area.width_m)?;
        positive("area.height_m", self.area.height_m)?;
        if self.nodes.count < 2 {
            return Err(invalid("nodes.count", format!("at least 2 nodes required, got {}", self.nodes.count)));
        }
        if let Some(pos) = &self.nodes.positions {
            if pos.len() != self.nodes.count as usize {
                return Err(invalid(
                    "nodes.positions",
                    format!("{} positions given for {} nodes", pos.len(), self.nodes.count),
                ));
            }
            let area = self.area();
            for (i, p) in pos.iter().enumerate() {
                if !area.contains(crate::mobility::Position::new(p[0], p[1])) {
                    return Err(invalid("nodes.positions", format!("node {i} at ({}, {}) is outside the area", p[0], p[1])));
                }
            }
        }
        positive("mobility.speed_mps", self.mobility.speed_mps)?;
        non_negative("mobility.pause_s", self.mobility.pause_s)?;
        if let Some(lo) = self.mobility.min_speed_mps {
            positive("mobility.min_speed_mps", lo)?;
            if lo > self.mobility.speed_mps {
                return Err(invalid("mobility.min_speed_mps", "exceeds mobility.speed_mps"));
            }
        }

        let r = &self.radio;
        positive("radio.wavelength_m", r.wavelength_m)?;
        positive("radio.tx_gain", r.tx_gain)?;
        positive("radio.rx_gain", r.rx_gain)?;
        positive("radio.max_tx_power_w", r.max_tx_power_w)?;
        positive("radio.range_m", r.range_m)?;
        positive("radio.carrier_sense_range_m", r.carrier_sense_range_m)?;
        positive("radio.channel_rate_bps", r.channel_rate_bps)?;
        if r.carrier_sense_range_m < r.range_m {
            return Err(invalid("radio.carrier_sense_range_m", "must be at least radio.range_m"));
        }
        if !r.min_tx_power_dbm.is_finite() || r.min_tx_power_dbm > phy::watts_to_dbm(r.max_tx_power_w) {
            return Err(invalid("radio.min_tx_power_dbm", "must not exceed the maximum transmit power"));
        }

        let e = &self.energy;
        positive("energy.initial_j", e.initial_j)?;
        non_negative("energy.rx_w", e.rx_w)?;
        non_negative("energy.tx_w", e.tx_w)?;
        non_negative("energy.idle_w", e.idle_w)?;
        if e.tx_w < e.idle_w {
            return Err(invalid("energy.tx_w", "must be at least energy.idle_w"));
        }

        let m = &self.mac;
        positive("mac.sifs_us", m.sifs_us)?;
        positive("mac.difs_us", m.difs_us)?;
        positive("mac.slot_us", m.slot_us)?;
        if m.cw_min == 0 || m.cw_max < m.cw_min {
            return Err(invalid("mac.cw_max", "need 0 < mac.cw_min <= mac.cw_max"));
        }
        if m.retry_limit == 0 {
            return Err(invalid("mac.retry_limit", "must be at least 1"));
        }
        if m.queue_limit == 0 {
            return Err(invalid("mac.queue_limit", "must be at least 1"));
        }
        for (f, v) in [("mac.rts_bits", m.rts_bits), ("mac.cts_bits", m.cts_bits), ("mac.ack_bits", m.ack_bits)] {
            if v == 0 {
                return Err(invalid(f, "must be positive"));
            }
        }

        let a = &self.aodv;
        positive("aodv.active_route_timeout_s", a.active_route_timeout_s)?;
        positive("aodv.net_traversal_time_s", a.net_traversal_time_s)?;
        if a.ttl == 0 {
            return Err(invalid("aodv.ttl", "must be at least 1"));
        }

        let c = &self.crosslayer;
        positive("crosslayer.window_s", c.window_s)?;
        positive("crosslayer.t_rh_s", c.t_rh_s)?;
        positive("crosslayer.k", c.k)?;
        non_negative("crosslayer.rss_margin_db", c.rss_margin_db)?;
        positive("crosslayer.weight", c.weight)?;
        non_negative("crosslayer.min_bw_bps", c.min_bw_bps)?;
        positive("crosslayer.max_bw_bps", c.max_bw_bps)?;
        if c.min_bw_bps > c.max_bw_bps {
            return Err(invalid("crosslayer.min_bw_bps", "exceeds crosslayer.max_bw_bps"));
        }
        positive("crosslayer.hello_interval_s", c.hello_interval_s)?;
        positive("crosslayer.rt_min_bps", c.rt_min_bps)?;
        positive("crosslayer.rt_max_bps", c.rt_max_bps)?;
        if c.rt_min_bps > c.rt_max_bps {
            return Err(invalid("crosslayer.rt_min_bps", "exceeds crosslayer.rt_max_bps"));
        }
        non_negative("crosslayer.hysteresis", c.hysteresis)?;

        let t = &self.traffic;
        positive("traffic.rate_bps", t.rate_bps)?;
        if let Some(rbw) = t.rbw_bps {
            positive("traffic.rbw_bps", rbw)?;
        }
        if t.packet_bytes == 0 {
            return Err(invalid("traffic.packet_bytes", "must be positive"));
        }
        non_negative("traffic.start_min_s", t.start_min_s)?;
        if t.start_max_s < t.start_min_s {
            return Err(invalid("traffic.start_max_s", "must be at least traffic.start_min_s"));
        }

        for (i, f) in self.flows.iter().enumerate() {
            let field = |k: &str| format!("flows[{i}].{k}");
            for (k, id) in [("source", f.source), ("destination", f.destination)] {
                if id >= self.nodes.count {
                    return Err(invalid(field(k), format!("node {id} does not exist ({} nodes)", self.nodes.count)));
                }
            }
            if f.source == f.destination {
                return Err(invalid(field("destination"), "equals the source"));
            }
            if let Some(v) = f.rate_bps {
                positive(&field("rate_bps"), v)?;
            }
            if let Some(v) = f.rbw_bps {
                positive(&field("rbw_bps"), v)?;
            }
            if f.packet_bytes == Some(0) {
                return Err(invalid(field("packet_bytes"), "must be positive"));
            }
            non_negative(&field("start_s"), f.start_s)?;
            if let Some(stop) = f.stop_s {
                if stop <= f.start_s {
                    return Err(invalid(field("stop_s"), "must be after start_s"));
                }
            }
        }
        non_negative("metrics.sample_interval_s", self.metrics.sample_interval_s)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Nodes,
    Pause,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Nodes => "nodes",
            SweepParameter::Pause => "pause",
        }
    }
}

fn both_protocols() -> Vec<Protocol> {
    vec![Protocol::Mcba, Protocol::AodvBaseline]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "both_protocols")]
    pub protocols: Vec<Protocol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub sweep: SweepAxis,
}

/// One resolved sweep cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub seed_entry: u64,
    pub protocol: Protocol,
    pub config: ScenarioConfig,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sweep.values.is_empty() {
            return Err(invalid("sweep.values", "must not be empty"));
        }
        if self.sweep.seeds.is_empty() {
            return Err(invalid("sweep.seeds", "must not be empty"));
        }
        if self.sweep.protocols.is_empty() {
            return Err(invalid("sweep.protocols", "must not be empty"));
        }
        self.cells().map(|_| ())
    }

    /// Cells in (value, seed, protocol) order, each validated.
    pub fn cells(&self) -> Result<Vec<SweepCell>, ConfigError> {
        let mut out = Vec::new();
        for &value in &self.sweep.values {
            for &seed_entry in &self.sweep.seeds {
                for &protocol in &self.sweep.protocols {
                    let mut cfg = self.scenario.clone();
                    match self.sweep.parameter {
                        SweepParameter::Nodes => {
                            if value.fract() != 0.0 || value < 2.0 {
                                return Err(invalid("sweep.values", format!("node count {value} is not an integer >= 2")));
                            }
                            cfg.nodes.count = value as u32;
                        }
                        SweepParameter::Pause => cfg.mobility.pause_s = value,
                    }
                    cfg.protocol = protocol;
                    cfg.seed = cell_seed(self.scenario.seed, self.sweep.parameter, value, seed_entry);
                    cfg.validate().map_err(|e| {
                        invalid(
                            "sweep",
                            format!("cell {}={value} seed={seed_entry} {}: {e}", self.sweep.parameter.name(), protocol.name()),
                        )
                    })?;
                    out.push(SweepCell { value, seed_entry, protocol, config: cfg });
                }
            }
        }
        Ok(out)
    }
}

/// Per-cell seed from the master seed, the swept value and the seed entry.
/// The protocol is left out so both protocols see the same topology,
/// mobility and traffic for a given cell.
pub fn cell_seed(master: u64, parameter: SweepParameter, value: f64, seed_entry: u64) -> u64 {
    derive_seed(master, &format!("cell/{}/{:016x}/{seed_entry}", parameter.name(), value.to_bits()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.nodes.count, 50);
        assert_eq!((c.area.width_m, c.area.height_m), (1500.0, 500.0));
        assert_eq!(c.sim_time_s, 100.0);
        assert_eq!(c.radio.range_m, 250.0);
        assert_eq!(c.traffic.packet_bytes, 512);
        assert_eq!(c.mobility.speed_mps, 5.0);
        assert_eq!(c.mobility.pause_s, 10.0);
        assert_eq!((c.energy.rx_w, c.energy.tx_w, c.energy.idle_w), (0.395, 0.660, 0.035));
        assert_eq!(c.energy.initial_j, 4.7);
        assert_eq!(c.radio.channel_rate_bps, 2e6);
        assert_eq!(c.features(), Features::all(true));
    }

    #[test]
    fn single_node_rejected_by_name() {
        let err = ScenarioConfig::from_toml_str("[nodes]\ncount = 1\n").unwrap_err();
        assert!(err.to_string().contains("nodes.count"), "{err}");
    }

    #[test]
    fn flow_to_missing_node() {
        let err = ScenarioConfig::from_toml_str("[[flows]]\nsource = 0\ndestination = 99\n").unwrap_err();
        assert!(err.to_string().contains("flows[0].destination"), "{err}");
    }

    #[test]
    fn unknown_key_names_line_and_key() {
        let err = ScenarioConfig::from_toml_str("[radio]\nwavelenght_m = 0.3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("wavelenght_m") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn toggles_override_protocol() {
        let c = ScenarioConfig::from_toml_str("protocol = \"aodv-baseline\"\n[features]\npower_control = true\n").unwrap();
        let f = c.features();
        assert!(f.power_control && !f.link_filter);
        assert_eq!(f.label(), "mcba+power_control");
        let c = ScenarioConfig::from_toml_str(
            "[features]\nlink_filter = false\npower_control = false\ncongestion_control = false\nadmission_control = false\n",
        )
        .unwrap();
        assert_eq!(c.features().label(), "aodv-baseline");
    }

    #[test]
    fn serialized_config_reloads() {
        let mut c = ScenarioConfig::default();
        c.flows.push(FlowConfig {
            source: 0,
            destination: 3,
            rate_bps: Some(1e4),
            rbw_bps: None,
            packet_bytes: None,
            start_s: 1.0,
            stop_s: None,
        });
        let back = ScenarioConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sweep_cell_count_and_seeds() {
        let spec = SweepSpec::from_toml_str(
            "[scenario]\nsim_time_s = 10\n[sweep]\nparameter = \"nodes\"\nvalues = [25, 50]\nseeds = [1, 2, 3]\n",
        )
        .unwrap();
        let cells = spec.cells().unwrap();
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[0].config.seed, cells[1].config.seed);
        assert_ne!(cells[0].config.seed, cells[2].config.seed);
        assert_eq!(cells[0].config.nodes.count, 25);
        assert_eq!(cells[11].config.nodes.count, 50);
    }

    #[test]
    fn empty_sweep_rejected() {
        let err = SweepSpec::from_toml_str("[sweep]\nparameter = \"pause\"\nvalues = []\nseeds = [1]\n").unwrap_err();
        assert!(err.to_string().contains("sweep.values"));
    }
}
