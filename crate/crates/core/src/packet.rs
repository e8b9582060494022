//! Network-layer packets carried inside MAC data frames.

use crate::engine::SimTime;
use crate::ids::{FlowId, NodeId};
use crate::mac::hello::HelloPayload;

pub const IP_HEADER_BYTES: u32 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct DataPacket {
    /// Unique per originated packet; copies made by MAC retransmission share it.
    pub uid: u64,
    pub flow: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload_bytes: u32,
    pub created: SimTime,
    /// Source's sending rate when the packet was emitted.
    pub source_rate_bps: f64,
    pub ttl: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rreq {
    pub origin: NodeId,
    pub origin_seq: u32,
    pub rreq_id: u32,
    pub dest: NodeId,
    pub dest_seq: Option<u32>,
    pub hop_count: u8,
    pub ttl: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rrep {
    /// Node that asked for the route; the reply travels back to it.
    pub origin: NodeId,
    pub dest: NodeId,
    pub dest_seq: u32,
    pub hop_count: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rerr {
    pub unreachable: Vec<(NodeId, u32)>,
}

/// End-to-end admission probe. On the way out it collects the minimum
/// feasible bandwidth along the route; the destination echoes it back.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub flow: FlowId,
    pub origin: NodeId,
    pub dest: NodeId,
    pub rbw_bps: f64,
    pub min_fbw_bps: f64,
    pub echo: bool,
}

/// Rate feedback from a congested node to a flow's source.
#[derive(Clone, Debug, PartialEq)]
pub struct CongestionNotice {
    pub flow: FlowId,
    pub source: NodeId,
    pub reporter: NodeId,
    pub delta_bps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Packet {
    Data(DataPacket),
    Rreq(Rreq),
    Rrep(Rrep),
    Rerr(Rerr),
    Hello(HelloPayload),
    Probe(Probe),
    Notice(CongestionNotice),
}

impl Packet {
    pub fn bytes(&self) -> u32 {
        IP_HEADER_BYTES
            + match self {
                Packet::Data(d) => d.payload_bytes,
                Packet::Rreq(_) => 24,
                Packet::Rrep(_) => 20,
                Packet::Rerr(e) => 4 + 8 * e.unreachable.len() as u32,
                Packet::Hello(h) => h.bytes(),
                Packet::Probe(_) => 24,
                Packet::Notice(_) => 20,
            }
    }

    pub fn bits(&self) -> u32 {
        self.bytes() * 8
    }

    pub fn is_data(&self) -> bool {
        matches!(self, Packet::Data(_))
    }

    /// Final destination for unicast packets; `None` for link-local broadcasts.
    pub fn destination(&self) -> Option<NodeId> {
        match self {
            Packet::Data(d) => Some(d.dst),
            Packet::Rrep(r) => Some(r.origin),
            Packet::Probe(p) => Some(if p.echo { p.origin } else { p.dest }),
            Packet::Notice(n) => Some(n.source),
            Packet::Rreq(_) | Packet::Rerr(_) | Packet::Hello(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Packet::Data(_) => "data",
            Packet::Rreq(_) => "rreq",
            Packet::Rrep(_) => "rrep",
            Packet::Rerr(_) => "rerr",
            Packet::Hello(_) => "hello",
            Packet::Probe(_) => "probe",
            Packet::Notice(_) => "notice",
        }
    }
}
