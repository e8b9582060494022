use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::packet::Packet;

/// 802.11 data-frame MAC header plus FCS.
pub const MAC_HEADER_BITS: u32 = 224;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Rts,
    Cts,
    Data,
    Ack,
}

/// One MAC frame on the air. Every frame carries the power it was sent at;
/// RTS, CTS and DATA may also carry the power the exchange should use.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    /// `None` for broadcast data frames.
    pub dst: Option<NodeId>,
    pub tx_power_dbm: f64,
    pub p_tmin_request: Option<f64>,
    pub bits: u32,
    /// Remaining duration of the exchange after this frame ends.
    pub nav: SimTime,
    pub mac_seq: u32,
    pub packet: Option<Packet>,
}

impl Frame {
    pub fn is_broadcast(&self) -> bool {
        self.dst.is_none()
    }

    pub fn data_bits(packet: &Packet) -> u32 {
        packet.bits() + MAC_HEADER_BITS
    }
}
