//! Simplified IEEE 802.11 DCF: RTS/CTS/DATA/ACK, backoff, MAC overhead
//! measurement and bandwidth-carrying Hello messages.

pub mod dcf;
pub mod frame;
pub mod hello;
pub mod timing;

pub use dcf::{Dcf, Outcome, Phase, QueuedPacket};
pub use frame::{Frame, FrameKind, MAC_HEADER_BITS};
pub use hello::{HelloEntry, HelloPayload, NeighborRecord, NeighborTable};
pub use timing::{channel_occupation, ContentionWindowStats, MacTiming};
