//! Deterministic discrete-event simulator for mobile ad hoc networks with
//! cross-layer link filtering, power control, congestion control and
//! admission control layered over AODV and 802.11 DCF.

pub mod config;
pub mod crosslayer;
pub mod energy;
pub mod engine;
pub mod ids;
pub mod mac;
pub mod manifest;
pub mod metrics;
pub mod mobility;
pub mod packet;
pub mod phy;
pub mod report;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod sweep;
pub mod traffic;
