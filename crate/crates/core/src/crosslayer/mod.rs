//! Congestion control (MAC overhead to application rate) and admission
//! control (Hello-distributed bandwidth to flow admission).

pub mod admission;
pub mod congestion;

pub use admission::{
    admit_flow, feasible_bandwidth, probe_verdict, AdmissionDecision, AdmissionParams,
    BandwidthBook, FbwMode,
};
pub use congestion::{adjust_rate, apportion, channel_resource_delta, exceeds_hysteresis, CongestionParams};
