//! On-demand distance-vector routing with signal-strength link filtering and
//! per-next-hop minimum transmit power.

pub mod power;
pub mod table;

pub use power::{link_quality_filter, min_tx_power, path_loss, LinkVerdict, PathLoss};
pub use table::{AodvParams, PendingBuffer, RouteEntry, RouteOffer, RouteTable, RreqCache};
