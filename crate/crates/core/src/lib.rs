//! Core library: geometry and channel model, the coordination-based MAC
//! protocol, 802.11 DCF/PSM baselines, the contention-phase analytic model,
//! and the deterministic discrete-event engine that drives them.

pub mod baselines;
pub mod channel;
pub mod contention;
pub mod engine;
pub mod geometry;
pub mod pmac;
pub mod rng;

pub use channel::{ChannelModel, NodeId, TransmissionVector};
pub use geometry::{CellId, HexCellMap, Position};
