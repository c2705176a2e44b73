//! Drift-plus-penalty control of a multiuser uplink carrying open and
//! private traffic over block-fading channels with incremental-redundancy
//! HARQ.
//!
//! * [`channel`]: gain sampling and achievable-rate kernels
//! * [`harq`]: mutual-information accumulation, decoding and privacy outage
//! * [`queues`]: data and virtual queue recursions
//! * [`control`]: flow control and opportunistic scheduling
//! * [`sim`]: the per-block loop and its summary metrics

pub mod channel;
pub mod control;
pub mod error;
pub mod harq;
pub mod queues;
pub mod sim;

pub use error::{Error, Result};
