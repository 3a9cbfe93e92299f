//! Cycle-accurate mesh network-on-chip simulator with table-driven dynamic
//! virtual channels over a unified per-port buffer.
//!
//! The crate is layered bottom-up: [`flit`] and [`arbiter`] are leaf types,
//! [`ubs`] and [`vc_control`] make up a router input port, [`allocator`] and
//! [`router`] form the pipeline, [`mesh`] and [`sim`] drive whole networks,
//! and [`experiment`] runs sweeps and comparisons on top.

pub mod allocator;
pub mod arbiter;
pub mod config;
pub mod error;
pub mod experiment;
pub mod flit;
pub mod mesh;
pub mod metrics;
pub mod router;
pub mod sim;
pub mod traffic;
pub mod ubs;
pub mod vc_control;

pub use config::{parse_config, SimConfig};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use sim::Simulation;
