//! Discrete-event simulation of impulse-radio UWB sensor networks running
//! ALOHA-family MACs with ARQ over a reduced AODV, with a narrowband
//! OQPSK/CSMA baseline.
//!
//! [`sim::World`] wires the layers together; [`experiment`] runs parameter
//! sweeps described by [`config`] files.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod experiment;
pub mod frame;
pub mod mac;
pub mod metrics;
pub mod radio;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod stats;
