//! Clocked spiking neural network simulation: spike encoders, LIF and
//! resonate-and-fire neurons, projections, a synchronous engine, spike
//! statistics, calibrated experiment presets, and an HTTP service.

pub mod analysis;
pub mod cli;
pub mod connectivity;
pub mod diagnostics;
pub mod encoders;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod neurons;
pub mod rng;
pub mod server;
pub mod spike_train;

pub use error::{Result, SnnError};
