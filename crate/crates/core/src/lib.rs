//! Siting and sizing of a data-center DG injection on a radial distribution feeder.
//!
//! The pipeline: [`network`] holds the feeder, [`powerflow`] solves it by
//! backward/forward sweep, [`metrics`] and [`economics`] score the result,
//! [`objective`] folds the scores into one normalized weighted value, [`ga`]
//! searches (bus, size) for its minimum and [`scenario`] repeats that search
//! under several weightings until the bus decision settles.

pub mod cli;
pub mod config;
pub mod economics;
pub mod error;
pub mod ga;
pub mod ieee33;
pub mod metrics;
pub mod network;
pub mod objective;
pub mod powerflow;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
pub use network::{BusId, NetworkModel};
pub use objective::{CandidateSolution, Problem, WeightVector};
