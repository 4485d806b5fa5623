//! Delayed prion-spread dynamics on networks of neurons.
//!
//! Each neuron carries healthy (`x`) and misfolded (`y`) protein. Misfolded
//! protein feeds back on production after a delay and leaks along directed
//! edges to neighbours. The crate computes the basic reproduction number
//! from the next-generation matrix, finds equilibria, integrates the delay
//! system and runs coupling sweeps.

pub mod analysis;
pub mod config;
pub mod dde;
pub mod error;
pub mod model;
pub mod ngm;

pub use error::{AnalysisError, DdeError, ModelError, NgmError};
pub use model::{
    Edge, EdgeSelection, Feedback, HillResponse, InitialData, NetworkModel, NeuronParams, Violation,
};
