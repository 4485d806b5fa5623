use thiserror::Error;

/// Structural problems that make a [`crate::model::NetworkModel`] unusable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("network has no neurons")]
    Empty,
    #[error("edge {edge} refers to neuron {index}, but the network has {n} neurons")]
    IndexOutOfRange { edge: usize, index: usize, n: usize },
    #[error("self-edge on neuron {neuron}")]
    SelfEdge { neuron: usize },
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: usize, to: usize },
    #[error("alpha_total({neuron}) is zero: the neuron has no outflow")]
    ZeroOutflow { neuron: usize },
    #[error("invalid initial data: {0}")]
    InitialData(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NgmError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("power iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("closed form requires exactly 2 neurons, got {n}")]
    NotTwoNeurons { n: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("step {step} is invalid (must satisfy 0 < h <= {max})")]
    InvalidStep { step: f64, max: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("lookup at t = {t} is ahead of the integration front {front}")]
    Causality { t: f64, front: f64 },
    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ngm(#[from] NgmError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error("analysis window is empty")]
    EmptyWindow,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}
