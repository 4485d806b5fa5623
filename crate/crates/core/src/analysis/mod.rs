//! Equilibria, long-run classification and parameter sweeps.

pub mod asymptotics;
pub mod equilibrium;
pub mod sweep;

pub use asymptotics::{
    classify, classify_until, persistence_floor, AsymptoticsReport, Classification, ClassifyOptions,
};
pub use equilibrium::{
    disease_free_equilibrium, ee_box, endemic_equilibrium, equilibrium_residual, recover_x,
    reduced_residual, EeBox, EquilibriumKind, EquilibriumOptions, EquilibriumResult,
};
pub use sweep::{kappa_sweep, Onset, SweepOptions, SweepPoint, SweepResult};
