//! Approximate message passing for compressed sensing, with the state
//! evolution machinery that predicts where it succeeds.

pub mod diagnostics;
pub mod error;
pub mod gauss;
pub mod io;
pub mod minimax;
pub mod operators;
pub mod optimize;
pub mod phasediag;
pub mod quadrature;
pub mod rng;
pub mod solvers;
pub mod state_evolution;
pub mod thresholds;

pub use error::{Error, Result};
pub use operators::{
    build_operator, gen_instance, gen_signal, Amplitude, CoefficientSpec, EnsembleKind, EnsembleSpec, InstanceSpec,
    LinearOperator, ProblemInstance,
};
pub use state_evolution::{PriorShape, Region, SEParams, SignalPrior};
pub use thresholds::{eta, eta_prime, scalar_risk, Case, ThresholdParams};
