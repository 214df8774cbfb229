//! Fixtures shared by the benchmarks.

use ampcs_core::{gen_instance, Amplitude, Case, EnsembleKind, InstanceSpec, ProblemInstance};

/// A signed-case instance at `delta = 0.5`, `rho = 0.2`.
pub fn instance(ensemble: EnsembleKind, dim: usize) -> ProblemInstance {
    gen_instance(&InstanceSpec {
        delta: 0.5,
        rho: 0.2,
        dim,
        ensemble,
        amplitude: Amplitude::Unit,
        case: Case::Signed,
        seed: 1,
    })
    .expect("valid bench instance")
}
