//! Simulation of open quantum system dynamics with projection superoperator
//! techniques: product-state and correlated projections, time-convolutionless
//! (second and fourth order) and Nakajima-Zwanzig (second order) expansions,
//! Lindblad semigroups, and the generalized Lindblad equation on an extended
//! block space — validated against exact propagation of small composite
//! systems.

pub mod error;
pub mod operator;
pub mod projections;
pub mod random;
pub mod superop;

pub use error::{Error, Result};
pub use operator::{
    check_density, expm_hermitian_phase, hs_inner, partial_trace_env, tensor, trace_distance,
    DensityMatrix, HilbertSpace, Operator, Tolerances,
};
pub use projections::{CorrelatedProjection, ProductProjection, ValidatedProjection};
pub use superop::{
    interaction_hamiltonian, liouvillian, time_ordered_exp, InteractionPicture, SuperOperator,
    TimeDependentSuperOperator,
};
