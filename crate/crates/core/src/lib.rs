//! Tabular-MDP policy optimization under the Hadamard parameterization.
//!
//! The crate is organized in four layers:
//!
//! - [`mdp`]: the finite-MDP data model with exact policy evaluation,
//!   visitation distributions and Bellman-optimality solving. Everything
//!   downstream treats these as oracles.
//! - [`hadamard`]: the sphere-constrained policy-gradient update, its
//!   projection-free normalized equivalent, the closed-form one-step policy
//!   delta, and the trace-recording run loop.
//! - [`baselines`]: softmax PG and NPG steppers plus the native single-state
//!   bandit update rules used in the comparison experiment.
//! - [`analysis`]: the convergence constants (g, M₁, k₀, ρ, c) and an
//!   auditor that replays every guaranteed inequality against a recorded
//!   trace.
//!
//! All types are immutable after construction and every operation is a pure
//! function, so values can be shared and calls parallelized freely.

pub mod analysis;
pub mod baselines;
pub mod hadamard;
pub mod mdp;

pub use analysis::{audit, compute_constants, estimate_lambda, AuditReport, TheoremConstants};
pub use hadamard::{
    hadamard_step, normalized_step, policy_delta, riemannian_gradient, run, FreeParams, RunTrace,
    SphereParams, StepConfig,
};
pub use mdp::{
    b_gap, performance_difference, policy_evaluation, solve_optimal, validate_mdp, MdpError,
    OptimalBundle, Policy, RawMdp, TabularMdp, ValueBundle,
};
