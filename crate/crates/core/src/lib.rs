//! Bayesian optimization for sequential budgeted resource allocation.
//!
//! At every step a budget must be split over `m` arms; the reward of a split
//! is a noisy black box. The crate provides three GP-UCB allocators (one on
//! raw allocations, two on the probability simplex with a squared-exponential
//! or Wasserstein kernel), an optimistic semi-bandit baseline, simulated
//! environments, and an experiment harness producing CSV traces and SVG
//! charts.

// `!(x > 0.0)` style checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod environments;
pub mod error;
pub mod gp;
pub mod harness;
pub mod measures;
pub mod policies;

#[cfg(any(test, feature = "oracles"))]
pub mod testing;

pub use acquisition::{maximize_ucb_budget, maximize_ucb_simplex, sample_beta, ucb, BetaSchedule};
pub use error::{Error, Result};
pub use gp::{fit_gp, GpModel, KernelKind, KernelSpec};
pub use harness::{run_experiment, ExperimentConfig, RunTrace};
pub use measures::{
    from_weight_vector, project_to_simplex, sample_uniform_simplex, to_weight_vector, wasserstein_p,
    AllocationDecision, WeightVector,
};
pub use policies::{ObservationRecord, Policy, PolicyId};
