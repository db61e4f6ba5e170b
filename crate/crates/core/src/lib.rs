//! Tabular constrained MDPs: forward solvers, constrained inverse RL and
//! identifiability checks.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod cmdp;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod identifiability;
pub mod io;
pub mod irl;
pub mod numerics;

pub use cmdp::{
    bellman_flow_residual, constraint_violation, objective, occupancy_from_policy,
    policy_from_occupancy, regularizer_gradient, regularizer_value, Cmdp, OccupancyMeasure,
    Policy, Regularizer,
};
pub use error::{Error, Result};
