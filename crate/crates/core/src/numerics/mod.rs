//! Dense numerical kernels: linear solves, numerical rank, LP feasibility,
//! projections and finite differences.

mod finite_diff;
mod linalg;
mod matrix;
mod projection;
mod simplex;

pub use finite_diff::finite_difference_gradient;
pub use linalg::{default_rank_tol, matrix_rank, rank, solve_linear, SINGULAR_PIVOT_TOL};
pub use matrix::{dot, norm_1, norm_2, norm_inf, sub, Matrix};
pub use projection::{project_l1_ball, project_l2_ball, project_nonneg};
pub use simplex::{
    lp_feasible, lp_feasible_with, lp_maximize, LpFeasibilityProblem, LpOptions, LpOutcome,
    LpVerdict, VarBound,
};
