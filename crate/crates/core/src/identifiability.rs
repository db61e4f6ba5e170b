//! Linear-algebraic identifiability checks: active sets, normal-cone
//! membership, the rank condition for reward classes and the two-law rank
//! test for generalizability.

use serde::{Deserialize, Serialize};

use crate::cmdp::{
    bellman_flow_residual, constraint_violation, regularizer_gradient, sa_index, shaping_matrix,
    Cmdp, OccupancyMeasure, Regularizer, STOCHASTIC_TOL,
};
use crate::error::{Error, Result};
use crate::irl::RewardClass;
use crate::numerics::{lp_feasible_with, rank, LpFeasibilityProblem, LpOptions, Matrix, VarBound};

/// Default threshold deciding whether a constraint is active.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Active safety constraints `I(μ)` and active nonnegativity constraints `J(μ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSets {
    pub safety_active: Vec<usize>,
    /// `(s, a)` pairs with `μ(s,a) ≤ tol`.
    pub nonneg_active: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub rank_phi: usize,
    pub rank_xi: usize,
    pub rank_joint: usize,
    pub condition_met: bool,
    /// Rank of `E − γP`.
    pub shaping_dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_sets: Option<ActiveSets>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership: Option<bool>,
}

pub fn active_sets(cmdp: &Cmdp, mu: &OccupancyMeasure, tol: f64) -> Result<ActiveSets> {
    let violation = constraint_violation(cmdp, mu)?;
    if let Some((i, v)) = violation.iter().enumerate().find(|(_, v)| **v > tol) {
        return Err(Error::Infeasible(format!("constraint {i} violated by {v:e}")));
    }
    let flow = bellman_flow_residual(cmdp, mu)?;
    if flow > tol.max(1e-8) {
        return Err(Error::Infeasible(format!("flow residual {flow:e}")));
    }
    let safety_active = violation
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol)
        .map(|(i, _)| i)
        .collect();
    let (n, m) = (cmdp.n(), cmdp.m());
    let mut nonneg_active = Vec::new();
    for s in 0..n {
        for a in 0..m {
            if mu.values()[sa_index(n, s, a)] <= tol {
                nonneg_active.push((s, a));
            }
        }
    }
    Ok(ActiveSets {
        safety_active,
        nonneg_active,
    })
}

/// `E − γP`, whose columns span the potential-shaping subspace `U`.
pub fn shaping_subspace_basis(transition: &Matrix, gamma: f64) -> Result<Matrix> {
    let (rows, n) = transition.shape();
    if n == 0 || rows % n != 0 {
        return Err(Error::Dimension(format!(
            "transition of shape ({rows}, {n}) is not n*m x n"
        )));
    }
    Ok(shaping_matrix(transition, n, gamma))
}

/// Whether `r ∈ ∂f(μ) + U + C(μ) + E(μ)`, i.e. whether `μ` is optimal for `r` over `F`.
///
/// Solves for `η` free, `c ≥ 0` on active safety constraints and `d ≥ 0` on
/// active nonnegativity constraints with
/// `(E−γP)η + Σ cᵢΨᵢ − Σ d_{sa} e_{sa} = r − ∇f(μ)`. For the entropy kind a
/// boundary `μ` has an empty subdifferential and the answer is `false`.
pub fn reward_in_solution_cone(
    cmdp: &Cmdp,
    mu: &OccupancyMeasure,
    r: &[f64],
    reg: &Regularizer,
    tol: f64,
) -> Result<bool> {
    cmdp.check_reward_len(r)?;
    let grad = match regularizer_gradient(mu, reg) {
        Ok(g) => g,
        Err(Error::BoundaryGradient(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let sets = active_sets(cmdp, mu, tol.max(ACTIVE_TOL))?;
    let (n, nm) = (cmdp.n(), cmdp.nm());
    let shaping = cmdp.shaping_matrix();
    let ni = sets.safety_active.len();
    let cols = n + ni + sets.nonneg_active.len();
    let a = Matrix::from_fn(nm, cols, |row, col| {
        if col < n {
            shaping[(row, col)]
        } else if col < n + ni {
            cmdp.psi()[(row, sets.safety_active[col - n])]
        } else {
            let (s, act) = sets.nonneg_active[col - n - ni];
            if sa_index(n, s, act) == row {
                -1.0
            } else {
                0.0
            }
        }
    });
    let rhs: Vec<f64> = r.iter().zip(&grad).map(|(x, g)| x - g).collect();
    let mut bounds = vec![VarBound::Free; n];
    bounds.resize(cols, VarBound::NonNeg);
    let problem = LpFeasibilityProblem::new(a, rhs, bounds)?;
    let opts = LpOptions {
        feas_tol: tol,
        ..LpOptions::default()
    };
    Ok(lp_feasible_with(&problem, &opts)?.is_feasible())
}

/// `Ξ = [E − γP, Ψ]`.
pub fn constraint_shaping_matrix(cmdp: &Cmdp) -> Result<Matrix> {
    cmdp.shaping_matrix().hcat(cmdp.psi())
}

/// Ranks of `Φ`, `Ξ` and `[Φ, Ξ]`; the condition holds when the joint rank is
/// the sum, i.e. `span Φ ∩ span Ξ = {0}`.
pub fn rank_condition(class: &RewardClass, cmdp: &Cmdp) -> Result<IdentifiabilityReport> {
    if class.phi().rows() != cmdp.nm() {
        return Err(Error::Dimension(format!(
            "features have {} rows, CMDP has {}",
            class.phi().rows(),
            cmdp.nm()
        )));
    }
    let xi = constraint_shaping_matrix(cmdp)?;
    let joint = class.phi().hcat(&xi)?;
    let rank_phi = rank(class.phi());
    let rank_xi = rank(&xi);
    let rank_joint = rank(&joint);
    Ok(IdentifiabilityReport {
        rank_phi,
        rank_xi,
        rank_joint,
        condition_met: rank_joint == rank_phi + rank_xi,
        shaping_dimension: rank(&cmdp.shaping_matrix()),
        active_sets: None,
        membership: None,
    })
}

/// Distance from `r_hat` to the line `r_expert + span(1)` in the 2-norm.
pub fn potential_shaping_distance(r_hat: &[f64], r_expert: &[f64]) -> Result<f64> {
    if r_hat.len() != r_expert.len() || r_hat.is_empty() {
        return Err(Error::Dimension(format!(
            "rewards have {} and {} entries",
            r_hat.len(),
            r_expert.len()
        )));
    }
    let diff: Vec<f64> = r_hat.iter().zip(r_expert).map(|(a, b)| a - b).collect();
    let mean = diff.iter().sum::<f64>() / diff.len() as f64;
    Ok(diff.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>().sqrt())
}

/// Shift matrix whose last row is absorbing.
fn shift_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if (i + 1 < n && j == i + 1) || (i + 1 == n && j == i) {
            1.0
        } else {
            0.0
        }
    })
}

/// Transition laws `P̄₁ = [I; D; I; …]` and `P̄₂ = [D; I; D; …]` for which
/// `rank[E − γP̄₁, E − γP̄₂] = 2n − 1`.
pub fn rank_witness_pair(n: usize, m: usize) -> Result<(Matrix, Matrix)> {
    if n < 2 || m < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 states and 2 actions, got {n} and {m}"
        )));
    }
    let id = Matrix::identity(n);
    let d = shift_matrix(n);
    let block = |first: &Matrix, second: &Matrix| {
        Matrix::from_fn(n * m, n, |row, col| {
            let src = if (row / n).is_multiple_of(2) { first } else { second };
            src[(row % n, col)]
        })
    };
    Ok((block(&id, &d), block(&d, &id)))
}

/// `rank[E − γP₁, E − γP₂]`; `2n − 1` means only constant shifts are shared
/// between the two shaping subspaces.
pub fn generalizability_rank(p1: &Matrix, p2: &Matrix, gamma: f64) -> Result<usize> {
    if p1.shape() != p2.shape() {
        return Err(Error::Dimension(format!(
            "transition laws have shapes {:?} and {:?}",
            p1.shape(),
            p2.shape()
        )));
    }
    for p in [p1, p2] {
        for row in 0..p.rows() {
            let total: f64 = p.row(row).iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL || p.row(row).iter().any(|v| *v < 0.0) {
                return Err(Error::Invalid(format!("row {row} is not a distribution")));
            }
        }
    }
    let a = shaping_subspace_basis(p1, gamma)?;
    let b = shaping_subspace_basis(p2, gamma)?;
    Ok(rank(&a.hcat(&b)?))
}
