//! Forward solvers for the regularized (constrained) RL problem.
//!
//! * [`soft_value_iteration`]: unconstrained entropy-regularized problem over `M`.
//! * [`solve_rl_constrained`]: constrained problem over `F` through the
//!   Lagrangian dual in `ξ ≥ 0`.
//! * [`frank_wolfe_solve`]: conditional gradient over `F` for any
//!   differentiable regularizer.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::cmdp::{
    objective, occupancy_from_policy, regularizer_gradient, sa_index, Cmdp, OccupancyMeasure,
    Policy, Regularizer,
};
use crate::error::{Error, Result};
use crate::numerics::{
    dot, lp_feasible, lp_maximize, norm_inf, solve_linear, LpFeasibilityProblem, LpOptions,
    LpOutcome, LpVerdict, Matrix,
};

/// Strictness margin used by [`slater_check`].
pub const SLATER_EPS: f64 = 1e-6;

/// How the dual problem over `ξ` is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualMethod {
    /// Projected Newton steps with a finite-difference Hessian and Armijo
    /// backtracking on the dual function.
    Newton,
    /// Projected subgradient steps `c/√t` with `c = 1/(1 + ‖Ψ‖_∞)`.
    Subgradient,
}

/// Tolerances and caps shared by the forward solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    /// Soft value iteration sweeps.
    pub max_iter: usize,
    pub dual_method: DualMethod,
    /// Outer iterations of the dual solver.
    pub dual_max_iter: usize,
    pub fw_iters: usize,
    pub slater_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            dual_method: DualMethod::Newton,
            dual_max_iter: 500,
            fw_iters: 10_000,
            slater_eps: SLATER_EPS,
        }
    }
}

/// Result of [`soft_value_iteration`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftSolution {
    pub value: Vec<f64>,
    pub qvalue: Vec<f64>,
    pub policy: Policy,
    pub occupancy: OccupancyMeasure,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    pub converged: bool,
}

/// Result of [`solve_rl_constrained`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstrainedSolution {
    pub occupancy: OccupancyMeasure,
    pub dual: Vec<f64>,
    pub policy: Policy,
    /// `ξᵀ(b − Ψᵀμ)`.
    pub duality_gap: f64,
    /// `‖(Ψᵀμ − b)₊‖_∞`.
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Result of [`frank_wolfe_solve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrankWolfeSolution {
    pub occupancy: OccupancyMeasure,
    /// `max_{μ'∈F} (r − ∇f(μ))ᵀ(μ' − μ)` at the returned iterate.
    pub gap: f64,
    pub iterations: usize,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

fn soft_q(cmdp: &Cmdp, r: &[f64], v: &[f64]) -> Vec<f64> {
    let gamma = cmdp.gamma();
    let pv = cmdp.transition().mul_vec(v);
    r.iter().zip(&pv).map(|(ri, p)| ri + gamma * p).collect()
}

/// `β log Σ_a exp(q(s,a)/β)` per state and the matching softmax policy.
fn soft_max_backup(n: usize, m: usize, q: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n];
    let mut probs = vec![0.0; n * m];
    for s in 0..n {
        let top = (0..m)
            .map(|a| q[sa_index(n, s, a)])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in 0..m {
            let e = ((q[sa_index(n, s, a)] - top) / beta).exp();
            probs[s * m + a] = e;
            total += e;
        }
        for a in 0..m {
            probs[s * m + a] /= total;
        }
        v[s] = top + beta * total.ln();
    }
    (v, probs)
}

/// Soft value iteration for `max_{μ∈M} rᵀμ − f(μ)` with the entropy regularizer.
///
/// Stops once the sup-norm change of a sweep is at most `tol·(1−γ)/(2γ)`, which
/// bounds the value error by `tol/2`. Hitting `max_iter` is not an error: the
/// last iterate is returned with `converged = false`.
pub fn soft_value_iteration(
    cmdp: &Cmdp,
    r: &[f64],
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SoftSolution> {
    soft_value_iteration_from(cmdp, r, beta, tol, max_iter, None)
}

/// [`soft_value_iteration`] warm-started from `init`.
pub fn soft_value_iteration_from(
    cmdp: &Cmdp,
    r: &[f64],
    beta: f64,
    tol: f64,
    max_iter: usize,
    init: Option<&[f64]>,
) -> Result<SoftSolution> {
    cmdp.check_reward_len(r)?;
    check_beta(beta)?;
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let (n, m, gamma) = (cmdp.n(), cmdp.m(), cmdp.gamma());
    let mut v = match init {
        Some(v0) if v0.len() == n => v0.to_vec(),
        Some(v0) => {
            return Err(Error::Dimension(format!(
                "warm start has {} entries, expected {n}",
                v0.len()
            )))
        }
        None => vec![0.0; n],
    };
    let threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let q = soft_q(cmdp, r, &v);
        let (next, _) = soft_max_backup(n, m, &q, beta);
        residual = next
            .iter()
            .zip(&v)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()));
        v = next;
        iterations += 1;
        // Below this the sweep only reshuffles rounding error.
        let floor = 16.0 * f64::EPSILON * norm_inf(&v).max(1.0);
        if residual <= threshold.max(floor) {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("soft value iteration stopped after {iterations} sweeps, residual {residual:e}");
    }
    let q = soft_q(cmdp, r, &v);
    let (_, probs) = soft_max_backup(n, m, &q, beta);
    let policy = Policy::from_weights(n, m, probs)?;
    let occupancy = occupancy_from_policy(cmdp, &policy)?;
    Ok(SoftSolution {
        value: v,
        qvalue: q,
        policy,
        occupancy,
        iterations,
        residual,
        converged,
    })
}

/// Exact soft value and Q-function of `policy` under reward `r`:
/// `v = (I − γP_π)⁻¹ Σ_a π(r − β log π)` and `q = r + γPv`.
pub fn soft_policy_evaluation(
    cmdp: &Cmdp,
    policy: &Policy,
    r: &[f64],
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cmdp.check_reward_len(r)?;
    cmdp.check_policy(policy)?;
    let (n, m, gamma) = (cmdp.n(), cmdp.m(), cmdp.gamma());
    let mut system = Matrix::identity(n);
    let mut rhs = vec![0.0; n];
    for s in 0..n {
        for a in 0..m {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            let idx = sa_index(n, s, a);
            rhs[s] += p * (r[idx] - beta * p.ln());
            for (s_next, &t) in cmdp.transition().row(idx).iter().enumerate() {
                system[(s, s_next)] -= gamma * p * t;
            }
        }
    }
    let v = solve_linear(&system, &rhs)?;
    let q = soft_q(cmdp, r, &v);
    Ok((v, q))
}

/// Soft policy iteration: exact evaluation followed by `π ← softmax(q/β)`.
///
/// Starts from soft value iteration at a loose tolerance and polishes until
/// successive policies agree to `tol` in sup norm.
pub fn soft_policy_iteration(
    cmdp: &Cmdp,
    r: &[f64],
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SoftSolution> {
    let warm = soft_value_iteration(cmdp, r, beta, 1e-6, 10_000)?;
    polish(cmdp, r, beta, warm, tol, max_iter)
}

fn polish(
    cmdp: &Cmdp,
    r: &[f64],
    beta: f64,
    start: SoftSolution,
    tol: f64,
    max_iter: usize,
) -> Result<SoftSolution> {
    let (n, m) = (cmdp.n(), cmdp.m());
    let mut policy = start.policy;
    let mut iterations = start.iterations;
    let mut change = f64::INFINITY;
    let mut v = start.value;
    let mut q = start.qvalue;
    for _ in 0..max_iter {
        let (v_new, q_new) = soft_policy_evaluation(cmdp, &policy, r, beta)?;
        let (_, probs) = soft_max_backup(n, m, &q_new, beta);
        let next = Policy::from_weights(n, m, probs)?;
        change = next
            .as_slice()
            .iter()
            .zip(policy.as_slice())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()));
        policy = next;
        v = v_new;
        q = q_new;
        iterations += 1;
        if change <= tol {
            break;
        }
    }
    let occupancy = occupancy_from_policy(cmdp, &policy)?;
    Ok(SoftSolution {
        value: v,
        qvalue: q,
        policy,
        occupancy,
        iterations,
        residual: change,
        converged: change <= tol,
    })
}

/// Evaluates the dual function `D(ξ) = max_{μ∈M} (r−Ψξ)ᵀμ − f(μ) + bᵀξ`.
struct DualOracle<'a> {
    cmdp: &'a Cmdp,
    r: &'a [f64],
    beta: f64,
    config: &'a SolverConfig,
    warm: Option<Vec<f64>>,
}

struct DualPoint {
    value: f64,
    /// `∂D/∂ξ = b − Ψᵀμ(ξ)`.
    grad: Vec<f64>,
    sol: SoftSolution,
}

impl DualOracle<'_> {
    fn modified_reward(&self, xi: &[f64]) -> Vec<f64> {
        let penalty = self.cmdp.psi().mul_vec(xi);
        self.r.iter().zip(&penalty).map(|(a, b)| a - b).collect()
    }

    fn eval(&mut self, xi: &[f64]) -> Result<DualPoint> {
        let reward = self.modified_reward(xi);
        let warm = soft_value_iteration_from(
            self.cmdp,
            &reward,
            self.beta,
            1e-8,
            self.config.max_iter,
            self.warm.as_deref(),
        )?;
        let sol = polish(self.cmdp, &reward, self.beta, warm, 1e-15, 30)?;
        self.warm = Some(sol.value.clone());
        let reg = Regularizer::Entropy { beta: self.beta };
        let value = objective(&sol.occupancy, &reward, &reg)? + dot(self.cmdp.b(), xi);
        let costs = self.cmdp.constraint_costs(&sol.occupancy);
        let grad = self.cmdp.b().iter().zip(&costs).map(|(b, c)| b - c).collect();
        Ok(DualPoint { value, grad, sol })
    }
}

fn dual_residual(grad: &[f64]) -> f64 {
    grad.iter().fold(0.0, |acc, g| acc.max(-g))
}

fn slackness(xi: &[f64], grad: &[f64]) -> f64 {
    xi.iter()
        .zip(grad)
        .fold(0.0, |acc, (x, g)| acc.max((x * g).abs()))
}

fn project(xi: &[f64], dir: &[f64], step: f64) -> Vec<f64> {
    xi.iter()
        .zip(dir)
        .map(|(x, d)| (x + step * d).max(0.0))
        .collect()
}

/// Solves `max_{μ∈F} rᵀμ − f(μ)` for the entropy regularizer with weight `beta`
/// by minimizing the Lagrangian dual over `ξ ≥ 0`.
///
/// Terminates when `‖(Ψᵀμ − b)₊‖_∞ ≤ tol` and `|ξᵢ(bᵢ − Ψᵢᵀμ)| ≤ tol` for all `i`.
pub fn solve_rl_constrained(
    cmdp: &Cmdp,
    r: &[f64],
    beta: f64,
    config: &SolverConfig,
) -> Result<ConstrainedSolution> {
    cmdp.check_reward_len(r)?;
    check_beta(beta)?;
    let tol = config.tol;
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !slater_check_with(cmdp, config.slater_eps) {
        return Err(Error::SlaterViolation);
    }
    let k = cmdp.k();
    let mut oracle = DualOracle {
        cmdp,
        r,
        beta,
        config,
        warm: None,
    };
    let mut xi = vec![0.0; k];
    let mut point = oracle.eval(&xi)?;
    let mut iterations = 0;
    let step_scale = 1.0 / (1.0 + cmdp.psi().norm_inf());
    loop {
        let res = dual_residual(&point.grad);
        let slack = slackness(&xi, &point.grad);
        if res <= tol && slack <= tol {
            break;
        }
        if iterations >= config.dual_max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual: res.max(slack),
            });
        }
        iterations += 1;
        match config.dual_method {
            DualMethod::Subgradient => {
                let eta = step_scale / (iterations as f64).sqrt();
                let ascent: Vec<f64> = point.grad.iter().map(|g| -g).collect();
                xi = project(&xi, &ascent, eta);
                point = oracle.eval(&xi)?;
            }
            DualMethod::Newton => {
                let (next_xi, next) = newton_step(&mut oracle, &xi, point)?;
                xi = next_xi;
                point = next;
            }
        }
        debug!(
            "dual iteration {iterations}: D = {:.12e}, residual {:.3e}",
            point.value,
            dual_residual(&point.grad)
        );
    }
    let duality_gap = dot(&xi, &point.grad);
    let dual_residual = dual_residual(&point.grad);
    Ok(ConstrainedSolution {
        occupancy: point.sol.occupancy,
        policy: point.sol.policy,
        dual: xi,
        duality_gap,
        dual_residual,
        iterations,
    })
}

fn newton_step(
    oracle: &mut DualOracle<'_>,
    xi: &[f64],
    point: DualPoint,
) -> Result<(Vec<f64>, DualPoint)> {
    let k = xi.len();
    let g = &point.grad;
    // Coordinates pinned at the bound with an outward gradient stay fixed.
    let free: Vec<usize> = (0..k).filter(|&i| xi[i] > 0.0 || g[i] < 0.0).collect();
    let mut dir = vec![0.0; k];
    let mut newton_ok = false;
    if !free.is_empty() {
        let f = free.len();
        let mut hess = Matrix::zeros(f, f);
        for (col, &j) in free.iter().enumerate() {
            let h = 1e-5 * xi[j].abs().max(1.0);
            let mut up = xi.to_vec();
            up[j] += h;
            let mut down = xi.to_vec();
            down[j] -= h;
            let g_up = oracle.eval(&up)?.grad;
            let g_down = oracle.eval(&down)?.grad;
            for (row, &i) in free.iter().enumerate() {
                hess[(row, col)] = (g_up[i] - g_down[i]) / (2.0 * h);
            }
        }
        let sym = Matrix::from_fn(f, f, |a, b| 0.5 * (hess[(a, b)] + hess[(b, a)]));
        let rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
        if let Ok(step) = solve_linear(&sym, &rhs) {
            let descent: f64 = free.iter().zip(&step).map(|(&i, s)| g[i] * s).sum();
            if descent < 0.0 && step.iter().all(|s| s.is_finite()) {
                for (&i, s) in free.iter().zip(&step) {
                    dir[i] = *s;
                }
                newton_ok = true;
            }
        }
    }
    if newton_ok {
        if let Some(found) = backtrack(oracle, xi, &point, &dir, 1.0)? {
            return Ok(found);
        }
    }
    // Projected gradient fallback.
    let grad_dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let scale = 1.0 / (1.0 + oracle.cmdp.psi().norm_inf());
    match backtrack(oracle, xi, &point, &grad_dir, 16.0 * scale)? {
        Some(found) => Ok(found),
        None => Err(Error::NotConverged {
            iterations: 0,
            residual: dual_residual(g).max(slackness(xi, g)),
        }),
    }
}

fn backtrack(
    oracle: &mut DualOracle<'_>,
    xi: &[f64],
    point: &DualPoint,
    dir: &[f64],
    first: f64,
) -> Result<Option<(Vec<f64>, DualPoint)>> {
    let slop = 1e-13 * (1.0 + point.value.abs());
    let mut step = first;
    for _ in 0..60 {
        let cand = project(xi, dir, step);
        let moved: Vec<f64> = cand.iter().zip(xi).map(|(a, b)| a - b).collect();
        if moved.iter().all(|d| *d == 0.0) {
            return Ok(None);
        }
        let next = oracle.eval(&cand)?;
        if next.value <= point.value + 1e-4 * dot(&point.grad, &moved) + slop {
            return Ok(Some((cand, next)));
        }
        step *= 0.5;
    }
    Ok(None)
}

/// The flow polytope `F` in standard form over `(μ, s)`:
/// `(E−γP)ᵀμ = (1−γ)ν0`, `Ψᵀμ + s = b`, `μ, s ≥ 0`.
pub(crate) fn feasible_set_lp(cmdp: &Cmdp) -> Result<LpFeasibilityProblem> {
    let (n, nm, k) = (cmdp.n(), cmdp.nm(), cmdp.k());
    let shaping = cmdp.shaping_matrix();
    let a = Matrix::from_fn(n + k, nm + k, |row, col| {
        if row < n {
            if col < nm {
                shaping[(col, row)]
            } else {
                0.0
            }
        } else {
            let i = row - n;
            if col < nm {
                cmdp.psi()[(col, i)]
            } else if col - nm == i {
                1.0
            } else {
                0.0
            }
        }
    });
    let mut rhs: Vec<f64> = cmdp.nu0().iter().map(|v| (1.0 - cmdp.gamma()) * v).collect();
    rhs.extend_from_slice(cmdp.b());
    LpFeasibilityProblem::nonneg(a, rhs)
}

/// A point of `F` with `μ ≥ eps` and `Ψᵀμ ≤ b − eps`, if one exists.
pub fn slater_witness(cmdp: &Cmdp, eps: f64) -> Result<Option<OccupancyMeasure>> {
    let (n, nm, k) = (cmdp.n(), cmdp.nm(), cmdp.k());
    // Substitute μ = μ' + eps·1 with μ' ≥ 0 and tighten b by eps.
    let base = feasible_set_lp(cmdp)?;
    let ones = vec![eps; nm];
    let mut shifted = base.a_eq.mul_vec(&[ones.clone(), vec![0.0; k]].concat());
    for (row, v) in shifted.iter_mut().enumerate() {
        *v = base.b_eq[row] - *v;
        if row >= n {
            *v -= eps;
        }
    }
    let problem = LpFeasibilityProblem::nonneg(base.a_eq, shifted)?;
    match lp_feasible(&problem)? {
        LpVerdict::Infeasible => Ok(None),
        LpVerdict::Feasible(x) => {
            let mu: Vec<f64> = x[..nm].iter().map(|v| v + eps).collect();
            Ok(Some(OccupancyMeasure::new(n, cmdp.m(), mu)?))
        }
    }
}

/// Whether `relint F ≠ ∅`, certified with margin [`SLATER_EPS`].
pub fn slater_check(cmdp: &Cmdp) -> bool {
    slater_check_with(cmdp, SLATER_EPS)
}

pub fn slater_check_with(cmdp: &Cmdp, eps: f64) -> bool {
    match slater_witness(cmdp, eps) {
        Ok(found) => found.is_some(),
        Err(e) => {
            warn!("Slater check failed to decide: {e}");
            false
        }
    }
}

fn fw_linear_oracle(problem: &LpFeasibilityProblem, nm: usize, g: &[f64]) -> Result<Vec<f64>> {
    let mut c = g.to_vec();
    c.resize(problem.a_eq.cols(), 0.0);
    match lp_maximize(problem, &c, &LpOptions::default())? {
        LpOutcome::Optimal { x, .. } => Ok(x[..nm].to_vec()),
        LpOutcome::Infeasible => Err(Error::Infeasible("feasible set is empty".into())),
        LpOutcome::Unbounded => Err(Error::Invalid("linear subproblem is unbounded".into())),
    }
}

/// Frank–Wolfe ascent on `rᵀμ − f(μ)` over `F`.
///
/// The entropy kind starts from a Slater point and uses steps `2/(t+3)`, so
/// every iterate stays strictly positive; the quadratic kind uses exact line
/// search; the unregularized kind uses `2/(t+2)`.
pub fn frank_wolfe_solve(
    cmdp: &Cmdp,
    r: &[f64],
    reg: &Regularizer,
    iters: usize,
) -> Result<FrankWolfeSolution> {
    cmdp.check_reward_len(r)?;
    let reg = reg.validated()?;
    let (n, m, nm) = (cmdp.n(), cmdp.m(), cmdp.nm());
    let problem = feasible_set_lp(cmdp)?;
    let mut mu = match reg {
        Regularizer::Entropy { .. } => slater_witness(cmdp, SLATER_EPS)?
            .ok_or(Error::SlaterViolation)?
            .into_values(),
        _ => match lp_feasible(&problem)? {
            LpVerdict::Feasible(x) => x[..nm].to_vec(),
            LpVerdict::Infeasible => {
                return Err(Error::Infeasible("feasible set is empty".into()))
            }
        },
    };
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for t in 0..iters {
        let current = OccupancyMeasure::new(n, m, mu.clone())?;
        let grad_f = regularizer_gradient(&current, &reg)?;
        let g: Vec<f64> = r.iter().zip(&grad_f).map(|(a, b)| a - b).collect();
        let vertex = fw_linear_oracle(&problem, nm, &g)?;
        let d: Vec<f64> = vertex.iter().zip(&mu).map(|(a, b)| a - b).collect();
        gap = dot(&g, &d);
        iterations = t;
        if gap <= 1e-14 {
            break;
        }
        let step = match reg {
            Regularizer::Quadratic { beta } => {
                let dd = dot(&d, &d);
                if dd == 0.0 {
                    0.0
                } else {
                    (gap / (beta * dd)).clamp(0.0, 1.0)
                }
            }
            Regularizer::Entropy { .. } => 2.0 / (t as f64 + 3.0),
            Regularizer::None => 2.0 / (t as f64 + 2.0),
        };
        for (x, di) in mu.iter_mut().zip(&d) {
            *x += step * di;
        }
        iterations = t + 1;
    }
    let occupancy = OccupancyMeasure::new(n, m, mu)?;
    if iterations == iters {
        // Report the gap at the returned iterate.
        if let Ok(grad_f) = regularizer_gradient(&occupancy, &reg) {
            let g: Vec<f64> = r.iter().zip(&grad_f).map(|(a, b)| a - b).collect();
            let vertex = fw_linear_oracle(&problem, nm, &g)?;
            gap = g
                .iter()
                .zip(vertex.iter().zip(occupancy.values()))
                .map(|(gi, (v, x))| gi * (v - x))
                .sum();
        }
    }
    Ok(FrankWolfeSolution {
        occupancy,
        gap,
        iterations,
    })
}
