//! Constrained MDP data and the exact occupancy-measure calculus.
//!
//! Every state-action vector uses the action-major layout: the entry for
//! `(s, a)` lives at index `a·n + s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, solve_linear, Matrix};

/// Tolerance on row sums of stochastic vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// State marginals at or below this are treated as unvisited.
pub const STATE_MASS_TOL: f64 = 1e-12;
/// Policy entries at or below this make the entropy gradient undefined.
pub const GRAD_BOUNDARY_TOL: f64 = 1e-12;
/// Negative occupancy entries down to `-CLAMP_TOL` are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// Flat index of `(s, a)` in an `n`-state action-major vector.
#[inline]
pub fn sa_index(n: usize, s: usize, a: usize) -> usize {
    a * n + s
}

/// A tabular constrained MDP `(S, A, P, ν0, Ψ, b, γ)` with optional reward.
#[derive(Debug, Clone)]
pub struct Cmdp {
    n: usize,
    m: usize,
    gamma: f64,
    nu0: Vec<f64>,
    transition: Matrix,
    psi: Matrix,
    b: Vec<f64>,
    reward: Option<Vec<f64>>,
}

impl Cmdp {
    /// Validates and builds a CMDP. `transition` is `n·m × n`, `psi` is `n·m × k`.
    pub fn new(
        n: usize,
        m: usize,
        gamma: f64,
        nu0: Vec<f64>,
        transition: Matrix,
        psi: Matrix,
        b: Vec<f64>,
        reward: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("need at least one state".into()));
        }
        if m < 2 {
            return Err(Error::Invalid(format!("need at least two actions, got {m}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Invalid(format!("discount {gamma} outside (0, 1)")));
        }
        let nm = n * m;
        if nu0.len() != n {
            return Err(Error::Dimension(format!("nu0 has {} entries, expected {n}", nu0.len())));
        }
        check_distribution(&nu0, "nu0")?;
        if transition.shape() != (nm, n) {
            return Err(Error::Dimension(format!(
                "transition is {:?}, expected ({nm}, {n})",
                transition.shape()
            )));
        }
        for row in 0..nm {
            check_distribution(transition.row(row), &format!("transition row {row}"))?;
        }
        if psi.rows() != nm {
            return Err(Error::Dimension(format!(
                "Psi has {} rows, expected {nm}",
                psi.rows()
            )));
        }
        if psi.cols() != b.len() {
            return Err(Error::Dimension(format!(
                "Psi has {} constraints but b has {}",
                psi.cols(),
                b.len()
            )));
        }
        if psi.as_slice().iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite constraint data".into()));
        }
        if let Some(r) = &reward {
            if r.len() != nm {
                return Err(Error::Dimension(format!("reward has {} entries, expected {nm}", r.len())));
            }
        }
        Ok(Self {
            n,
            m,
            gamma,
            nu0,
            transition,
            psi,
            b,
            reward,
        })
    }

    /// An MDP without safety constraints.
    pub fn unconstrained(
        n: usize,
        m: usize,
        gamma: f64,
        nu0: Vec<f64>,
        transition: Matrix,
        reward: Option<Vec<f64>>,
    ) -> Result<Self> {
        Self::new(n, m, gamma, nu0, transition, Matrix::zeros(n * m, 0), vec![], reward)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of state-action pairs.
    pub fn nm(&self) -> usize {
        self.n * self.m
    }

    /// Number of safety constraints.
    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu0(&self) -> &[f64] {
        &self.nu0
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn reward(&self) -> Option<&[f64]> {
        self.reward.as_deref()
    }

    /// Same CMDP with different thresholds.
    pub fn with_thresholds(&self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.k() {
            return Err(Error::Dimension(format!(
                "{} thresholds for {} constraints",
                b.len(),
                self.k()
            )));
        }
        let mut out = self.clone();
        out.b = b;
        Ok(out)
    }

    /// Same CMDP with a different reward.
    pub fn with_reward(&self, reward: Option<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.n,
            self.m,
            self.gamma,
            self.nu0.clone(),
            self.transition.clone(),
            self.psi.clone(),
            self.b.clone(),
            reward,
        )
    }

    /// Same dynamics with a new transition law.
    pub fn with_transition(&self, transition: Matrix) -> Result<Self> {
        Self::new(
            self.n,
            self.m,
            self.gamma,
            self.nu0.clone(),
            transition,
            self.psi.clone(),
            self.b.clone(),
            self.reward.clone(),
        )
    }

    /// The same MDP with all safety constraints removed (feasible set `M`).
    pub fn without_constraints(&self) -> Self {
        let mut out = self.clone();
        out.psi = Matrix::zeros(self.nm(), 0);
        out.b = vec![];
        out
    }

    /// The action-stacked identity `E = [I_n; …; I_n]` (`n·m × n`).
    pub fn stacked_identity(&self) -> Matrix {
        stacked_identity(self.n, self.m)
    }

    /// `E − γP`, whose column span is the potential-shaping subspace.
    pub fn shaping_matrix(&self) -> Matrix {
        shaping_matrix(&self.transition, self.n, self.gamma)
    }

    /// `Ψᵀμ`.
    pub fn constraint_costs(&self, mu: &OccupancyMeasure) -> Vec<f64> {
        self.psi.tr_mul_vec(mu.values())
    }

    pub(crate) fn check_reward_len(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.nm() {
            return Err(Error::Dimension(format!(
                "reward has {} entries, expected {}",
                r.len(),
                self.nm()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_occupancy(&self, mu: &OccupancyMeasure) -> Result<()> {
        if mu.n() != self.n || mu.m() != self.m {
            return Err(Error::Dimension(format!(
                "occupancy is {}x{}, CMDP is {}x{}",
                mu.n(),
                mu.m(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    pub(crate) fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.n() != self.n || policy.m() != self.m {
            return Err(Error::Dimension(format!(
                "policy is {}x{}, CMDP is {}x{}",
                policy.n(),
                policy.m(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Invalid(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

pub fn stacked_identity(n: usize, m: usize) -> Matrix {
    Matrix::from_fn(n * m, n, |row, col| if row % n == col { 1.0 } else { 0.0 })
}

pub fn shaping_matrix(transition: &Matrix, n: usize, gamma: f64) -> Matrix {
    Matrix::from_fn(transition.rows(), n, |row, col| {
        let e = if row % n == col { 1.0 } else { 0.0 };
        e - gamma * transition[(row, col)]
    })
}

/// A state-action occupancy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    n: usize,
    m: usize,
    mu: Vec<f64>,
}

impl OccupancyMeasure {
    /// Clamps entries in `[-1e-12, 0)` to zero; more negative entries are an error.
    pub fn new(n: usize, m: usize, mut mu: Vec<f64>) -> Result<Self> {
        if mu.len() != n * m {
            return Err(Error::Dimension(format!(
                "occupancy has {} entries, expected {}",
                mu.len(),
                n * m
            )));
        }
        for v in &mut mu {
            if !v.is_finite() {
                return Err(Error::Invalid("non-finite occupancy entry".into()));
            }
            if *v < 0.0 {
                if *v < -CLAMP_TOL {
                    return Err(Error::Invalid(format!("negative occupancy entry {v:e}")));
                }
                *v = 0.0;
            }
        }
        Ok(Self { n, m, mu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }

    pub fn into_values(self) -> Vec<f64> {
        self.mu
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.mu[sa_index(self.n, s, a)]
    }

    pub fn total_mass(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// `Eᵀμ`: the state occupancy.
    pub fn state_marginal(&self) -> Vec<f64> {
        let mut nu = vec![0.0; self.n];
        for a in 0..self.m {
            for (s, slot) in nu.iter_mut().enumerate() {
                *slot += self.mu[sa_index(self.n, s, a)];
            }
        }
        nu
    }

    /// The induced policy π^μ (uniform on unvisited states).
    pub fn policy(&self) -> Policy {
        policy_from_occupancy(self)
    }
}

/// A stationary Markov policy stored as an `n × m` row-stochastic table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    n: usize,
    m: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// `probs` is row-major: entry `s·m + a` is `π(a|s)`.
    pub fn new(n: usize, m: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n * m {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                n * m
            )));
        }
        for s in 0..n {
            check_distribution(&probs[s * m..(s + 1) * m], &format!("policy row {s}"))?;
        }
        Ok(Self { n, m, probs })
    }

    /// Builds a policy from rows that may be off by rounding; each row is
    /// renormalized.
    pub fn from_weights(n: usize, m: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * m {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected {}",
                weights.len(),
                n * m
            )));
        }
        for s in 0..n {
            let row = &mut weights[s * m..(s + 1) * m];
            let total: f64 = row.iter().sum();
            if !(total.is_finite() && total > 0.0) || row.iter().any(|v| *v < 0.0) {
                return Err(Error::Invalid(format!("policy row {s} cannot be normalized")));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self { n, m, probs: weights })
    }

    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            probs: vec![1.0 / m as f64; n * m],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.m + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.m..(s + 1) * self.m]
    }

    /// Row-major table.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Rows as nested vectors, `[s][a]`.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|s| self.row(s).to_vec()).collect()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Σ_s ‖π(·|s) − other(·|s)‖₁.
    pub fn l1_distance(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Policy regularizer `f(μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regularizer {
    None,
    /// Negative conditional entropy of the induced policy, weighted by β.
    Entropy { beta: f64 },
    /// `β‖μ‖²/2`.
    Quadratic { beta: f64 },
}

impl Regularizer {
    pub fn entropy(beta: f64) -> Result<Self> {
        Self::Entropy { beta }.validated()
    }

    pub fn quadratic(beta: f64) -> Result<Self> {
        Self::Quadratic { beta }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Regularizer::Entropy { beta } | Regularizer::Quadratic { beta }
                if !(beta > 0.0 && beta.is_finite()) =>
            {
                Err(Error::Invalid(format!("regularizer weight {beta} must be positive")))
            }
            other => Ok(other),
        }
    }
}

/// Exact occupancy measure of `policy`, from `(I − γP_πᵀ)ν = (1−γ)ν0`.
pub fn occupancy_from_policy(cmdp: &Cmdp, policy: &Policy) -> Result<OccupancyMeasure> {
    cmdp.check_policy(policy)?;
    let (n, m, gamma) = (cmdp.n, cmdp.m, cmdp.gamma);
    // system = I − γ P_πᵀ, where P_π[s][s'] = Σ_a π(a|s) P[(s,a), s'].
    let mut system = Matrix::identity(n);
    for s in 0..n {
        for a in 0..m {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            let row = cmdp.transition.row(sa_index(n, s, a));
            for (s_next, &t) in row.iter().enumerate() {
                if t != 0.0 {
                    system[(s_next, s)] -= gamma * p * t;
                }
            }
        }
    }
    let rhs: Vec<f64> = cmdp.nu0.iter().map(|v| (1.0 - gamma) * v).collect();
    let nu = solve_linear(&system, &rhs).map_err(|e| match e {
        Error::Singular { .. } => Error::Invalid(format!(
            "internal error: flow system singular for discount {gamma}: {e}"
        )),
        other => other,
    })?;
    let mut mu = vec![0.0; n * m];
    for s in 0..n {
        for a in 0..m {
            mu[sa_index(n, s, a)] = policy.prob(s, a) * nu[s];
        }
    }
    OccupancyMeasure::new(n, m, mu)
}

/// The policy induced by `mu`; states with marginal ≤ 1e-12 get the uniform row.
pub fn policy_from_occupancy(mu: &OccupancyMeasure) -> Policy {
    let (n, m) = (mu.n, mu.m);
    let nu = mu.state_marginal();
    let mut probs = vec![0.0; n * m];
    for s in 0..n {
        if nu[s] > STATE_MASS_TOL {
            for a in 0..m {
                probs[s * m + a] = mu.mu[sa_index(n, s, a)] / nu[s];
            }
        } else {
            probs[s * m..(s + 1) * m].fill(1.0 / m as f64);
        }
    }
    Policy { n, m, probs }
}

/// `‖(E − γP)ᵀμ − (1−γ)ν0‖_∞`.
pub fn bellman_flow_residual(cmdp: &Cmdp, mu: &OccupancyMeasure) -> Result<f64> {
    cmdp.check_occupancy(mu)?;
    let (n, gamma) = (cmdp.n, cmdp.gamma);
    let mut flow = mu.state_marginal();
    let inflow = cmdp.transition.tr_mul_vec(&mu.mu);
    for s in 0..n {
        flow[s] -= gamma * inflow[s] + (1.0 - gamma) * cmdp.nu0[s];
    }
    Ok(flow.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

/// `f(μ)` with the convention `0·log 0 = 0`.
///
/// For the entropy kind with `n > 1` this is `β Σ μ(s,a) log π^μ(a|s)`; with a
/// single state it is `β Σ μ(a) log μ(a)`, which agrees on the simplex and
/// whose gradient is `β(log μ + 1)`.
pub fn regularizer_value(mu: &OccupancyMeasure, reg: &Regularizer) -> f64 {
    match *reg {
        Regularizer::None => 0.0,
        Regularizer::Quadratic { beta } => 0.5 * beta * dot(&mu.mu, &mu.mu),
        Regularizer::Entropy { beta } => {
            if mu.n == 1 {
                beta * mu.mu.iter().map(|&v| xlogy(v, v)).sum::<f64>()
            } else {
                let nu = mu.state_marginal();
                let mut total = 0.0;
                for a in 0..mu.m {
                    for (s, &ns) in nu.iter().enumerate() {
                        let v = mu.mu[sa_index(mu.n, s, a)];
                        if v > 0.0 {
                            total += v * (v / ns).ln();
                        }
                    }
                }
                beta * total
            }
        }
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `∇f(μ)` in action-major layout.
pub fn regularizer_gradient(mu: &OccupancyMeasure, reg: &Regularizer) -> Result<Vec<f64>> {
    match *reg {
        Regularizer::None => Ok(vec![0.0; mu.mu.len()]),
        Regularizer::Quadratic { beta } => Ok(mu.mu.iter().map(|v| beta * v).collect()),
        Regularizer::Entropy { beta } => {
            let nu = mu.state_marginal();
            if let Some(s) = nu.iter().position(|&v| v <= STATE_MASS_TOL) {
                return Err(Error::BoundaryGradient(format!("state {s} is unvisited")));
            }
            let mut grad = vec![0.0; mu.mu.len()];
            for a in 0..mu.m {
                for (s, &ns) in nu.iter().enumerate() {
                    let idx = sa_index(mu.n, s, a);
                    let p = mu.mu[idx] / ns;
                    if p <= GRAD_BOUNDARY_TOL {
                        return Err(Error::BoundaryGradient(format!(
                            "pi({a}|{s}) = {p:e}"
                        )));
                    }
                    grad[idx] = if mu.n == 1 {
                        beta * (mu.mu[idx].ln() + 1.0)
                    } else {
                        beta * p.ln()
                    };
                }
            }
            Ok(grad)
        }
    }
}

/// `J(μ, r) = rᵀμ − f(μ)`.
pub fn objective(mu: &OccupancyMeasure, r: &[f64], reg: &Regularizer) -> Result<f64> {
    if r.len() != mu.mu.len() {
        return Err(Error::Dimension(format!(
            "reward has {} entries, occupancy has {}",
            r.len(),
            mu.mu.len()
        )));
    }
    Ok(dot(r, &mu.mu) - regularizer_value(mu, reg))
}

/// `Ψᵀμ − b`; positive entries are violated.
pub fn constraint_violation(cmdp: &Cmdp, mu: &OccupancyMeasure) -> Result<Vec<f64>> {
    cmdp.check_occupancy(mu)?;
    Ok(cmdp
        .constraint_costs(mu)
        .iter()
        .zip(&cmdp.b)
        .map(|(c, b)| c - b)
        .collect())
}
