//! Constrained inverse RL: empirical occupancy estimates, IPM distances,
//! gradient descent-ascent with a natural-policy-gradient inner step, and the
//! sample-size calculator.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::cmdp::{
    occupancy_from_policy, regularizer_value, sa_index, Cmdp, OccupancyMeasure, Policy,
    Regularizer,
};
use crate::error::{Error, Result};
use crate::forward::soft_policy_evaluation;
use crate::numerics::{dot, norm_1, norm_2, norm_inf, project_l1_ball, project_l2_ball, Matrix};

/// Lagrangian magnitude beyond which [`gda_irl`] gives up.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Constraint on the reward weights `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Unbounded,
}

/// The linear reward class `{Φw : ‖w‖ ≤ radius}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardClass {
    phi: Matrix,
    norm: NormKind,
    radius: f64,
}

impl RewardClass {
    pub fn new(phi: Matrix, norm: NormKind, radius: f64) -> Result<Self> {
        if phi.cols() == 0 {
            return Err(Error::Invalid("reward class needs at least one feature".into()));
        }
        if norm != NormKind::Unbounded && !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Invalid(format!("radius must be positive, got {radius}")));
        }
        if phi.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature entry".into()));
        }
        Ok(Self { phi, norm, radius })
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of features `d`.
    pub fn dim(&self) -> usize {
        self.phi.cols()
    }

    /// `Φw`.
    pub fn reward(&self, w: &[f64]) -> Vec<f64> {
        self.phi.mul_vec(w)
    }

    /// Euclidean projection onto the weight ball.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        match self.norm {
            NormKind::L1 => project_l1_ball(w, self.radius),
            NormKind::L2 => project_l2_ball(w, self.radius),
            NormKind::Unbounded => w.to_vec(),
        }
    }

    /// `‖w‖` in the class norm (2-norm for the unbounded kind).
    pub fn weight_norm(&self, w: &[f64]) -> f64 {
        match self.norm {
            NormKind::L1 => norm_1(w),
            _ => norm_2(w),
        }
    }

    /// `max_{s,a} ‖Φ(s,a)‖_∞`.
    pub fn feature_bound(&self) -> f64 {
        self.phi.max_abs()
    }
}

/// Expert trajectories of equal length `T + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstrations {
    trajectories: Vec<Vec<(usize, usize)>>,
    horizon: usize,
}

impl Demonstrations {
    pub fn new(trajectories: Vec<Vec<(usize, usize)>>, n: usize, m: usize) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::Invalid("no demonstrations".into()))?;
        if first.is_empty() {
            return Err(Error::Invalid("empty trajectory".into()));
        }
        let len = first.len();
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.len() != len {
                return Err(Error::Invalid(format!(
                    "trajectory {i} has {} steps, expected {len}",
                    traj.len()
                )));
            }
            if let Some(&(s, a)) = traj.iter().find(|&&(s, a)| s >= n || a >= m) {
                return Err(Error::Invalid(format!(
                    "trajectory {i} visits ({s}, {a}) outside {n} states x {m} actions"
                )));
            }
        }
        Ok(Self {
            trajectories,
            horizon: len - 1,
        })
    }

    pub fn trajectories(&self) -> &[Vec<(usize, usize)>] {
        &self.trajectories
    }

    /// `T`: each trajectory has `T + 1` pairs.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// `μ̂(s,a) = (1−γ)/N Σ_i Σ_{t≤T} γᵗ 1(s_tⁱ = s, a_tⁱ = a)`; total mass is `1 − γ^{T+1}`.
pub fn estimate_occupancy(
    demos: &Demonstrations,
    gamma: f64,
    n: usize,
    m: usize,
) -> Result<OccupancyMeasure> {
    if demos.is_empty() {
        return Err(Error::Invalid("no demonstrations".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Invalid(format!("discount {gamma} outside (0, 1)")));
    }
    // Per-time-step counts first, then one weighted sum, so the result does
    // not depend on trajectory order.
    let horizon = demos.horizon();
    let mut counts = vec![0u64; (horizon + 1) * n * m];
    for traj in demos.trajectories() {
        for (t, &(s, a)) in traj.iter().enumerate() {
            if s >= n || a >= m {
                return Err(Error::Invalid(format!("({s}, {a}) out of range")));
            }
            counts[t * n * m + sa_index(n, s, a)] += 1;
        }
    }
    let scale = (1.0 - gamma) / demos.len() as f64;
    let mut mu = vec![0.0; n * m];
    let mut weight = 1.0;
    for t in 0..=horizon {
        for (slot, &c) in mu.iter_mut().zip(&counts[t * n * m..(t + 1) * n * m]) {
            *slot += weight * c as f64;
        }
        weight *= gamma;
    }
    OccupancyMeasure::new(n, m, mu.into_iter().map(|v| v * scale).collect())
}

/// Value of the integral probability metric `δ_R(μ, μ')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ipm {
    Distance(f64),
    /// Unbounded class, measures agree (distance 0).
    Equal,
    /// Unbounded class, measures differ (distance +∞).
    Unequal,
}

impl Ipm {
    pub fn value(&self) -> f64 {
        match self {
            Ipm::Distance(d) => *d,
            Ipm::Equal => 0.0,
            Ipm::Unequal => f64::INFINITY,
        }
    }
}

/// `radius · ‖Φᵀ(μ − μ_ref)‖_*`.
pub fn ipm_distance(
    class: &RewardClass,
    mu: &OccupancyMeasure,
    mu_ref: &OccupancyMeasure,
) -> Result<Ipm> {
    let nm = class.phi.rows();
    if mu.values().len() != nm || mu_ref.values().len() != nm {
        return Err(Error::Dimension(format!(
            "features have {nm} rows, occupancies {} and {}",
            mu.values().len(),
            mu_ref.values().len()
        )));
    }
    let diff: Vec<f64> = mu
        .values()
        .iter()
        .zip(mu_ref.values())
        .map(|(a, b)| a - b)
        .collect();
    if class.norm == NormKind::Unbounded {
        return Ok(if norm_inf(&diff) <= 1e-12 {
            Ipm::Equal
        } else {
            Ipm::Unequal
        });
    }
    let moment = class.phi.tr_mul_vec(&diff);
    let dual = match class.norm {
        NormKind::L1 => norm_inf(&moment),
        _ => norm_2(&moment),
    };
    Ok(Ipm::Distance(class.radius * dual))
}

/// One entropy-regularized natural policy gradient step with softmax
/// parametrization: `π⁺ ∝ π^{1−ηβ/(1−γ)} · exp(η q_soft/(1−γ))`.
pub fn npg_step(cmdp: &Cmdp, policy: &Policy, r: &[f64], beta: f64, eta: f64) -> Result<Policy> {
    let gamma = cmdp.gamma();
    let eta_max = (1.0 - gamma) / beta;
    if !(beta > 0.0) {
        return Err(Error::Invalid(format!("beta must be positive, got {beta}")));
    }
    if !(eta > 0.0 && eta <= eta_max * (1.0 + 1e-12)) {
        return Err(Error::Invalid(format!("step {eta} outside (0, {eta_max}]")));
    }
    if policy.min_prob() <= 0.0 {
        return Err(Error::Invalid("policy has a nonpositive entry".into()));
    }
    let (n, m) = (cmdp.n(), cmdp.m());
    let (_, q) = soft_policy_evaluation(cmdp, policy, r, beta)?;
    let keep = (1.0 - eta * beta / (1.0 - gamma)).max(0.0);
    let mut logits = vec![0.0; n * m];
    for s in 0..n {
        for a in 0..m {
            let mut l = eta * q[sa_index(n, s, a)] / (1.0 - gamma);
            if keep > 0.0 {
                l += keep * policy.prob(s, a).ln();
            }
            logits[s * m + a] = l;
        }
        let row = &mut logits[s * m..(s + 1) * m];
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - top).exp());
    }
    Policy::from_weights(n, m, logits)
}

/// Settings of [`gda_irl`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdaConfig {
    /// Step size for `w` and `ξ`.
    pub eta: f64,
    /// NPG step size; `None` means `(1−γ)/β` (soft policy iteration).
    pub npg_eta: Option<f64>,
    pub episodes: usize,
    pub beta: f64,
    /// Recorded for reproducibility; the exact-occupancy iteration itself is
    /// deterministic.
    pub seed: u64,
    pub record_every: usize,
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            npg_eta: None,
            episodes: 20_000,
            beta: 1.0,
            seed: 0,
            record_every: 100,
        }
    }
}

impl GdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.episodes == 0 {
            return Err(Error::Invalid("episodes must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if self.record_every == 0 {
            return Err(Error::Invalid("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One recorded GDA step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub episode: usize,
    pub ipm: f64,
    /// `max(0, max_i Ψᵢᵀμ − bᵢ)`.
    pub max_violation: f64,
    pub lagrangian: f64,
    pub weight_norm: f64,
    pub min_dual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrlResult {
    pub weights: Vec<f64>,
    pub reward: Vec<f64>,
    pub dual: Vec<f64>,
    pub policy: Policy,
    pub occupancy: OccupancyMeasure,
    pub trace: Vec<TraceEntry>,
}

impl IrlResult {
    /// The trace as CSV with columns `episode,ipm,max_violation,lagrangian`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("episode,ipm,max_violation,lagrangian\n");
        for e in &self.trace {
            out.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                e.episode, e.ipm, e.max_violation, e.lagrangian
            ));
        }
        out
    }
}

/// Gradient descent-ascent for constrained entropy-regularized IRL.
///
/// Per episode: `r ← Φw − Ψξ`, one NPG step on `π`, exact `μ^π`, then
/// `w ← Proj(w − ηΦᵀ(μ^π − μ_E))` and `ξ ← (ξ − η(b − Ψᵀμ^π))₊`.
/// Pass `cmdp.without_constraints()` for IRL over `M`.
pub fn gda_irl(
    cmdp: &Cmdp,
    class: &RewardClass,
    mu_expert: &OccupancyMeasure,
    config: &GdaConfig,
) -> Result<IrlResult> {
    config.validate()?;
    if class.norm == NormKind::Unbounded {
        return Err(Error::Invalid("gradient descent-ascent needs a bounded reward class".into()));
    }
    let nm = cmdp.nm();
    if class.phi.rows() != nm {
        return Err(Error::Dimension(format!(
            "features have {} rows, CMDP has {nm} state-action pairs",
            class.phi.rows()
        )));
    }
    if mu_expert.n() != cmdp.n() || mu_expert.m() != cmdp.m() {
        return Err(Error::Dimension("expert occupancy does not match the CMDP".into()));
    }
    let (n, m, k, beta) = (cmdp.n(), cmdp.m(), cmdp.k(), config.beta);
    let npg_eta = config.npg_eta.unwrap_or((1.0 - cmdp.gamma()) / beta);
    let reg = Regularizer::Entropy { beta };
    let expert_moment = class.phi.tr_mul_vec(mu_expert.values());

    let mut policy = Policy::uniform(n, m);
    let mut w = vec![0.0; class.dim()];
    let mut xi = vec![0.0; k];
    let mut mu = occupancy_from_policy(cmdp, &policy)?;
    let mut trace = Vec::new();
    for episode in 1..=config.episodes {
        let reward: Vec<f64> = class
            .reward(&w)
            .iter()
            .zip(cmdp.psi().mul_vec(&xi))
            .map(|(a, b)| a - b)
            .collect();
        policy = npg_step(cmdp, &policy, &reward, beta, npg_eta)?;
        mu = occupancy_from_policy(cmdp, &policy)?;

        let moment = class.phi.tr_mul_vec(mu.values());
        let grad_w: Vec<f64> = moment.iter().zip(&expert_moment).map(|(a, b)| a - b).collect();
        let costs = cmdp.constraint_costs(&mu);
        let slack: Vec<f64> = cmdp.b().iter().zip(&costs).map(|(b, c)| b - c).collect();

        let lagrangian = dot(&w, &grad_w) - regularizer_value(&mu, &reg) + dot(&xi, &slack);
        if !lagrangian.is_finite() || lagrangian.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged(format!(
                "Lagrangian reached {lagrangian:e} at episode {episode}"
            )));
        }

        let stepped: Vec<f64> = w.iter().zip(&grad_w).map(|(x, g)| x - config.eta * g).collect();
        w = class.project(&stepped);
        for (x, s) in xi.iter_mut().zip(&slack) {
            *x = (*x - config.eta * s).max(0.0);
        }

        if episode % config.record_every == 0 || episode == config.episodes {
            let ipm = match class.norm {
                NormKind::L1 => class.radius * norm_inf(&grad_w),
                _ => class.radius * norm_2(&grad_w),
            };
            let max_violation = slack.iter().fold(0.0f64, |acc, s| acc.max(-s));
            trace.push(TraceEntry {
                episode,
                ipm,
                max_violation,
                lagrangian,
                weight_norm: class.weight_norm(&w),
                min_dual: xi.iter().copied().fold(f64::INFINITY, f64::min),
            });
            debug!("episode {episode}: ipm {ipm:.3e}, violation {max_violation:.3e}");
        }
    }
    if let Some(last) = trace.last() {
        info!(
            "gradient descent-ascent finished: ipm {:.3e}, violation {:.3e}",
            last.ipm, last.max_violation
        );
    }
    Ok(IrlResult {
        reward: class.reward(&w),
        weights: w,
        dual: xi,
        policy,
        occupancy: mu,
        trace,
    })
}

/// `(N, T)` with `N = ⌈32R²/ε² · log(2d/δ)⌉` and `T = ⌈log(ε/(8R)) / log γ⌉`.
pub fn sample_size(epsilon: f64, delta: f64, feature_bound: f64, d: usize, gamma: f64) -> Result<(u64, u64)> {
    let r = feature_bound;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Invalid(format!("feature bound must be positive, got {r}")));
    }
    if !(epsilon > 0.0 && epsilon <= 8.0 * r) {
        return Err(Error::Invalid(format!("epsilon must lie in (0, 8R], got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if d == 0 {
        return Err(Error::Invalid("feature dimension must be positive".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Invalid(format!("discount {gamma} outside (0, 1)")));
    }
    let n = (32.0 * r * r / (epsilon * epsilon) * (2.0 * d as f64 / delta).ln()).ceil();
    let t = ((epsilon / (8.0 * r)).ln() / gamma.ln()).ceil();
    Ok((n as u64, t.max(0.0) as u64))
}
