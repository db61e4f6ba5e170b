//! Learning from sampled expert trajectories: policy and reward errors as the
//! number of demonstrations grows, plus the policy-error bound check.

use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::gridworld::{build_gridworld, reward_class_r2, sample_demonstrations, GridworldConfig};
use super::{config_hash, quantile, thread_pool, write_json, VERSION};
use crate::cmdp::{Cmdp, OccupancyMeasure, Policy};
use crate::error::{Error, Result};
use crate::forward::{solve_rl_constrained, SolverConfig};
use crate::identifiability::potential_shaping_distance;
use crate::irl::{estimate_occupancy, gda_irl, sample_size, GdaConfig, NormKind, RewardClass};

/// Reported quantiles.
pub const QUANTILES: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiniteSampleConfig {
    pub grid: GridworldConfig,
    pub trajectory_counts: Vec<usize>,
    pub horizon: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub methods: Vec<SampleMethod>,
    pub l1_radius: f64,
    pub l2_radius: f64,
    pub gda: GdaConfig,
    pub solver: SolverConfig,
}

impl Default for FiniteSampleConfig {
    fn default() -> Self {
        Self {
            grid: GridworldConfig::default(),
            trajectory_counts: vec![10, 100, 1000],
            horizon: 1000,
            seeds: 10,
            base_seed: 0,
            methods: SampleMethod::ALL.to_vec(),
            l1_radius: 1.0,
            l2_radius: std::f64::consts::FRAC_1_SQRT_2,
            gda: GdaConfig {
                eta: 0.5,
                episodes: 20_000,
                record_every: 1_000,
                ..GdaConfig::default()
            },
            solver: SolverConfig::default(),
        }
    }
}

/// The four variants: weight norm × feasible set, all over one-hot state features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMethod {
    L1Constrained,
    L1Unconstrained,
    L2Constrained,
    L2Unconstrained,
}

impl SampleMethod {
    pub const ALL: [SampleMethod; 4] = [
        SampleMethod::L1Constrained,
        SampleMethod::L1Unconstrained,
        SampleMethod::L2Constrained,
        SampleMethod::L2Unconstrained,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SampleMethod::L1Constrained => "IRL_R2l1_F",
            SampleMethod::L1Unconstrained => "IRL_R2l1_M",
            SampleMethod::L2Constrained => "IRL_R2l2_F",
            SampleMethod::L2Unconstrained => "IRL_R2l2_M",
        }
    }

    fn norm(&self) -> NormKind {
        match self {
            SampleMethod::L1Constrained | SampleMethod::L1Unconstrained => NormKind::L1,
            _ => NormKind::L2,
        }
    }

    fn constrained(&self) -> bool {
        matches!(self, SampleMethod::L1Constrained | SampleMethod::L2Constrained)
    }
}

/// One (N, seed, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub method: SampleMethod,
    pub count: usize,
    pub seed: u64,
    /// `Σ_s ‖π_E(·|s) − π̂(·|s)‖₁`.
    pub policy_error: f64,
    /// Distance of `r̂` to `r_E + span(1)`.
    pub reward_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub method: SampleMethod,
    pub count: usize,
    pub quantile: f64,
    pub policy_error: f64,
    pub reward_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteSampleReport {
    pub runs: Vec<SampleRun>,
    pub summary: Vec<QuantileRow>,
    /// Cells whose IRL run failed, with the error.
    pub failures: Vec<(SampleMethod, usize, u64, String)>,
    pub config_hash: String,
}

impl FiniteSampleReport {
    pub fn summary_row(&self, method: SampleMethod, count: usize, q: f64) -> Option<&QuantileRow> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.count == count && r.quantile == q)
    }

    /// `metrics.csv` contents.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("method,N,quantile,policy_error,reward_error\n");
        for r in &self.summary {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e}\n",
                r.method.label(),
                r.count,
                r.quantile,
                r.policy_error,
                r.reward_error
            ));
        }
        out
    }

    /// Per-run values.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("method,N,seed,policy_error,reward_error\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e}\n",
                r.method.label(),
                r.count,
                r.seed,
                r.policy_error,
                r.reward_error
            ));
        }
        out
    }
}

/// Seed for the demonstrations of realization `index` with `count` trajectories.
pub fn cell_seed(base: u64, count: usize, index: usize) -> u64 {
    // splitmix64 finalizer over a packed key.
    let mut z = base
        .wrapping_add((count as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Expert {
    env: Cmdp,
    policy: Policy,
    occupancy: OccupancyMeasure,
    reward: Vec<f64>,
}

fn expert(grid: &GridworldConfig, solver: &SolverConfig) -> Result<Expert> {
    let env = build_gridworld(grid)?;
    let reward = grid.reward();
    let sol = solve_rl_constrained(&env, &reward, grid.beta, solver)?;
    Ok(Expert {
        env,
        policy: sol.policy,
        occupancy: sol.occupancy,
        reward,
    })
}

fn class_for(config: &FiniteSampleConfig, method: SampleMethod) -> Result<RewardClass> {
    let radius = match method.norm() {
        NormKind::L1 => config.l1_radius,
        _ => config.l2_radius,
    };
    reward_class_r2(&config.grid, method.norm(), radius)
}

/// For every `N` and seed, samples demonstrations from the expert, estimates
/// its occupancy and runs the four IRL variants on the estimate.
pub fn run_finite_sample_experiment(
    config: &FiniteSampleConfig,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<FiniteSampleReport> {
    if config.trajectory_counts.is_empty() {
        return Err(Error::Invalid("trajectory_counts is empty".into()));
    }
    if config.seeds == 0 {
        return Err(Error::Invalid("seeds must be at least 1".into()));
    }
    let ex = expert(&config.grid, &config.solver)?;
    let (n, m) = (ex.env.n(), ex.env.m());
    if config.methods.is_empty() {
        return Err(Error::Invalid("methods is empty".into()));
    }
    let classes = config
        .methods
        .iter()
        .map(|&meth| class_for(config, meth))
        .collect::<Result<Vec<_>>>()?;
    let unconstrained = ex.env.without_constraints();
    let gda = GdaConfig {
        beta: config.grid.beta,
        ..config.gda
    };
    let cells: Vec<(usize, usize)> = config
        .trajectory_counts
        .iter()
        .flat_map(|&count| (0..config.seeds).map(move |i| (count, i)))
        .collect();
    let pool = thread_pool(jobs.max(1))?;
    type CellOut = Vec<std::result::Result<SampleRun, (SampleMethod, usize, u64, String)>>;
    let per_cell: Vec<Result<CellOut>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(count, index)| {
                let seed = cell_seed(config.base_seed, count, index);
                let demos = sample_demonstrations(&ex.env, &ex.policy, count, config.horizon, seed)?;
                let mu_hat = estimate_occupancy(&demos, ex.env.gamma(), n, m)?;
                let mut out = Vec::with_capacity(config.methods.len());
                for (method, class) in config.methods.iter().zip(&classes) {
                    let env = if method.constrained() { &ex.env } else { &unconstrained };
                    let run = gda_irl(env, class, &mu_hat, &GdaConfig { seed, ..gda });
                    out.push(match run {
                        Ok(res) => Ok(SampleRun {
                            method: *method,
                            count,
                            seed,
                            policy_error: ex.policy.l1_distance(&res.policy),
                            reward_error: potential_shaping_distance(&res.reward, &ex.reward)?,
                        }),
                        Err(e) => {
                            warn!("{} N={count} seed={seed}: {e}", method.label());
                            Err((*method, count, seed, e.to_string()))
                        }
                    });
                }
                Ok(out)
            })
            .collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for cell in per_cell {
        for item in cell? {
            match item {
                Ok(run) => runs.push(run),
                Err(f) => failures.push(f),
            }
        }
    }
    let mut summary = Vec::new();
    for &method in &config.methods {
        for &count in &config.trajectory_counts {
            let sel: Vec<&SampleRun> = runs
                .iter()
                .filter(|r| r.method == method && r.count == count)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let pe: Vec<f64> = sel.iter().map(|r| r.policy_error).collect();
            let re: Vec<f64> = sel.iter().map(|r| r.reward_error).collect();
            for q in QUANTILES {
                summary.push(QuantileRow {
                    method,
                    count,
                    quantile: q,
                    policy_error: quantile(&pe, q),
                    reward_error: quantile(&re, q),
                });
            }
            info!(
                "{} N={count}: median policy error {:.3e}, reward error {:.3e}",
                method.label(),
                quantile(&pe, 0.5),
                quantile(&re, 0.5)
            );
        }
    }
    let report = FiniteSampleReport {
        runs,
        summary,
        failures,
        config_hash: config_hash(config)?,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.csv"), report.metrics_csv())?;
        fs::write(dir.join("runs.csv"), report.runs_csv())?;
        #[derive(Serialize)]
        struct Meta<'a> {
            experiment: &'static str,
            version: &'static str,
            config_hash: &'a str,
            config: &'a FiniteSampleConfig,
            demo_seeds: Vec<(usize, usize, u64)>,
            failures: &'a [(SampleMethod, usize, u64, String)],
        }
        let meta = Meta {
            experiment: "finite_sample",
            version: VERSION,
            config_hash: &report.config_hash,
            config,
            demo_seeds: cells
                .iter()
                .map(|&(c, i)| (c, i, cell_seed(config.base_seed, c, i)))
                .collect(),
            failures: &report.failures,
        };
        write_json(&dir.join("run_meta.json"), &meta)?;
    }
    Ok(report)
}

/// Outcome of the policy-error bound check at the sample size prescribed for
/// accuracy `epsilon`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyBoundCheck {
    pub epsilon: f64,
    pub delta: f64,
    pub count: u64,
    pub horizon: u64,
    /// `√(2ε/β)`.
    pub bound: f64,
    /// `E_{s∼ν_E} ‖π̂(·|s) − π_E(·|s)‖₁` per seed.
    pub errors: Vec<f64>,
    pub within_bound: usize,
}

/// Samples `(N, T)` from [`sample_size`] with the l1 state-feature class,
/// recovers a reward by constrained IRL, re-solves the forward problem and
/// measures the expert-weighted policy error for each seed.
pub fn run_policy_bound_check(
    config: &FiniteSampleConfig,
    epsilon: f64,
    delta: f64,
    jobs: usize,
) -> Result<PolicyBoundCheck> {
    let ex = expert(&config.grid, &config.solver)?;
    let (n, m) = (ex.env.n(), ex.env.m());
    let class = reward_class_r2(&config.grid, NormKind::L1, config.l1_radius)?;
    let (count, horizon) = sample_size(
        epsilon,
        delta,
        class.feature_bound() * config.l1_radius,
        class.dim(),
        ex.env.gamma(),
    )?;
    let beta = config.grid.beta;
    let gda = GdaConfig { beta, ..config.gda };
    let nu = ex.occupancy.state_marginal();
    let nu_total: f64 = nu.iter().sum();
    let pool = thread_pool(jobs.max(1))?;
    let errors: Vec<Result<f64>> = pool.install(|| {
        use rayon::prelude::*;
        (0..config.seeds)
            .into_par_iter()
            .map(|i| {
                let seed = cell_seed(config.base_seed ^ 0xB0D5, count as usize, i);
                let demos = sample_demonstrations(&ex.env, &ex.policy, count as usize, horizon as usize, seed)?;
                let mu_hat = estimate_occupancy(&demos, ex.env.gamma(), n, m)?;
                let res = gda_irl(&ex.env, &class, &mu_hat, &GdaConfig { seed, ..gda })?;
                let pi_hat = solve_rl_constrained(&ex.env, &res.reward, beta, &config.solver)?.policy;
                Ok((0..n)
                    .map(|s| {
                        let d: f64 = (0..m).map(|a| (pi_hat.prob(s, a) - ex.policy.prob(s, a)).abs()).sum();
                        nu[s] / nu_total * d
                    })
                    .sum())
            })
            .collect()
    });
    let errors = errors.into_iter().collect::<Result<Vec<f64>>>()?;
    let bound = (2.0 * epsilon / beta).sqrt();
    let within_bound = errors.iter().filter(|&&e| e <= bound).count();
    Ok(PolicyBoundCheck {
        epsilon,
        delta,
        count,
        horizon,
        bound,
        errors,
        within_bound,
    })
}
