//! Generalization of learned rewards from the training thresholds `b₀` to a
//! test setting with inactive constraints.

use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::gridworld::{build_gridworld, reward_class_r1, reward_class_r2, GridworldConfig};
use super::{config_hash, policy_grid, reward_grid, thread_pool, write_json, VERSION};
use crate::cmdp::{objective, Cmdp, OccupancyMeasure, Policy, Regularizer};
use crate::error::Result;
use crate::forward::{solve_rl_constrained, SolverConfig};
use crate::irl::{gda_irl, GdaConfig, NormKind, RewardClass};
use crate::numerics::{norm_1, sub};

/// Reward class × feasible set used during IRL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    R1Constrained,
    R2Constrained,
    R1Unconstrained,
    R2Unconstrained,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::R1Constrained,
        Method::R2Constrained,
        Method::R1Unconstrained,
        Method::R2Unconstrained,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::R1Constrained => "IRL_R1_F",
            Method::R2Constrained => "IRL_R2_F",
            Method::R1Unconstrained => "IRL_R1_M",
            Method::R2Unconstrained => "IRL_R2_M",
        }
    }

    pub fn constrained(&self) -> bool {
        matches!(self, Method::R1Constrained | Method::R2Constrained)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneralizationConfig {
    pub grid: GridworldConfig,
    /// Thresholds of the test setting.
    pub b_test: Vec<f64>,
    pub norm: NormKind,
    /// Weight-ball radius; large enough that the ball is inactive.
    pub radius: f64,
    pub gda: GdaConfig,
    pub solver: SolverConfig,
}

impl Default for GeneralizationConfig {
    fn default() -> Self {
        Self {
            grid: GridworldConfig::default(),
            b_test: vec![1e3, 1e3],
            norm: NormKind::L1,
            radius: 50.0,
            gda: GdaConfig {
                eta: 0.5,
                episodes: 200_000,
                record_every: 1_000,
                ..GdaConfig::default()
            },
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMetrics {
    /// `‖μ^{E,b} − μ^b‖₁`.
    pub delta_mu: f64,
    /// `J(μ^{E,b}, r_E) − J(μ^b, r_E)`.
    pub delta_j: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub train: Option<RegimeMetrics>,
    pub test: Option<RegimeMetrics>,
    pub reward: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub dual: Option<Vec<f64>>,
    pub policy: Option<Policy>,
    /// Error message when IRL or the evaluation solve failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub outcomes: Vec<MethodOutcome>,
    pub expert_dual: Vec<f64>,
    pub config_hash: String,
}

impl GeneralizationReport {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    /// `metrics.csv` contents.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("method,b_regime,delta_mu,delta_j,status\n");
        for o in &self.outcomes {
            for (regime, metrics) in [("train", &o.train), ("test", &o.test)] {
                match metrics {
                    Some(m) => out.push_str(&format!(
                        "{},{regime},{:.6e},{:.6e},ok\n",
                        o.method.label(),
                        m.delta_mu,
                        m.delta_j
                    )),
                    None => out.push_str(&format!(
                        "{},{regime},nan,nan,{}\n",
                        o.method.label(),
                        o.error.as_deref().unwrap_or("failed").replace(',', ";")
                    )),
                }
            }
        }
        out
    }
}

fn regime_metrics(
    env: &Cmdp,
    expert: &OccupancyMeasure,
    r_expert: &[f64],
    learned: &[f64],
    beta: f64,
    solver: &SolverConfig,
) -> Result<RegimeMetrics> {
    let reg = Regularizer::Entropy { beta };
    let mu = solve_rl_constrained(env, learned, beta, solver)?.occupancy;
    Ok(RegimeMetrics {
        delta_mu: norm_1(&sub(expert.values(), mu.values())),
        delta_j: objective(expert, r_expert, &reg)? - objective(&mu, r_expert, &reg)?,
    })
}

struct Setting {
    train_env: Cmdp,
    test_env: Cmdp,
    expert_train: OccupancyMeasure,
    expert_test: OccupancyMeasure,
    r_expert: Vec<f64>,
}

fn run_method(
    method: Method,
    class: &RewardClass,
    setting: &Setting,
    config: &GeneralizationConfig,
) -> MethodOutcome {
    let mut outcome = MethodOutcome {
        method,
        train: None,
        test: None,
        reward: None,
        weights: None,
        dual: None,
        policy: None,
        error: None,
    };
    let irl_env = if method.constrained() {
        setting.train_env.clone()
    } else {
        setting.train_env.without_constraints()
    };
    let gda = GdaConfig {
        beta: config.grid.beta,
        ..config.gda
    };
    let result = match gda_irl(&irl_env, class, &setting.expert_train, &gda) {
        Ok(r) => r,
        Err(e) => {
            warn!("{}: {e}", method.label());
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    let beta = config.grid.beta;
    let eval = |env: &Cmdp, expert: &OccupancyMeasure| {
        regime_metrics(env, expert, &setting.r_expert, &result.reward, beta, &config.solver)
    };
    match (
        eval(&setting.train_env, &setting.expert_train),
        eval(&setting.test_env, &setting.expert_test),
    ) {
        (Ok(train), Ok(test)) => {
            info!(
                "{}: train dmu {:.3e}, test dmu {:.3e}",
                method.label(),
                train.delta_mu,
                test.delta_mu
            );
            outcome.train = Some(train);
            outcome.test = Some(test);
        }
        (Err(e), _) | (_, Err(e)) => outcome.error = Some(e.to_string()),
    }
    outcome.reward = Some(result.reward);
    outcome.weights = Some(result.weights);
    outcome.dual = Some(result.dual);
    outcome.policy = Some(result.policy);
    outcome
}

#[derive(Serialize)]
struct RunMeta<'a> {
    experiment: &'static str,
    version: &'static str,
    config_hash: &'a str,
    config: &'a GeneralizationConfig,
    expert_dual: &'a [f64],
    learned_weights: Vec<(&'static str, &'a Option<Vec<f64>>)>,
    learned_dual: Vec<(&'static str, &'a Option<Vec<f64>>)>,
}

/// Runs the four IRL variants from the exact expert occupancy and evaluates
/// the learned rewards at the training and test thresholds.
///
/// Writes `metrics.csv`, `reward_grid.json`, `policy_grid.json` and
/// `run_meta.json` into `out_dir` when given.
pub fn run_generalization_experiment(
    config: &GeneralizationConfig,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<GeneralizationReport> {
    let train_env = build_gridworld(&config.grid)?;
    let test_env = train_env.with_thresholds(config.b_test.clone())?;
    let r_expert = config.grid.reward();
    let beta = config.grid.beta;
    let expert = solve_rl_constrained(&train_env, &r_expert, beta, &config.solver)?;
    let expert_test = solve_rl_constrained(&test_env, &r_expert, beta, &config.solver)?;
    let setting = Setting {
        train_env,
        test_env,
        expert_train: expert.occupancy.clone(),
        expert_test: expert_test.occupancy,
        r_expert,
    };
    let r1 = reward_class_r1(&config.grid, config.norm, config.radius)?;
    let r2 = reward_class_r2(&config.grid, config.norm, config.radius)?;
    let pool = thread_pool(jobs.max(1))?;
    let outcomes: Vec<MethodOutcome> = pool.install(|| {
        use rayon::prelude::*;
        Method::ALL
            .par_iter()
            .map(|&method| {
                let class = match method {
                    Method::R1Constrained | Method::R1Unconstrained => &r1,
                    _ => &r2,
                };
                run_method(method, class, &setting, config)
            })
            .collect()
    });
    let report = GeneralizationReport {
        outcomes,
        expert_dual: expert.dual.clone(),
        config_hash: config_hash(config)?,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.csv"), report.metrics_csv())?;
        let mut rewards = serde_json::Map::new();
        rewards.insert("expert".into(), serde_json::to_value(reward_grid(&config.grid, &setting.r_expert))?);
        let mut policies = serde_json::Map::new();
        policies.insert("expert".into(), serde_json::to_value(policy_grid(&config.grid, &expert.policy))?);
        for o in &report.outcomes {
            if let (Some(r), Some(p)) = (&o.reward, &o.policy) {
                rewards.insert(o.method.label().into(), serde_json::to_value(reward_grid(&config.grid, r))?);
                policies.insert(o.method.label().into(), serde_json::to_value(policy_grid(&config.grid, p))?);
            }
        }
        write_json(&dir.join("reward_grid.json"), &rewards)?;
        write_json(&dir.join("policy_grid.json"), &policies)?;
        let meta = RunMeta {
            experiment: "generalization",
            version: VERSION,
            config_hash: &report.config_hash,
            config,
            expert_dual: &report.expert_dual,
            learned_weights: report.outcomes.iter().map(|o| (o.method.label(), &o.weights)).collect(),
            learned_dual: report.outcomes.iter().map(|o| (o.method.label(), &o.dual)).collect(),
        };
        write_json(&dir.join("run_meta.json"), &meta)?;
    }
    Ok(report)
}
