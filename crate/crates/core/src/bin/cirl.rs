use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use cirl::experiments::{
    build_gridworld, reward_class_r1, reward_class_r2, run_finite_sample_experiment,
    run_generalization_experiment, FiniteSampleConfig, GeneralizationConfig, GridworldConfig,
};
use cirl::forward::{soft_value_iteration, solve_rl_constrained, SolverConfig};
use cirl::identifiability::{rank_condition, reward_in_solution_cone};
use cirl::io::{
    apply_overrides, load_cmdp, load_occupancy, load_reward, load_reward_class, read_demonstrations,
    read_json, save_cmdp, save_reward_class, write_json,
};
use cirl::irl::{estimate_occupancy, gda_irl, sample_size, GdaConfig, NormKind};
use cirl::{Error, Regularizer, Result};

#[derive(Parser)]
#[command(name = "cirl", version = cirl::experiments::VERSION, about = "Constrained MDP and constrained IRL toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Random seed for sampling and experiment seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiments (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Regularization strength.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// GDA episodes.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Config override `key=value` (dotted keys, JSON values); repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the (constrained) regularized RL problem.
    Solve {
        #[arg(long)]
        env: PathBuf,
        /// Reward file (`[s][a]`); defaults to the reward stored in the env.
        #[arg(long)]
        reward: Option<PathBuf>,
        /// Ignore the constraints and run soft value iteration.
        #[arg(long)]
        unconstrained: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover a reward from demonstrations or an exact occupancy.
    Irl {
        #[arg(long)]
        env: PathBuf,
        /// Reward class file.
        #[arg(long)]
        features: PathBuf,
        /// Demonstrations, one JSON trajectory per line.
        #[arg(long, conflicts_with = "occupancy", required_unless_present = "occupancy")]
        demos: Option<PathBuf>,
        /// Exact expert occupancy (`[s][a]`).
        #[arg(long)]
        occupancy: Option<PathBuf>,
        /// Optimize over all occupancies, ignoring the constraints.
        #[arg(long)]
        unconstrained: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank condition and, given an expert reward, solution-cone membership.
    Identify {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Expert occupancy; computed from the env reward if omitted.
        #[arg(long)]
        occupancy: Option<PathBuf>,
        /// Reward to test for membership (defaults to the env reward).
        #[arg(long)]
        reward: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the gridworld CMDP (and optionally its reward classes).
    GridworldGen {
        #[arg(long)]
        out: PathBuf,
        /// Also write R1.json and R2.json here.
        #[arg(long)]
        features_dir: Option<PathBuf>,
        /// Norm of the written classes.
        #[arg(long, default_value = "l1")]
        norm: String,
        #[arg(long, default_value_t = 50.0)]
        radius: f64,
    },
    /// Generalization of rewards learned from the exact expert occupancy.
    ExperimentGeneralization {
        #[arg(long)]
        out: PathBuf,
        /// Base config as JSON; `--set` applies on top.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Policy and reward error versus the number of demonstrations.
    ExperimentFiniteSample {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Demonstrations needed for accuracy `eps` with confidence `1 − delta`.
    SampleSize {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "R")]
        r: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        gamma: f64,
    },
}

fn parse_norm(s: &str) -> Result<NormKind> {
    match s {
        "l1" => Ok(NormKind::L1),
        "l2" => Ok(NormKind::L2),
        "unbounded" => Ok(NormKind::Unbounded),
        _ => Err(Error::Invalid(format!("unknown norm '{s}' (l1, l2, unbounded)"))),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            use std::io::Write;
            writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value)?)?;
            Ok(())
        }
    }
}

fn solver_config(common: &Common) -> Result<SolverConfig> {
    let mut cfg = apply_overrides(&SolverConfig::default(), &common.set)?;
    if let Some(tol) = common.tol {
        cfg.tol = tol;
    }
    Ok(cfg)
}

fn load_base<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map(read_json).transpose().map(Option::unwrap_or_default)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let common = &cli.common;
    let beta = common.beta.unwrap_or(1.0);
    match cli.command {
        Command::Solve { env, reward, unconstrained, out } => {
            let cmdp = load_cmdp(&env)?;
            let r = match reward {
                Some(p) => load_reward(&p, cmdp.n(), cmdp.m())?,
                None => cmdp
                    .reward()
                    .ok_or_else(|| Error::Invalid("no reward given and none stored in the env".into()))?
                    .to_vec(),
            };
            let cfg = solver_config(common)?;
            if unconstrained || cmdp.k() == 0 {
                let sol = soft_value_iteration(&cmdp, &r, beta, cfg.tol, cfg.max_iter)?;
                emit(out.as_deref(), &sol)?;
                if !sol.converged {
                    return Ok(ExitCode::from(2));
                }
            } else {
                emit(out.as_deref(), &solve_rl_constrained(&cmdp, &r, beta, &cfg)?)?;
            }
        }
        Command::Irl { env, features, demos, occupancy, unconstrained, out } => {
            let mut cmdp = load_cmdp(&env)?;
            let (n, m) = (cmdp.n(), cmdp.m());
            let class = load_reward_class(&features, n, m)?;
            let mu = match (demos, occupancy) {
                (Some(d), _) => estimate_occupancy(&read_demonstrations(&d, n, m)?, cmdp.gamma(), n, m)?,
                (None, Some(o)) => load_occupancy(&o, n, m)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            if unconstrained {
                cmdp = cmdp.without_constraints();
            }
            let mut gda = apply_overrides(&GdaConfig { beta, ..GdaConfig::default() }, &common.set)?;
            if let Some(e) = common.episodes {
                gda.episodes = e;
            }
            if let Some(s) = common.seed {
                gda.seed = s;
            }
            let res = gda_irl(&cmdp, &class, &mu, &gda)?;
            if let Some(path) = &out {
                std::fs::write(path.with_extension("trace.csv"), res.trace_csv())?;
            }
            emit(out.as_deref(), &res)?;
        }
        Command::Identify { env, features, occupancy, reward, out } => {
            let cmdp = load_cmdp(&env)?;
            let (n, m) = (cmdp.n(), cmdp.m());
            let class = load_reward_class(&features, n, m)?;
            let mut report = rank_condition(&class, &cmdp)?;
            let r = match reward {
                Some(p) => Some(load_reward(&p, n, m)?),
                None => cmdp.reward().map(<[f64]>::to_vec),
            };
            let mu = match occupancy {
                Some(p) => Some(load_occupancy(&p, n, m)?),
                None => match &r {
                    Some(r) => Some(solve_rl_constrained(&cmdp, r, beta, &solver_config(common)?)?.occupancy),
                    None => None,
                },
            };
            if let Some(mu) = &mu {
                let tol = common.tol.unwrap_or(1e-6);
                report.active_sets = Some(cirl::identifiability::active_sets(&cmdp, mu, tol)?);
                if let Some(r) = &r {
                    let reg = Regularizer::Entropy { beta };
                    report.membership = Some(reward_in_solution_cone(&cmdp, mu, r, &reg, tol)?);
                }
            }
            if common.json || out.is_some() {
                emit(out.as_deref(), &report)?;
            } else {
                println!("rank(Phi)           {}", report.rank_phi);
                println!("rank([E-gP, Psi])   {}", report.rank_xi);
                println!("rank(joint)         {}", report.rank_joint);
                println!("shaping dimension   {}", report.shaping_dimension);
                println!("condition_met       {}", report.condition_met);
                if let Some(mem) = report.membership {
                    println!("membership          {mem}");
                }
            }
        }
        Command::GridworldGen { out, features_dir, norm, radius } => {
            let grid = apply_overrides(&GridworldConfig::default(), &common.set)?;
            let grid = GridworldConfig { beta, ..grid };
            let cmdp = build_gridworld(&grid)?;
            save_cmdp(&out, &cmdp)?;
            if let Some(dir) = features_dir {
                let norm = parse_norm(&norm)?;
                std::fs::create_dir_all(&dir)?;
                save_reward_class(&dir.join("R1.json"), &reward_class_r1(&grid, norm, radius)?, cmdp.n(), cmdp.m())?;
                save_reward_class(&dir.join("R2.json"), &reward_class_r2(&grid, norm, radius)?, cmdp.n(), cmdp.m())?;
            }
        }
        Command::ExperimentGeneralization { out, config } => {
            let mut cfg: GeneralizationConfig = apply_overrides(&load_base(config.as_deref())?, &common.set)?;
            if let Some(e) = common.episodes {
                cfg.gda.episodes = e;
            }
            if let Some(b) = common.beta {
                cfg.grid.beta = b;
            }
            if let Some(t) = common.tol {
                cfg.solver.tol = t;
            }
            let report = run_generalization_experiment(&cfg, Some(&out), jobs(common))?;
            if common.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.metrics_csv());
            }
            if report.outcomes.iter().any(|o| o.error.is_some()) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::ExperimentFiniteSample { out, config } => {
            let mut cfg: FiniteSampleConfig = apply_overrides(&load_base(config.as_deref())?, &common.set)?;
            if let Some(e) = common.episodes {
                cfg.gda.episodes = e;
            }
            if let Some(b) = common.beta {
                cfg.grid.beta = b;
            }
            if let Some(t) = common.tol {
                cfg.solver.tol = t;
            }
            if let Some(s) = common.seed {
                cfg.base_seed = s;
            }
            let report = run_finite_sample_experiment(&cfg, Some(&out), jobs(common))?;
            if common.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.metrics_csv());
            }
            if !report.failures.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::SampleSize { eps, delta, r, d, gamma } => {
            let (n, t) = sample_size(eps, delta, r, d, gamma)?;
            if common.json {
                println!("{}", json!({ "N": n, "T": t }));
            } else {
                println!("N={n} T={t}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn jobs(common: &Common) -> usize {
    common
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CIRL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_convergence_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
