//! Sample expert demonstrations in the gridworld, estimate the occupancy and
//! recover a reward with gradient descent-ascent.
//!
//! `cargo run --release --example irl_from_demonstrations -- [N] [T] [episodes]`

use cirl::experiments::{build_gridworld, reward_class_r2, reward_grid, sample_demonstrations, GridworldConfig};
use cirl::forward::{solve_rl_constrained, SolverConfig};
use cirl::identifiability::potential_shaping_distance;
use cirl::irl::{estimate_occupancy, gda_irl, ipm_distance, GdaConfig, NormKind};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> cirl::Result<()> {
    let (count, horizon, episodes) = (arg(1, 200usize), arg(2, 200usize), arg(3, 5_000usize));
    let grid = GridworldConfig::default();
    let cmdp = build_gridworld(&grid)?;
    let r_expert = grid.reward();
    let expert = solve_rl_constrained(&cmdp, &r_expert, grid.beta, &SolverConfig::default())?;

    let demos = sample_demonstrations(&cmdp, &expert.policy, count, horizon, 42)?;
    let mu_hat = estimate_occupancy(&demos, cmdp.gamma(), cmdp.n(), cmdp.m())?;
    let class = reward_class_r2(&grid, NormKind::L1, 1.0)?;
    println!("IPM(estimate, expert) = {:.3e}", ipm_distance(&class, &mu_hat, &expert.occupancy)?.value());

    let cfg = GdaConfig { episodes, record_every: episodes / 5, ..GdaConfig::default() };
    let res = gda_irl(&cmdp, &class, &mu_hat, &cfg)?;
    print!("{}", res.trace_csv());
    println!("policy error {:.3e}", expert.policy.l1_distance(&res.policy));
    println!("reward error {:.3e}", potential_shaping_distance(&res.reward, &r_expert)?);
    for row in reward_grid(&grid, &res.reward) {
        println!("{}", row.iter().map(|v| format!("{v:7.3}")).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}
