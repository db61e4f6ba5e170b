//! Policy and reward errors as the number of expert trajectories grows, and
//! the policy-error bound at the sample size from the calculator.
//!
//! `cargo run --release --example finite_sample -- [episodes] [out_dir]`

use std::path::PathBuf;

use cirl::experiments::{run_finite_sample_experiment, run_policy_bound_check, FiniteSampleConfig};

fn main() -> cirl::Result<()> {
    let mut cfg = FiniteSampleConfig::default();
    if let Some(e) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        cfg.gda.episodes = e;
    }
    let out = std::env::args().nth(2).map(PathBuf::from);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_finite_sample_experiment(&cfg, out.as_deref(), jobs)?;
    print!("{}", report.metrics_csv());

    let check = run_policy_bound_check(&cfg, 0.5, 0.1, jobs)?;
    println!(
        "N={} T={}: {} of {} seeds within {:.3} (errors {:?})",
        check.count,
        check.horizon,
        check.within_bound,
        check.errors.len(),
        check.bound,
        check.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
    );
    Ok(())
}
