//! Rewards learned from the exact expert occupancy, evaluated at the training
//! thresholds and with the constraints effectively removed.
//!
//! `cargo run --release --example gridworld_generalization -- [episodes] [out_dir]`

use std::path::PathBuf;

use cirl::experiments::{run_generalization_experiment, GeneralizationConfig};

fn main() -> cirl::Result<()> {
    let mut cfg = GeneralizationConfig::default();
    if let Some(e) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        cfg.gda.episodes = e;
    }
    let out = std::env::args().nth(2).map(PathBuf::from);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_generalization_experiment(&cfg, out.as_deref(), jobs)?;
    print!("{}", report.metrics_csv());
    println!("expert multipliers {:?}", report.expert_dual);
    Ok(())
}
