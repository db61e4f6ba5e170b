//! Writing and reading the JSON environment, reward-class and demonstration
//! formats used by the command-line tool.

use cirl::experiments::{build_gridworld, reward_class_r1, sample_demonstrations, GridworldConfig};
use cirl::io::{load_cmdp, load_reward_class, read_demonstrations, save_cmdp, save_reward_class, write_demonstrations};
use cirl::irl::NormKind;
use cirl::Policy;

fn main() -> cirl::Result<()> {
    let dir = std::env::temp_dir().join("cirl-file-formats");
    std::fs::create_dir_all(&dir)?;
    let grid = GridworldConfig::default();
    let cmdp = build_gridworld(&grid)?;
    let (n, m) = (cmdp.n(), cmdp.m());

    save_cmdp(&dir.join("grid.json"), &cmdp)?;
    save_reward_class(&dir.join("R1.json"), &reward_class_r1(&grid, NormKind::L1, 50.0)?, n, m)?;
    let demos = sample_demonstrations(&cmdp, &Policy::uniform(n, m), 3, 5, 1)?;
    write_demonstrations(&dir.join("demos.jsonl"), &demos)?;

    let back = load_cmdp(&dir.join("grid.json"))?;
    let class = load_reward_class(&dir.join("R1.json"), n, m)?;
    let demos_back = read_demonstrations(&dir.join("demos.jsonl"), n, m)?;
    println!("wrote and reloaded {}", dir.display());
    println!("  env: {} states, {} actions, {} constraints", back.n(), back.m(), back.k());
    println!("  class: {} features, {:?} radius {}", class.dim(), class.norm(), class.radius());
    println!("  demos: {} trajectories of {} steps, identical: {}", demos_back.len(), demos_back.horizon(), demos_back == demos);
    Ok(())
}
