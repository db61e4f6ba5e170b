//! Rank conditions: the two-transition witness that generalizes, and the
//! gridworld reward classes (boundary features satisfy the condition, one
//! feature per state does not).

use cirl::experiments::{build_gridworld, reward_class_r1, reward_class_r2, GridworldConfig};
use cirl::identifiability::{generalizability_rank, rank_condition, rank_witness_pair};
use cirl::irl::NormKind;

fn main() -> cirl::Result<()> {
    for n in 2..=6 {
        let (p1, p2) = rank_witness_pair(n, 2)?;
        println!("witness n={n}: rank {} (2n-1 = {})", generalizability_rank(&p1, &p2, 0.9)?, 2 * n - 1);
    }
    let grid = GridworldConfig::default();
    let cmdp = build_gridworld(&grid)?;
    for (name, class) in [
        ("R1", reward_class_r1(&grid, NormKind::Unbounded, 1.0)?),
        ("R2", reward_class_r2(&grid, NormKind::Unbounded, 1.0)?),
    ] {
        let rep = rank_condition(&class, &cmdp)?;
        println!(
            "{name}: rank Phi {}, rank [E-gP, Psi] {}, joint {} -> condition met: {}",
            rep.rank_phi, rep.rank_xi, rep.rank_joint, rep.condition_met
        );
    }
    Ok(())
}
