//! On a random CMDP, the constrained optimum equals the unconstrained optimum
//! for the reward shifted by the optimal multipliers.

use cirl::forward::{slater_check, soft_policy_iteration, solve_rl_constrained, SolverConfig};
use cirl::numerics::{norm_inf, sub, Matrix};
use cirl::{bellman_flow_residual, Cmdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cirl::Result<()> {
    let (n, m, k) = (5, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rows = Vec::new();
    for _ in 0..n * m {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let t: f64 = w.iter().sum();
        rows.push(w.iter().map(|v| v / t).collect());
    }
    let psi = Matrix::from_fn(n * m, k, |_, _| rng.gen_range(0.0..1.0));
    let r: Vec<f64> = (0..n * m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let cmdp = Cmdp::new(n, m, 0.9, vec![1.0 / n as f64; n], Matrix::from_rows(&rows)?, psi, vec![0.4, 0.45], None)?;
    println!("Slater point exists: {}", slater_check(&cmdp));

    let sol = solve_rl_constrained(&cmdp, &r, 1.0, &SolverConfig::default())?;
    println!("multipliers {:?}, duality gap {:.2e}", sol.dual, sol.duality_gap);
    println!("constraint costs {:?}", cmdp.constraint_costs(&sol.occupancy));
    println!("flow residual {:.2e}", bellman_flow_residual(&cmdp, &sol.occupancy)?);

    let shift = cmdp.psi().mul_vec(&sol.dual);
    let shifted = sub(&r, &shift);
    let free = soft_policy_iteration(&cmdp.without_constraints(), &shifted, 1.0, 1e-13, 100)?;
    let diff = norm_inf(&sub(sol.occupancy.values(), free.occupancy.values()));
    println!("|mu_F(r) - mu_M(r - Psi xi)|_inf = {diff:.2e}");
    Ok(())
}
