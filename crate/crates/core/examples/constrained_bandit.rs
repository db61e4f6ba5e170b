//! Single-state CMDP with two actions and a cap on the second action's mass.
//!
//! The expert is optimal for r = [0, 2] under the cap, its reward is not the
//! regularizer gradient, yet it lies in the solution cone; [2, 0] does not.

use cirl::forward::{solve_rl_constrained, SolverConfig};
use cirl::identifiability::{active_sets, reward_in_solution_cone};
use cirl::numerics::Matrix;
use cirl::{regularizer_gradient, Cmdp, Regularizer};

fn main() -> cirl::Result<()> {
    let p = Matrix::from_rows(&[vec![1.0], vec![1.0]])?;
    let psi = Matrix::from_rows(&[vec![0.0], vec![1.0]])?;
    let cmdp = Cmdp::new(1, 2, 0.9, vec![1.0], p, psi, vec![0.75], None)?;
    let reg = Regularizer::entropy(1.0)?;

    let r = [0.0, 2.0];
    let sol = solve_rl_constrained(&cmdp, &r, 1.0, &SolverConfig::default())?;
    let mu = &sol.occupancy;
    println!("occupancy        {:?}", mu.values());
    println!("multiplier       {:?}", sol.dual);
    println!("gradient at mu   {:?}", regularizer_gradient(mu, &reg)?);
    println!("active           {:?}", active_sets(&cmdp, mu, 1e-8)?);
    for candidate in [[0.0, 2.0], [2.0, 0.0], [1.0, 3.0]] {
        let inside = reward_in_solution_cone(&cmdp, mu, &candidate, &reg, 1e-7)?;
        println!("r = {candidate:?} makes mu optimal: {inside}");
    }
    Ok(())
}
