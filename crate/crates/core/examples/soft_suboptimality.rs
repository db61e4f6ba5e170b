//! The regularized value lost by a policy equals beta times its
//! occupancy-weighted KL divergence from the soft-optimal policy.

use cirl::forward::{soft_policy_evaluation, soft_value_iteration};
use cirl::numerics::Matrix;
use cirl::{objective, occupancy_from_policy, Cmdp, Policy, Regularizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cirl::Result<()> {
    let (n, m, beta) = (4, 3, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..n * m)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let t: f64 = w.iter().sum();
            w.iter().map(|v| v / t).collect()
        })
        .collect();
    let cmdp = Cmdp::unconstrained(n, m, 0.9, vec![0.25; 4], Matrix::from_rows(&rows)?, None)?;
    let r: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let reg = Regularizer::entropy(beta)?;

    let best = soft_value_iteration(&cmdp, &r, beta, 1e-13, 100_000)?;
    let j_star = objective(&best.occupancy, &r, &reg)?;
    for trial in 0..5 {
        let w = (0..n * m).map(|_| rng.gen_range(0.01..1.0)).collect();
        let pi = Policy::from_weights(n, m, w)?;
        let mu = occupancy_from_policy(&cmdp, &pi)?;
        let gap = j_star - objective(&mu, &r, &reg)?;
        let nu = mu.state_marginal();
        let kl: f64 = (0..n)
            .map(|s| {
                nu[s] * (0..m)
                    .map(|a| pi.prob(s, a) * (pi.prob(s, a) / best.policy.prob(s, a)).ln())
                    .sum::<f64>()
            })
            .sum();
        let (v, _) = soft_policy_evaluation(&cmdp, &pi, &r, beta)?;
        println!(
            "trial {trial}: value gap {gap:.6e}, beta*KL {:.6e}, V(s0) {:.4}",
            beta * kl,
            v[0]
        );
    }
    Ok(())
}
