#![allow(dead_code)]

use cirl::numerics::Matrix;
use cirl::{Cmdp, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stochastic_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            let w: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.05..1.0)).collect();
            let t: f64 = w.iter().sum();
            w.iter().map(|v| v / t).collect()
        })
        .collect();
    Matrix::from_rows(&data).unwrap()
}

pub fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|v| v / t).collect()
}

/// Random CMDP with costs in [0, 1) and thresholds 0.5.
pub fn random_cmdp(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> Cmdp {
    let p = stochastic_rows(rng, n * m, n);
    let nu0 = distribution(rng, n);
    let psi = Matrix::from_fn(n * m, k, |_, _| rng.gen_range(0.0..1.0));
    Cmdp::new(n, m, 0.9, nu0, p, psi, vec![0.5; k], None).unwrap()
}

pub fn random_reward(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()
}

pub fn random_policy(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Policy {
    let w = (0..n * m).map(|_| rng.gen_range(0.01..1.0)).collect();
    Policy::from_weights(n, m, w).unwrap()
}

/// Single state, two actions; optional cost vector and threshold.
pub fn single_state(costs: Option<([f64; 2], f64)>) -> Cmdp {
    let p = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    match costs {
        None => Cmdp::unconstrained(1, 2, 0.9, vec![1.0], p, None).unwrap(),
        Some((c, b)) => {
            let psi = Matrix::from_rows(&[vec![c[0]], vec![c[1]]]).unwrap();
            Cmdp::new(1, 2, 0.9, vec![1.0], p, psi, vec![b], None).unwrap()
        }
    }
}

/// State-action occupancy of `pi` by fixed-point iteration of the flow
/// equations (independent of the library's linear solve).
pub fn occupancy_by_iteration(cmdp: &Cmdp, pi: &Policy) -> Vec<f64> {
    let (n, m, g) = (cmdp.n(), cmdp.m(), cmdp.gamma());
    let p = cmdp.transition();
    let mut nu = cmdp.nu0().to_vec();
    loop {
        let mut next: Vec<f64> = cmdp.nu0().iter().map(|v| (1.0 - g) * v).collect();
        for s in 0..n {
            for a in 0..m {
                let w = g * nu[s] * pi.prob(s, a);
                for (t, slot) in next.iter_mut().enumerate() {
                    *slot += w * p[(a * n + s, t)];
                }
            }
        }
        let diff: f64 = next.iter().zip(&nu).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        nu = next;
        if diff < 1e-16 {
            break;
        }
    }
    let mut mu = vec![0.0; n * m];
    for s in 0..n {
        for a in 0..m {
            mu[a * n + s] = nu[s] * pi.prob(s, a);
        }
    }
    mu
}
