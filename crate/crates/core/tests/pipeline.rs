mod common;

use cirl::experiments::{build_gridworld, run_generalization_experiment, GeneralizationConfig, GridworldConfig};
use cirl::forward::{slater_check, solve_rl_constrained, SolverConfig};
use cirl::irl::{estimate_occupancy, gda_irl, ipm_distance, sample_size, Demonstrations, GdaConfig, NormKind, RewardClass};
use cirl::numerics::{norm_1, sub, Matrix};
use cirl::{bellman_flow_residual, constraint_violation};
use common::*;
use rand::Rng;

/// Random CMDP whose expert reward lies in a bounded linear class.
fn realizable(seed: u64) -> (cirl::Cmdp, RewardClass, Vec<f64>) {
    let mut rng = rng(seed);
    let (n, m, d) = (4, 3, 5);
    let cmdp = random_cmdp(&mut rng, n, m, 1);
    let phi = Matrix::from_fn(n * m, d, |_, _| rng.gen_range(-1.0..1.0));
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let class = RewardClass::new(phi, NormKind::L2, 10.0).unwrap();
    let r = class.reward(&w);
    (cmdp, class, r)
}

#[test]
fn gda_is_consistent_and_recovers_the_expert() {
    let instances = (0..).map(realizable).filter(|inst| slater_check(&inst.0)).take(3);
    for (seed, (cmdp, class, r)) in instances.enumerate() {
        let expert = solve_rl_constrained(&cmdp, &r, 1.0, &SolverConfig::default()).unwrap();
        let cfg = GdaConfig { episodes: 20_000, record_every: 500, ..GdaConfig::default() };
        let res = gda_irl(&cmdp, &class, &expert.occupancy, &cfg).unwrap();

        let ipm = ipm_distance(&class, &res.occupancy, &expert.occupancy).unwrap().value();
        assert!(ipm <= 1e-3, "seed {seed}: ipm {ipm:e}");
        // Trailing windows of the trace do not increase.
        let ipms: Vec<f64> = res.trace.iter().map(|e| e.ipm).collect();
        let windows: Vec<f64> = ipms.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        for w in windows[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {windows:?}");
        }
        for e in &res.trace {
            assert!(e.weight_norm <= class.radius() + 1e-10);
            assert!(e.min_dual >= 0.0);
        }
        let again = solve_rl_constrained(&cmdp, &res.reward, 1.0, &SolverConfig::default()).unwrap();
        let gap = norm_1(&sub(again.occupancy.values(), expert.occupancy.values()));
        assert!(gap <= 1e-3, "seed {seed}: recovered occupancy off by {gap:e}");
    }
}

#[test]
fn estimator_mass_is_exact() {
    let mut rng = rng(4);
    for horizon in [0usize, 1, 5, 40] {
        let trajs: Vec<Vec<(usize, usize)>> = (0..7)
            .map(|_| (0..=horizon).map(|_| (rng.gen_range(0..3), rng.gen_range(0..2))).collect())
            .collect();
        let demos = Demonstrations::new(trajs, 3, 2).unwrap();
        let mu = estimate_occupancy(&demos, 0.8, 3, 2).unwrap();
        let expected = 1.0 - 0.8f64.powi(horizon as i32 + 1);
        assert!((mu.total_mass() - expected).abs() <= 1e-14);
    }
}

#[test]
fn sample_size_matches_direct_evaluation() {
    // Evaluated through base-10 logarithms rather than the natural log.
    for (eps, delta, r, d) in [(0.1, 0.1, 1.0, 36usize), (0.5, 0.1, 1.0, 36), (0.3, 0.05, 2.0, 10)] {
        let n = 32.0 * r * r / (eps * eps) * (2.0 * d as f64 / delta).log10() / std::f64::consts::E.log10();
        let t = (eps / (8.0 * r)).log10() / 0.9f64.log10();
        assert_eq!(sample_size(eps, delta, r, d, 0.9).unwrap(), (n.ceil() as u64, t.ceil() as u64));
    }
}

#[test]
fn gridworld_expert_and_report_invariants() {
    let grid = GridworldConfig::default();
    let env = build_gridworld(&grid).unwrap();
    assert!(slater_check(&env));
    let expert = solve_rl_constrained(&env, &grid.reward(), grid.beta, &SolverConfig::default()).unwrap();
    assert!(constraint_violation(&env, &expert.occupancy).unwrap().iter().all(|&v| v <= 1e-8));
    assert!(bellman_flow_residual(&env, &expert.occupancy).unwrap() <= 1e-10);

    let cfg = GeneralizationConfig {
        gda: GdaConfig { episodes: 2_000, record_every: 500, ..GdaConfig::default() },
        ..GeneralizationConfig::default()
    };
    let report = run_generalization_experiment(&cfg, None, 1).unwrap();
    for o in &report.outcomes {
        assert!(o.error.is_none(), "{:?}", o.error);
        for m in [o.train.as_ref().unwrap(), o.test.as_ref().unwrap()] {
            assert!(m.delta_mu >= 0.0);
            assert!(m.delta_j >= -1e-8);
        }
    }
}
