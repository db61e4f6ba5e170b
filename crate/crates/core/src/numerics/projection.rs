use super::matrix::{norm_1, norm_2};

/// Euclidean projection onto `{v : ‖v‖₁ ≤ radius}` by sorting magnitudes and
/// soft-thresholding at the level that lands exactly on the boundary.
pub fn project_l1_ball(w: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "radius must be positive");
    if norm_1(w) <= radius {
        return w.to_vec();
    }
    let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    w.iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Radial projection onto `{v : ‖v‖₂ ≤ radius}`.
pub fn project_l2_ball(w: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "radius must be positive");
    let norm = norm_2(w);
    if norm <= radius {
        return w.to_vec();
    }
    let scale = radius / norm;
    w.iter().map(|v| v * scale).collect()
}

/// Entrywise `max(x, 0)`; negative zero maps to positive zero.
pub fn project_nonneg(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| if v > 0.0 { v } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: bisection on the soft-threshold level θ so that
    /// `Σ max(|w_i| − θ, 0) = radius`.
    fn bisection_oracle(w: &[f64], radius: f64) -> Vec<f64> {
        if norm_1(w) <= radius {
            return w.to_vec();
        }
        let mass = |theta: f64| w.iter().map(|v| (v.abs() - theta).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, w.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        w.iter()
            .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
            .collect()
    }

    #[test]
    fn inside_ball_unchanged() {
        assert_eq!(project_l1_ball(&[0.2, -0.3], 1.0), vec![0.2, -0.3]);
    }

    #[test]
    fn axis_point_clipped() {
        // Grid search over the boundary of the unit l1 ball in 2-D.
        let w = [3.0, 0.0];
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let steps = 40_000;
        for k in 0..steps {
            let t = 4.0 * k as f64 / steps as f64;
            let (x, y) = match t as usize {
                0 => (1.0 - t, t),
                1 => (1.0 - t, 2.0 - t),
                2 => (t - 3.0, 2.0 - t),
                _ => (t - 3.0, t - 4.0),
            };
            let d = (x - w[0]).powi(2) + (y - w[1]).powi(2);
            if d < best.0 {
                best = (d, [x, y]);
            }
        }
        let p = project_l1_ball(&w, 1.0);
        assert!((p[0] - best.1[0]).abs() < 1e-3 && (p[1] - best.1[1]).abs() < 1e-3);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn symmetric_point() {
        let p = project_l1_ball(&[1.0, 1.0], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let o = bisection_oracle(&[1.0, 1.0], 1.0);
        assert!((o[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_bisection_oracle_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let d = rng.gen_range(2..=100);
            let radius = rng.gen_range(0.1..10.0);
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = project_l1_ball(&w, radius);
            let o = bisection_oracle(&w, radius);
            for (a, b) in p.iter().zip(&o) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
            assert!(norm_1(&p) <= radius + 1e-12);
        }
    }

    #[test]
    fn nonneg_projection() {
        assert_eq!(project_nonneg(&[-1.0, 2.0]), vec![0.0, 2.0]);
        assert_eq!(project_nonneg(&[0.5, 3.0]), vec![0.5, 3.0]);
        let z = project_nonneg(&[-0.0]);
        assert!(z[0] == 0.0 && z[0].is_sign_positive());
    }

    #[test]
    fn l2_projection_scales_radially() {
        let p = project_l2_ball(&[3.0, 4.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_l2_ball(&[0.1, 0.1], 1.0), vec![0.1, 0.1]);
    }

    proptest! {
        #[test]
        fn l1_projection_idempotent(
            w in prop::collection::vec(-5.0f64..5.0, 1..30),
            radius in 0.1f64..5.0,
        ) {
            let p = project_l1_ball(&w, radius);
            prop_assert!(norm_1(&p) <= radius + 1e-12);
            let pp = project_l1_ball(&p, radius);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
