//! Gridworld with slippery moves, rectangular safety constraints and a
//! state-only reward.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmdp::{sa_index, Cmdp, Policy};
use crate::error::{Error, Result};
use crate::irl::{Demonstrations, NormKind, RewardClass};
use crate::numerics::Matrix;

/// Moves in action order: up, down, left, right.
pub const MOVES: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
pub const ACTION_NAMES: [&str; 4] = ["up", "down", "left", "right"];

/// Inclusive cell rectangle `[top, bottom] × [left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Rect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..=self.bottom).contains(&row) && (self.left..=self.right).contains(&col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    pub success_prob: f64,
    pub gamma: f64,
    pub reward_cells: Vec<RewardCell>,
    pub constraint_rects: Vec<Rect>,
    pub b: Vec<f64>,
    pub beta: f64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            success_prob: 0.9,
            gamma: 0.9,
            reward_cells: vec![
                RewardCell { row: 0, col: 5, value: 0.5 },
                RewardCell { row: 5, col: 0, value: 0.5 },
            ],
            constraint_rects: vec![
                Rect { top: 1, left: 3, bottom: 2, right: 4 },
                Rect { top: 3, left: 1, bottom: 4, right: 2 },
            ],
            b: vec![0.02, 0.02],
            beta: 1.0,
        }
    }
}

impl GridworldConfig {
    pub fn n(&self) -> usize {
        self.width * self.height
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        (s / self.width, s % self.width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invalid("grid must be at least 1x1".into()));
        }
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return Err(Error::Invalid(format!(
                "success_prob {} outside (0, 1]",
                self.success_prob
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("beta must be positive, got {}", self.beta)));
        }
        for c in &self.reward_cells {
            if c.row >= self.height || c.col >= self.width || !c.value.is_finite() {
                return Err(Error::Invalid(format!("reward cell ({}, {}) is invalid", c.row, c.col)));
            }
        }
        for r in &self.constraint_rects {
            if r.top > r.bottom || r.left > r.right || r.bottom >= self.height || r.right >= self.width {
                return Err(Error::Invalid(format!("constraint rectangle {r:?} is invalid")));
            }
        }
        if self.b.len() != self.constraint_rects.len() {
            return Err(Error::Invalid(format!(
                "{} thresholds for {} rectangles",
                self.b.len(),
                self.constraint_rects.len()
            )));
        }
        Ok(())
    }

    /// State reward copied across the four actions.
    pub fn reward(&self) -> Vec<f64> {
        let n = self.n();
        let mut r = vec![0.0; n * 4];
        for c in &self.reward_cells {
            let s = self.state(c.row, c.col);
            for a in 0..4 {
                r[sa_index(n, s, a)] = c.value;
            }
        }
        r
    }

    /// States on the outer ring, in index order.
    pub fn boundary_states(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&s| {
                let (row, col) = self.cell(s);
                row == 0 || col == 0 || row + 1 == self.height || col + 1 == self.width
            })
            .collect()
    }

    fn neighbor(&self, row: usize, col: usize, mv: (i64, i64)) -> usize {
        let r = row as i64 + mv.0;
        let c = col as i64 + mv.1;
        if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
            self.state(row, col)
        } else {
            self.state(r as usize, c as usize)
        }
    }

    /// Transition row for `(s, a)`: the target gets `p`, and `(1−p)/4` goes to
    /// each of the four neighbors; moves off the grid stay in place.
    pub fn transition_row(&self, s: usize, a: usize) -> Vec<f64> {
        let (row, col) = self.cell(s);
        let p = self.success_prob;
        let mut out = vec![0.0; self.n()];
        out[self.neighbor(row, col, MOVES[a])] += p;
        let slip = (1.0 - p) / 4.0;
        if slip > 0.0 {
            for mv in MOVES {
                out[self.neighbor(row, col, mv)] += slip;
            }
        }
        normalize_exactly(&mut out);
        out
    }
}

/// Nudges the largest entry so the left-to-right sum is exactly 1.
fn normalize_exactly(row: &mut [f64]) {
    let big = (0..row.len())
        .max_by(|&a, &b| row[a].total_cmp(&row[b]))
        .unwrap_or(0);
    for _ in 0..8 {
        let total: f64 = row.iter().sum();
        if total == 1.0 {
            return;
        }
        row[big] += 1.0 - total;
    }
    // Fall back to single-ulp steps.
    for _ in 0..64 {
        let total: f64 = row.iter().sum();
        if total == 1.0 {
            return;
        }
        row[big] = if total > 1.0 {
            f64::from_bits(row[big].to_bits() - 1)
        } else {
            f64::from_bits(row[big].to_bits() + 1)
        };
    }
}

/// Builds the CMDP with uniform initial distribution.
pub fn build_gridworld(config: &GridworldConfig) -> Result<Cmdp> {
    config.validate()?;
    let n = config.n();
    let m = 4;
    let mut transition = Matrix::zeros(n * m, n);
    for a in 0..m {
        for s in 0..n {
            transition
                .row_mut(sa_index(n, s, a))
                .copy_from_slice(&config.transition_row(s, a));
        }
    }
    let k = config.constraint_rects.len();
    let psi = Matrix::from_fn(n * m, k, |row, i| {
        let (r, c) = config.cell(row % n);
        if config.constraint_rects[i].contains(r, c) {
            1.0
        } else {
            0.0
        }
    });
    let mut nu0 = vec![1.0 / n as f64; n];
    normalize_exactly(&mut nu0);
    Cmdp::new(n, m, config.gamma, nu0, transition, psi, config.b.clone(), Some(config.reward()))
}

/// One feature per boundary state (columns of `E` at boundary states).
pub fn boundary_features(config: &GridworldConfig) -> Matrix {
    let n = config.n();
    let boundary = config.boundary_states();
    Matrix::from_fn(n * 4, boundary.len(), |row, j| {
        if row % n == boundary[j] {
            1.0
        } else {
            0.0
        }
    })
}

/// One feature per state (`E`).
pub fn state_features(config: &GridworldConfig) -> Matrix {
    crate::cmdp::stacked_identity(config.n(), 4)
}

/// Class `R₁`: boundary-state features.
pub fn reward_class_r1(config: &GridworldConfig, norm: NormKind, radius: f64) -> Result<RewardClass> {
    RewardClass::new(boundary_features(config), norm, radius)
}

/// Class `R₂`: one feature per state.
pub fn reward_class_r2(config: &GridworldConfig, norm: NormKind, radius: f64) -> Result<RewardClass> {
    RewardClass::new(state_features(config), norm, radius)
}

/// Samples `count` trajectories of `horizon + 1` state-action pairs.
pub fn sample_demonstrations(
    cmdp: &Cmdp,
    policy: &Policy,
    count: usize,
    horizon: usize,
    seed: u64,
) -> Result<Demonstrations> {
    if count == 0 {
        return Err(Error::Invalid("need at least one trajectory".into()));
    }
    let (n, m) = (cmdp.n(), cmdp.m());
    if policy.n() != n || policy.m() != m {
        return Err(Error::Dimension("policy does not match the CMDP".into()));
    }
    let bad = |e: rand::distributions::WeightedError| Error::Invalid(format!("bad distribution: {e}"));
    let init = WeightedIndex::new(cmdp.nu0()).map_err(bad)?;
    let actions = (0..n)
        .map(|s| WeightedIndex::new(policy.row(s)).map_err(bad))
        .collect::<Result<Vec<_>>>()?;
    let next = (0..n * m)
        .map(|row| WeightedIndex::new(cmdp.transition().row(row)).map_err(bad))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::with_capacity(count);
    for _ in 0..count {
        let mut traj = Vec::with_capacity(horizon + 1);
        let mut s = init.sample(&mut rng);
        for t in 0..=horizon {
            let a = actions[s].sample(&mut rng);
            traj.push((s, a));
            if t < horizon {
                s = next[sa_index(n, s, a)].sample(&mut rng);
            }
        }
        trajectories.push(traj);
    }
    Demonstrations::new(trajectories, n, m)
}
