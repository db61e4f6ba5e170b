//! Gridworld environment and the experiment harnesses.

pub mod finite_sample;
pub mod generalization;
pub mod gridworld;

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cmdp::Policy;
use crate::error::Result;

pub use finite_sample::{
    run_finite_sample_experiment, run_policy_bound_check, FiniteSampleConfig, FiniteSampleReport,
    PolicyBoundCheck,
};
pub use generalization::{
    run_generalization_experiment, GeneralizationConfig, GeneralizationReport, Method,
};
pub use gridworld::{
    boundary_features, build_gridworld, reward_class_r1, reward_class_r2, sample_demonstrations,
    state_features, GridworldConfig, Rect, RewardCell,
};

/// Library version plus `git describe` output when available at build time.
pub const VERSION: &str = env!("CIRL_VERSION");

/// Hex SHA-256 of the JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Per-state reward laid out as `[row][col]` (action 0 entry).
pub fn reward_grid(grid: &GridworldConfig, reward: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.height)
        .map(|row| (0..grid.width).map(|col| reward[grid.state(row, col)]).collect())
        .collect()
}

/// Policy laid out as `[row][col][action]`.
pub fn policy_grid(grid: &GridworldConfig, policy: &Policy) -> Vec<Vec<Vec<f64>>> {
    (0..grid.height)
        .map(|row| {
            (0..grid.width)
                .map(|col| policy.row(grid.state(row, col)).to_vec())
                .collect()
        })
        .collect()
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::error::Error::Invalid(format!("thread pool: {e}")))
}
