//! Synthetic trajectory generation from a [`SynthModel`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::{streams, NoiseSource};
use crate::grid::{cube_center, CubeTrajectory};
use crate::ingest::{RawDataset, RawTrajectory};
use crate::model::{Next, SynthModel};

/// Cube cap per synthetic trajectory used in the reference experiments.
pub const DEFAULT_MAX_LEN: usize = 125;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub count: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn new(count: usize, max_len: usize, seed: u64) -> Result<Self, SynthError> {
        let cfg = Self {
            count,
            max_len,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.count == 0 {
            return Err(SynthError::InvalidConfig("count must be >= 1".into()));
        }
        if self.max_len == 0 {
            return Err(SynthError::InvalidConfig("max_len must be >= 1".into()));
        }
        Ok(())
    }
}

/// Picks an index by cumulative-sum inversion over `weights` in order.
/// Falls back to the last positive weight when rounding leaves `u` past
/// the running total.
fn pick(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 && target < acc {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Precomputed cumulative start mass for repeated draws.
#[derive(Debug, Clone)]
pub struct StartSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl StartSampler {
    pub fn new(model: &SynthModel) -> Self {
        let mut acc = 0.0;
        let cumulative = model
            .start
            .mass
            .iter()
            .map(|&m| {
                acc += m;
                acc
            })
            .collect();
        let last_positive = model.start.mass.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    pub fn sample(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.last_positive)
    }
}

fn walk(model: &SynthModel, start: usize, max_len: usize, rng: &mut NoiseSource) -> CubeTrajectory {
    let grid = &model.grid;
    let tm = &model.tm;
    let mut cubes = vec![grid.cube_at(start)];
    let mut current = start;
    let mut terminated = false;
    while cubes.len() < max_len {
        if tm.is_all_zero(current) {
            terminated = true;
            break;
        }
        let cells = tm.support().row_range(current);
        let Some(k) = pick(tm.row_probs(current), rng.uniform()) else {
            terminated = true;
            break;
        };
        match tm.support().target(cells.start + k) {
            Next::Stop => {
                terminated = true;
                break;
            }
            Next::Cube(id) => {
                cubes.push(grid.cube_at(id));
                current = id;
            }
        }
    }
    CubeTrajectory { cubes, terminated }
}

/// Draws a start cube, then follows the transition matrix until the stop
/// symbol, an all-zero row, or `max_len` cubes. The start draw and every
/// step draw come from `rng`.
pub fn generate_cube_trajectory(
    model: &SynthModel,
    max_len: usize,
    rng: &mut NoiseSource,
) -> CubeTrajectory {
    let sampler = StartSampler::new(model);
    generate_with(model, &sampler, max_len, rng)
}

pub fn generate_with(
    model: &SynthModel,
    sampler: &StartSampler,
    max_len: usize,
    rng: &mut NoiseSource,
) -> CubeTrajectory {
    let start = sampler.sample(rng.uniform());
    walk(model, start, max_len.max(1), rng)
}

/// Random stream for synthetic trajectory `index`.
pub fn trajectory_stream(seed: u64, index: usize) -> NoiseSource {
    NoiseSource::new(seed, streams::GENERATION_BASE + index as u64)
}

/// Generates `cfg.count` cube trajectories in parallel; trajectory `i` uses
/// its own stream, so output does not depend on scheduling.
pub fn generate_cube_trajectories(
    model: &SynthModel,
    cfg: &GenerationConfig,
) -> Vec<CubeTrajectory> {
    let sampler = StartSampler::new(model);
    (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_stream(cfg.seed, i);
            generate_with(model, &sampler, cfg.max_len, &mut rng)
        })
        .collect()
}

/// Generates a synthetic dataset and maps each cube to its center point.
/// Ids are `syn-<index>`.
pub fn generate_dataset(
    model: &SynthModel,
    cfg: &GenerationConfig,
) -> Result<RawDataset, SynthError> {
    cfg.validate()?;
    let trajectories = generate_cube_trajectories(model, cfg)
        .into_iter()
        .enumerate()
        .map(|(i, tr)| RawTrajectory {
            id: format!("syn-{i}"),
            points: tr
                .cubes
                .iter()
                .map(|&c| {
                    cube_center(c, &model.domain, &model.grid).expect("generated cube in grid")
                })
                .collect(),
        })
        .collect();
    Ok(RawDataset {
        trajectories,
        source: format!("synthetic(seed={})", cfg.seed),
    })
}
