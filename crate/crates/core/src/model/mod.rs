//! The synthesis model: a noisy start-cube distribution plus a noisy
//! first-order Markov transition matrix over neighbor cubes.
//!
//! Both matrices share a [`Support`]: row `i` holds one column per neighbor
//! of cube `i` (in [`neighbors`] order) followed by the stop symbol. Cells
//! outside that support are structural zeros and are never stored.

mod file;

pub use file::{ModelFileError, MODEL_FORMAT, MODEL_FORMAT_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::{self, DpError, Noise, NoiseSource, PrivacyBudget};
use crate::grid::{neighbors, Cube, CubeTrajectory, GridSpec, SpatioTemporalDomain};
use crate::ingest::TimeMode;

/// L1 sensitivity of the start counts: one trajectory moves one count.
pub const START_SENSITIVITY: f64 = 1.0;
/// L1 sensitivity of the frequency matrix: each trajectory contributes mass 1.
pub const FM_SENSITIVITY: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error("trajectory {trajectory} is empty")]
    EmptyTrajectory { trajectory: usize },
    #[error("trajectory {trajectory} has no stop symbol")]
    UnterminatedTrajectory { trajectory: usize },
    #[error("trajectory {trajectory}: cube {position} lies outside the grid")]
    CubeOutOfGrid { trajectory: usize, position: usize },
    #[error("trajectory {trajectory}: step {position} is not a neighbor transition")]
    NonNeighborTransition { trajectory: usize, position: usize },
    #[error("cannot build a model from an empty dataset")]
    EmptyDataset,
}

/// Target of a transition: another cube (by id) or the stop symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Next {
    Cube(usize),
    Stop,
}

const STOP: u32 = u32::MAX;

/// Row-compressed neighbor support shared by the frequency and transition
/// matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    grid: GridSpec,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Support {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.num_cubes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for id in 0..n {
            let c = grid.cube_at(id);
            targets.extend(
                neighbors(c, &grid)
                    .into_iter()
                    .map(|b| grid.cube_id(b) as u32),
            );
            targets.push(STOP);
            offsets.push(targets.len());
        }
        Self {
            grid,
            offsets,
            targets,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of support cells over all rows.
    pub fn num_cells(&self) -> usize {
        self.targets.len()
    }

    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.offsets[row]..self.offsets[row + 1]
    }

    pub fn row_targets(&self, row: usize) -> impl ExactSizeIterator<Item = Next> + '_ {
        self.targets[self.row_range(row)]
            .iter()
            .map(|&t| decode_target(t))
    }

    /// Flat cell index of `(row, next)`, or `None` outside the support.
    pub fn cell(&self, row: usize, next: Next) -> Option<usize> {
        let range = self.row_range(row);
        let key = match next {
            Next::Cube(id) => u32::try_from(id).ok().filter(|&k| k != STOP)?,
            Next::Stop => STOP,
        };
        self.targets[range.clone()]
            .iter()
            .position(|&t| t == key)
            .map(|p| range.start + p)
    }

    pub fn target(&self, cell: usize) -> Next {
        decode_target(self.targets[cell])
    }
}

fn decode_target(t: u32) -> Next {
    if t == STOP {
        Next::Stop
    } else {
        Next::Cube(t as usize)
    }
}

/// Start-cube mass indexed by cube id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDistribution {
    pub mass: Vec<f64>,
}

/// 2-gram frequencies over the neighbor support.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    support: Support,
    values: Vec<f64>,
}

impl FrequencyMatrix {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_support(Support::new(grid))
    }

    pub fn from_support(support: Support) -> Self {
        let values = vec![0.0; support.num_cells()];
        Self { support, values }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `(from, next)`; zero outside the support.
    pub fn get(&self, from: usize, next: Next) -> f64 {
        self.support
            .cell(from, next)
            .map_or(0.0, |c| self.values[c])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (Next, f64)> + '_ {
        let range = self.support.row_range(row);
        self.support
            .row_targets(row)
            .zip(self.values[range].iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Row-normalized transition probabilities. Rows whose clamped mass is zero
/// are flagged `all_zero` and hold only zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    support: Support,
    probs: Vec<f64>,
    all_zero: Vec<bool>,
}

impl TransitionMatrix {
    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn grid(&self) -> &GridSpec {
        self.support.grid()
    }

    pub fn get(&self, from: usize, next: Next) -> f64 {
        self.support.cell(from, next).map_or(0.0, |c| self.probs[c])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (Next, f64)> + '_ {
        let range = self.support.row_range(row);
        self.support
            .row_targets(row)
            .zip(self.probs[range].iter().copied())
    }

    pub fn row_probs(&self, row: usize) -> &[f64] {
        &self.probs[self.support.row_range(row)]
    }

    pub fn is_all_zero(&self, row: usize) -> bool {
        self.all_zero[row]
    }

    pub fn num_rows(&self) -> usize {
        self.all_zero.len()
    }

    pub(crate) fn from_parts(support: Support, probs: Vec<f64>) -> Self {
        let all_zero = (0..support.num_rows())
            .map(|r| probs[support.row_range(r)].iter().all(|&p| p == 0.0))
            .collect();
        Self {
            support,
            probs,
            all_zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    /// Number of trajectories in the source dataset.
    pub source_size: usize,
    /// Build time in epoch seconds; `None` keeps model files reproducible.
    pub built_at: Option<i64>,
    /// How the domain's time window was applied to the source data.
    #[serde(default)]
    pub time_mode: TimeMode,
}

/// Everything needed to generate synthetic trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthModel {
    pub domain: SpatioTemporalDomain,
    pub grid: GridSpec,
    pub start: StartDistribution,
    pub tm: TransitionMatrix,
    /// `None` when built with noise off.
    pub budget: Option<PrivacyBudget>,
    pub metadata: ModelMetadata,
}

/// Budget setting for [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Privacy {
    NoiseOff,
    Budget { epsilon: f64, delta_split: f64 },
}

/// Number of trajectories starting in each cube.
pub fn count_starts(da: &[CubeTrajectory], grid: &GridSpec) -> Vec<u64> {
    let mut counts = vec![0u64; grid.num_cubes()];
    for tr in da {
        if let Some(&first) = tr.cubes.first() {
            counts[grid.cube_id(first)] += 1;
        }
    }
    counts
}

fn clamp_nonneg(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Adds `Lap(1/eps_s)` to every count, clamps negatives to zero and
/// normalizes. An all-zero result falls back to the uniform distribution.
/// Noise is drawn in cube-id order.
pub fn noisy_start_distribution(
    counts: &[u64],
    noise: Noise,
    rng: &mut NoiseSource,
) -> Result<StartDistribution, DpError> {
    let scale = noise.scale(START_SENSITIVITY)?;
    let mut mass: Vec<f64> = counts
        .iter()
        .map(|&n| {
            let noisy = match scale {
                Some(s) => n as f64 + dp::laplace_sample(s, rng),
                None => n as f64,
            };
            clamp_nonneg(noisy)
        })
        .collect();
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter_mut().for_each(|m| *m /= total);
    } else if !mass.is_empty() {
        let u = 1.0 / mass.len() as f64;
        mass.iter_mut().for_each(|m| *m = u);
    }
    Ok(StartDistribution { mass })
}

/// Each trajectory of `L` cubes contributes `1/L` to each of its `L`
/// 2-grams (`L - 1` cube transitions plus the final cube -> stop), so every
/// trajectory adds exactly 1 to the matrix.
pub fn build_frequency_matrix(
    da: &[CubeTrajectory],
    grid: &GridSpec,
) -> Result<FrequencyMatrix, ModelError> {
    let mut fm = FrequencyMatrix::zeros(*grid);
    let mut cells = Vec::new();
    for (ti, tr) in da.iter().enumerate() {
        if tr.cubes.is_empty() {
            return Err(ModelError::EmptyTrajectory { trajectory: ti });
        }
        if !tr.terminated {
            return Err(ModelError::UnterminatedTrajectory { trajectory: ti });
        }
        if let Some(pos) = tr.cubes.iter().position(|c| !grid.contains(*c)) {
            return Err(ModelError::CubeOutOfGrid {
                trajectory: ti,
                position: pos,
            });
        }
        cells.clear();
        for (pos, w) in tr.cubes.windows(2).enumerate() {
            let cell = fm
                .support
                .cell(grid.cube_id(w[0]), Next::Cube(grid.cube_id(w[1])))
                .ok_or(ModelError::NonNeighborTransition {
                    trajectory: ti,
                    position: pos + 1,
                })?;
            cells.push(cell);
        }
        let last = grid.cube_id(*tr.cubes.last().expect("non-empty"));
        cells.push(
            fm.support
                .cell(last, Next::Stop)
                .expect("stop is always in support"),
        );
        let weight = 1.0 / cells.len() as f64;
        for &c in &cells {
            fm.values[c] += weight;
        }
    }
    Ok(fm)
}

/// Adds `Lap(1/eps_m)` to every support cell, including cells with zero
/// frequency. Noise is drawn row by row in support order.
pub fn add_fm_noise(
    fm: &FrequencyMatrix,
    noise: Noise,
    rng: &mut NoiseSource,
) -> Result<FrequencyMatrix, DpError> {
    let Some(scale) = noise.scale(FM_SENSITIVITY)? else {
        return Ok(fm.clone());
    };
    let values = fm
        .values
        .iter()
        .map(|&v| v + dp::laplace_sample(scale, rng))
        .collect();
    Ok(FrequencyMatrix {
        support: fm.support.clone(),
        values,
    })
}

/// Clamps negatives to zero and normalizes each row over its support.
pub fn derive_transition_matrix(fm: &FrequencyMatrix) -> TransitionMatrix {
    let support = fm.support.clone();
    let mut probs: Vec<f64> = fm.values.iter().map(|&v| clamp_nonneg(v)).collect();
    let mut all_zero = vec![false; support.num_rows()];
    for (row, flag) in all_zero.iter_mut().enumerate() {
        let cells = &mut probs[support.row_range(row)];
        let sum: f64 = cells.iter().sum();
        if sum > 0.0 {
            cells.iter_mut().for_each(|p| *p /= sum);
        } else {
            cells.iter_mut().for_each(|p| *p = 0.0);
            *flag = true;
        }
    }
    TransitionMatrix {
        support,
        probs,
        all_zero,
    }
}

/// Runs the whole model construction. The start distribution consumes
/// `eps_s` and the transition matrix `eps_m`; by sequential composition the
/// model is `epsilon`-DP.
pub fn build_model(
    da: &[CubeTrajectory],
    domain: SpatioTemporalDomain,
    grid: GridSpec,
    privacy: Privacy,
    seed: u64,
) -> Result<SynthModel, ModelError> {
    if da.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let (budget, start_noise, fm_noise) = match privacy {
        Privacy::NoiseOff => (None, Noise::Off, Noise::Off),
        Privacy::Budget {
            epsilon,
            delta_split,
        } => {
            let b = dp::split_budget(epsilon, delta_split)?;
            (
                Some(b),
                Noise::Laplace { epsilon: b.eps_s },
                Noise::Laplace { epsilon: b.eps_m },
            )
        }
    };

    let counts = count_starts(da, &grid);
    let mut start_rng = NoiseSource::new(seed, dp::streams::START_COUNTS);
    let start = noisy_start_distribution(&counts, start_noise, &mut start_rng)?;

    let fm = build_frequency_matrix(da, &grid)?;
    let mut fm_rng = NoiseSource::new(seed, dp::streams::FREQUENCY_MATRIX);
    let noisy = add_fm_noise(&fm, fm_noise, &mut fm_rng)?;
    let tm = derive_transition_matrix(&noisy);

    Ok(SynthModel {
        domain,
        grid,
        start,
        tm,
        budget,
        metadata: ModelMetadata {
            seed,
            source_size: da.len(),
            built_at: None,
            time_mode: TimeMode::Absolute,
        },
    })
}

impl SynthModel {
    pub fn cube(&self, id: usize) -> Cube {
        self.grid.cube_at(id)
    }
}

#[cfg(test)]
mod tests;
