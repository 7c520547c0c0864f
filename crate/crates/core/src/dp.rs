//! Privacy budget splitting and Laplace noise.
//!
//! Randomness comes from ChaCha20, a counter-based generator: a 64-bit seed
//! selects the key and a 64-bit stream id selects an independent keystream.
//! Each pipeline stage draws from its own stream, so adding or removing a
//! stage never shifts the noise another stage sees.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),
}

/// Stream ids for each consumer of randomness.
pub mod streams {
    pub const START_COUNTS: u64 = 1;
    pub const FREQUENCY_MATRIX: u64 = 2;
    /// Generation of synthetic trajectory `i` uses stream `GENERATION_BASE + i`.
    pub const GENERATION_BASE: u64 = 1 << 32;
}

/// Total budget and its split between the start distribution (`eps_s`) and
/// the Markov transition model (`eps_m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta_split: f64,
    pub eps_s: f64,
    pub eps_m: f64,
}

impl PrivacyBudget {
    pub fn total(&self) -> f64 {
        self.eps_s + self.eps_m
    }
}

/// `eps_s = delta * epsilon`, `eps_m = epsilon - eps_s`.
pub fn split_budget(epsilon: f64, delta_split: f64) -> Result<PrivacyBudget, DpError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(DpError::InvalidBudget(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !(delta_split > 0.0 && delta_split < 1.0) {
        return Err(DpError::InvalidBudget(format!(
            "delta must lie in (0, 1), got {delta_split}"
        )));
    }
    let eps_s = delta_split * epsilon;
    let eps_m = epsilon - eps_s;
    if !(eps_s > 0.0 && eps_m > 0.0) {
        return Err(DpError::InvalidBudget(format!(
            "split of {epsilon} by {delta_split} underflows"
        )));
    }
    Ok(PrivacyBudget {
        epsilon,
        delta_split,
        eps_s,
        eps_m,
    })
}

/// Noise level for one mechanism: a Laplace epsilon, or the noise-off
/// sentinel used for testing the noiseless estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Off,
    Laplace { epsilon: f64 },
}

impl Noise {
    /// Laplace scale for a query with the given L1 sensitivity.
    pub fn scale(&self, sensitivity: f64) -> Result<Option<f64>, DpError> {
        match *self {
            Noise::Off => Ok(None),
            Noise::Laplace { epsilon } if epsilon.is_finite() && epsilon > 0.0 => {
                Ok(Some(sensitivity / epsilon))
            }
            Noise::Laplace { epsilon } => Err(DpError::InvalidBudget(format!(
                "epsilon must be positive and finite, got {epsilon}"
            ))),
        }
    }
}

/// Seeded, single-consumer source of uniforms and Laplace draws.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha20Rng,
}

const TWO_POW_53: f64 = (1u64 << 53) as f64;

impl NoiseSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / TWO_POW_53
    }

    /// Uniform on the open interval `(-1/2, 1/2)`; never returns the
    /// endpoints, so the inverse CDF below stays finite.
    pub fn centered_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / TWO_POW_53 - 0.5
    }

    pub fn laplace(&mut self, scale: f64) -> f64 {
        laplace_from_uniform(self.centered_uniform(), scale)
    }
}

/// Inverse CDF of Laplace(0, scale) at `u - 1/2`, for `u` in `(-1/2, 1/2)`.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

pub fn laplace_sample(scale: f64, rng: &mut NoiseSource) -> f64 {
    debug_assert!(scale > 0.0);
    rng.laplace(scale)
}
