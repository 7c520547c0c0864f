//! Differentially private synthesis of spatiotemporal trajectories.
//!
//! Trajectories are discretized onto a space-time cube grid, a noisy
//! first-order Markov model over cube transitions is fitted, and synthetic
//! trajectories are sampled from it. The `metrics` module scores how well a
//! synthetic dataset preserves the original's utility.

// `!(a < b)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod grid;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod synth;

pub use dp::{split_budget, Noise, NoiseSource, PrivacyBudget};
pub use grid::{Cube, CubeTrajectory, GridSpec, Point, SpatioTemporalDomain};
pub use ingest::{RawDataset, RawTrajectory};
pub use model::{build_model, Privacy, SynthModel};
pub use synth::{generate_dataset, GenerationConfig};
