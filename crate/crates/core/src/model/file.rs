//! Model file format: canonical JSON, versioned.
//!
//! ```text
//! {
//!   "format": "dp-stts-model",
//!   "version": 1,
//!   "domain": {"left": .., "right": .., "bottom": .., "top": .., "s_time": .., "e_time": ..},
//!   "grid": {"g_w": .., "g_h": .., "g_t": .., "v": ..},
//!   "budget": {"epsilon": .., "delta_split": .., "eps_s": .., "eps_m": ..} | null,
//!   "metadata": {"seed": .., "source_size": .., "built_at": .. | null,
//!                "time_mode": "absolute" | "time-of-day"},
//!   "start": [p_0, p_1, ...],              // one entry per cube id
//!   "transitions": [                       // rows with any mass, ascending cube id
//!     {"cube": id, "next": [[id, p], ...], "stop": p}
//!   ]
//! }
//! ```
//!
//! Zero-probability cells are omitted and rows absent from `transitions`
//! are all-zero rows. Floats are written in shortest round-trip form, so a
//! decode reproduces every probability bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelMetadata, Next, StartDistribution, Support, SynthModel, TransitionMatrix};
use crate::dp::PrivacyBudget;
use crate::grid::{GridSpec, SpatioTemporalDomain};

pub const MODEL_FORMAT: &str = "dp-stts-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

const SUM_TOLERANCE: f64 = 1e-9;
/// Upper bound on decoded grid size, so a hostile header cannot force a
/// huge support allocation.
const MAX_DECODED_CUBES: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn corrupt(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Corrupt(msg.into())
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    version: u32,
    domain: SpatioTemporalDomain,
    grid: GridSpec,
    budget: Option<PrivacyBudget>,
    metadata: ModelMetadata,
    start: Vec<f64>,
    transitions: Vec<RowDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowDoc {
    cube: usize,
    next: Vec<(usize, f64)>,
    stop: f64,
}

impl SynthModel {
    pub fn to_json_vec(&self) -> Vec<u8> {
        let tm = &self.tm;
        let transitions = (0..tm.num_rows())
            .filter(|&r| !tm.is_all_zero(r))
            .map(|r| {
                let mut next = Vec::new();
                let mut stop = 0.0;
                for (target, p) in tm.row(r) {
                    match target {
                        Next::Stop => stop = p,
                        Next::Cube(id) if p != 0.0 => next.push((id, p)),
                        Next::Cube(_) => {}
                    }
                }
                RowDoc {
                    cube: r,
                    next,
                    stop,
                }
            })
            .collect();
        let doc = ModelDoc {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            domain: self.domain,
            grid: self.grid,
            budget: self.budget,
            metadata: self.metadata,
            start: self.start.mass.clone(),
            transitions,
        };
        let mut out = serde_json::to_vec(&doc).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, ModelFileError> {
        let header: Header =
            serde_json::from_slice(bytes).map_err(|e| corrupt(format!("header: {e}")))?;
        if header.format != MODEL_FORMAT {
            return Err(corrupt(format!("unknown format {:?}", header.format)));
        }
        if header.version != MODEL_FORMAT_VERSION {
            return Err(ModelFileError::VersionMismatch {
                found: header.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let doc: ModelDoc = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        doc.into_model()
    }
}

fn is_prob(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

impl ModelDoc {
    fn into_model(self) -> Result<SynthModel, ModelFileError> {
        self.domain.validate().map_err(|e| corrupt(e.to_string()))?;
        self.grid.validate().map_err(|e| corrupt(e.to_string()))?;
        let n = self.grid.num_cubes();
        if n > MAX_DECODED_CUBES {
            return Err(corrupt(format!("grid of {n} cubes exceeds decoder limit")));
        }
        if self.start.len() != n {
            return Err(corrupt(format!(
                "start vector has {} entries, grid has {n} cubes",
                self.start.len()
            )));
        }
        if !self.start.iter().all(|&p| is_prob(p)) {
            return Err(corrupt("start mass outside [0, 1]"));
        }
        let start_sum: f64 = self.start.iter().sum();
        if (start_sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(corrupt(format!("start mass sums to {start_sum}")));
        }
        if let Some(b) = &self.budget {
            let ok = b.epsilon > 0.0 && b.eps_s > 0.0 && b.eps_m > 0.0 && b.epsilon.is_finite();
            if !ok {
                return Err(corrupt("invalid budget"));
            }
        }

        let support = Support::new(self.grid);
        let mut probs = vec![0.0; support.num_cells()];
        let mut last_row: Option<usize> = None;
        for row in &self.transitions {
            if row.cube >= n {
                return Err(corrupt(format!("row {} outside grid", row.cube)));
            }
            if last_row.is_some_and(|l| l >= row.cube) {
                return Err(corrupt("transition rows not strictly ascending"));
            }
            last_row = Some(row.cube);
            let mut sum = 0.0;
            let entries = row
                .next
                .iter()
                .map(|&(id, p)| (Next::Cube(id), p))
                .chain(std::iter::once((Next::Stop, row.stop)));
            for (target, p) in entries {
                if !is_prob(p) {
                    return Err(corrupt(format!("row {}: probability {p}", row.cube)));
                }
                let cell = support.cell(row.cube, target).ok_or_else(|| {
                    corrupt(format!("row {}: {target:?} not a neighbor", row.cube))
                })?;
                if probs[cell] != 0.0 {
                    return Err(corrupt(format!("row {}: duplicate {target:?}", row.cube)));
                }
                probs[cell] = p;
                sum += p;
            }
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(corrupt(format!("row {} sums to {sum}", row.cube)));
            }
        }

        Ok(SynthModel {
            domain: self.domain,
            grid: self.grid,
            start: StartDistribution { mass: self.start },
            tm: TransitionMatrix::from_parts(support, probs),
            budget: self.budget,
            metadata: self.metadata,
        })
    }
}
