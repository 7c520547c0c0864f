use std::collections::HashMap;

use super::{EvalGrid, MetricsError};
use crate::grid::SpatioTemporalDomain;
use crate::ingest::RawDataset;

/// An ordered list of evaluation-grid cells and its occurrence count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub cells: Vec<u32>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopPatterns {
    pub patterns: Vec<Pattern>,
    pub requested: usize,
}

impl TopPatterns {
    /// Fewer than `k` distinct patterns exist in the dataset.
    pub fn is_short(&self) -> bool {
        self.patterns.len() < self.requested
    }
}

/// Cell sequence of each trajectory with consecutive repeats collapsed.
/// Points outside the spatial box are skipped.
pub fn cell_sequences(ds: &RawDataset, dom: &SpatioTemporalDomain, g: &EvalGrid) -> Vec<Vec<u32>> {
    ds.trajectories
        .iter()
        .map(|tr| {
            let mut seq: Vec<u32> = tr
                .points
                .iter()
                .filter_map(|p| g.cell(p.lon, p.lat, dom))
                .map(|c| c as u32)
                .collect();
            seq.dedup();
            seq
        })
        .collect()
}

fn count_windows(seqs: &[Vec<u32>], min_len: usize, max_len: usize) -> HashMap<&[u32], u64> {
    let mut counts: HashMap<&[u32], u64> = HashMap::new();
    for seq in seqs {
        for len in min_len..=max_len.min(seq.len()) {
            for w in seq.windows(len) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn check_lengths(min_len: usize, max_len: usize) -> Result<(), MetricsError> {
    if min_len < 1 || min_len > max_len {
        return Err(MetricsError::InvalidParameter(format!(
            "pattern lengths {min_len}..={max_len}"
        )));
    }
    Ok(())
}

/// The `k` most frequent contiguous cell patterns with length in
/// `[min_len, max_len]`. Every window is one occurrence, overlapping ones
/// included. Ties are broken by ascending lexicographic cell order.
pub fn mine_top_k_patterns(
    ds: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
    k: usize,
    min_len: usize,
    max_len: usize,
) -> Result<TopPatterns, MetricsError> {
    if k < 2 {
        return Err(MetricsError::InvalidParameter(format!(
            "k must be >= 2, got {k}"
        )));
    }
    check_lengths(min_len, max_len)?;
    let seqs = cell_sequences(ds, dom, g);
    let counts = count_windows(&seqs, min_len, max_len);
    let mut all: Vec<(&[u32], u64)> = counts.into_iter().collect();
    all.sort_unstable_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
    all.truncate(k);
    Ok(TopPatterns {
        patterns: all
            .into_iter()
            .map(|(cells, count)| Pattern {
                cells: cells.to_vec(),
                count,
            })
            .collect(),
        requested: k,
    })
}

/// Occurrences of each of `patterns` in `ds`, in the same order.
pub fn count_pattern_occurrences(
    ds: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
    patterns: &[Pattern],
) -> Vec<u64> {
    let Some(min_len) = patterns.iter().map(|p| p.cells.len()).min() else {
        return Vec::new();
    };
    let max_len = patterns
        .iter()
        .map(|p| p.cells.len())
        .max()
        .unwrap_or(min_len);
    let index: HashMap<&[u32], usize> = patterns
        .iter()
        .enumerate()
        .map(|(i, p)| (p.cells.as_slice(), i))
        .collect();
    let mut out = vec![0u64; patterns.len()];
    for seq in cell_sequences(ds, dom, g) {
        for len in min_len..=max_len.min(seq.len()) {
            for w in seq.windows(len) {
                if let Some(&i) = index.get(w) {
                    out[i] += 1;
                }
            }
        }
    }
    out
}
