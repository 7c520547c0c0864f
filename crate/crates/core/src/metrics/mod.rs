//! Utility metrics comparing an original dataset against a synthetic one:
//! temporal visit distribution, location AvRE, location Kendall-tau,
//! frequent-pattern Kendall-tau, trip error and length error.

mod kendall;
mod patterns;

pub use kendall::kendall_tau;
pub use patterns::{
    cell_sequences, count_pattern_occurrences, mine_top_k_patterns, Pattern, TopPatterns,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{axis_index, SpatioTemporalDomain};
use crate::ingest::RawDataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Uniform `rows × cols` grid over the spatial box; each cell is a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub rows: u32,
    pub cols: u32,
}

impl EvalGrid {
    pub fn new(rows: u32, cols: u32) -> Result<Self, MetricsError> {
        if rows == 0 || cols == 0 {
            return Err(MetricsError::InvalidParameter(format!(
                "evaluation grid {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn num_cells(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Cell id `row * cols + col`, or `None` outside the box.
    pub fn cell(&self, lon: f64, lat: f64, dom: &SpatioTemporalDomain) -> Option<usize> {
        if !dom.contains_space(lon, lat) {
            return None;
        }
        let col = axis_index(
            lon,
            dom.left,
            (dom.right - dom.left) / self.cols as f64,
            self.cols,
        );
        let row = axis_index(
            lat,
            dom.bottom,
            (dom.top - dom.bottom) / self.rows as f64,
            self.rows,
        );
        Some(row as usize * self.cols as usize + col as usize)
    }
}

const DIST_TOLERANCE: f64 = 1e-6;

fn check_distribution(p: &[f64], name: &str) -> Result<(), MetricsError> {
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(MetricsError::NotADistribution(format!(
            "{name} has entry {x}"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DIST_TOLERANCE {
        return Err(MetricsError::NotADistribution(format!(
            "{name} sums to {s}"
        )));
    }
    Ok(())
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    Ok(jsd_unchecked(p, q))
}

fn jsd_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = (a + b) / 2.0;
        if a > 0.0 {
            total += a * (a / m).log2();
        }
        if b > 0.0 {
            total += b * (b / m).log2();
        }
    }
    (total / 2.0).clamp(0.0, 1.0)
}

fn normalize(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// JSD between two sparse count maps over the union of their keys.
fn jsd_of_counts<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().chain(b.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    let pa: Vec<f64> = keys
        .iter()
        .map(|k| a.get(k).copied().unwrap_or(0.0))
        .collect();
    let pb: Vec<f64> = keys
        .iter()
        .map(|k| b.get(k).copied().unwrap_or(0.0))
        .collect();
    jsd_unchecked(&normalize(&pa), &normalize(&pb))
}

pub fn num_time_bins(dom: &SpatioTemporalDomain, bin_width: f64) -> usize {
    (((dom.e_time - dom.s_time) / bin_width).ceil() as usize).max(1)
}

/// Share of visits falling in each `bin_width`-second slice of the time
/// window. Points outside the window are ignored.
pub fn temporal_visit_distribution(
    ds: &RawDataset,
    dom: &SpatioTemporalDomain,
    bin_width: f64,
) -> Result<Vec<f64>, MetricsError> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(MetricsError::InvalidParameter(format!(
            "bin width {bin_width}"
        )));
    }
    let bins = num_time_bins(dom, bin_width);
    let mut counts = vec![0.0; bins];
    let mut seen = false;
    for p in ds.trajectories.iter().flat_map(|t| &t.points) {
        if dom.contains_time(p.time) {
            counts[axis_index(p.time, dom.s_time, bin_width, bins as u32) as usize] += 1.0;
            seen = true;
        }
    }
    if !seen {
        return Err(MetricsError::EmptyDataset);
    }
    Ok(normalize(&counts))
}

/// Visits per evaluation cell (every point counts once).
pub fn location_popularity(ds: &RawDataset, dom: &SpatioTemporalDomain, g: &EvalGrid) -> Vec<u64> {
    let mut pop = vec![0u64; g.num_cells()];
    for p in ds.trajectories.iter().flat_map(|t| &t.points) {
        if let Some(c) = g.cell(p.lon, p.lat, dom) {
            pop[c] += 1;
        }
    }
    pop
}

/// Mean over cells of `|pop_D - pop_syn| / max(pop_D, sanity_bound)`.
pub fn avre_from_popularity(
    real: &[u64],
    syn: &[u64],
    sanity_bound: f64,
) -> Result<f64, MetricsError> {
    if real.len() != syn.len() {
        return Err(MetricsError::DimensionMismatch {
            left: real.len(),
            right: syn.len(),
        });
    }
    if real.is_empty() {
        return Err(MetricsError::TooFewItems { needed: 1, got: 0 });
    }
    let total: f64 = real
        .iter()
        .zip(syn)
        .map(|(&r, &s)| {
            let diff = r.abs_diff(s) as f64;
            if diff == 0.0 {
                0.0
            } else {
                diff / (r as f64).max(sanity_bound)
            }
        })
        .sum();
    Ok(total / real.len() as f64)
}

pub fn location_avre(
    d: &RawDataset,
    d_syn: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
    sanity_bound: f64,
) -> Result<f64, MetricsError> {
    avre_from_popularity(
        &location_popularity(d, dom, g),
        &location_popularity(d_syn, dom, g),
        sanity_bound,
    )
}

fn as_f64(v: &[u64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn location_kt(
    d: &RawDataset,
    d_syn: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
) -> Result<f64, MetricsError> {
    kendall_tau(
        &as_f64(&location_popularity(d, dom, g)),
        &as_f64(&location_popularity(d_syn, dom, g)),
    )
}

/// Kendall-tau between the occurrence counts of `d`'s top-k patterns in `d`
/// and in `d_syn`.
pub fn fp_kt(
    d: &RawDataset,
    d_syn: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
    k: usize,
    min_len: usize,
    max_len: usize,
) -> Result<f64, MetricsError> {
    let top = mine_top_k_patterns(d, dom, g, k, min_len, max_len)?;
    if top.patterns.len() < 2 {
        return Err(MetricsError::TooFewItems {
            needed: 2,
            got: top.patterns.len(),
        });
    }
    let real: Vec<f64> = top.patterns.iter().map(|p| p.count as f64).collect();
    let syn = as_f64(&count_pattern_occurrences(d_syn, dom, g, &top.patterns));
    kendall_tau(&real, &syn)
}

fn trip_counts(
    ds: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for tr in &ds.trajectories {
        let mut cells = tr.points.iter().filter_map(|p| g.cell(p.lon, p.lat, dom));
        let Some(first) = cells.next() else { continue };
        let last = cells.next_back().unwrap_or(first);
        *out.entry((first, last)).or_insert(0.0) += 1.0;
    }
    out
}

/// JSD between the (start cell, end cell) distributions.
pub fn trip_error(
    d: &RawDataset,
    d_syn: &RawDataset,
    dom: &SpatioTemporalDomain,
    g: &EvalGrid,
) -> Result<f64, MetricsError> {
    let a = trip_counts(d, dom, g);
    let b = trip_counts(d_syn, dom, g);
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    Ok(jsd_of_counts(&a, &b))
}

/// Bucket index of a trajectory length; lengths outside `[min, max]` clamp
/// to the end buckets.
fn length_bucket(len: usize, min: usize, max: usize, buckets: usize) -> usize {
    let width = (max - min) as f64 / buckets as f64;
    if len <= min {
        return 0;
    }
    let b = ((len - min) as f64 / width).floor() as usize;
    b.min(buckets - 1)
}

/// JSD between length histograms, with `buckets` equal-width buckets
/// spanning the original dataset's min..max point count. When every
/// original trajectory has the same length `L`, the comparison is between
/// the two shares of "length == L" versus "other".
pub fn length_error(
    d: &RawDataset,
    d_syn: &RawDataset,
    buckets: usize,
) -> Result<f64, MetricsError> {
    if buckets == 0 {
        return Err(MetricsError::InvalidParameter(
            "buckets must be >= 1".into(),
        ));
    }
    if d.is_empty() || d_syn.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let lens = |ds: &RawDataset| -> Vec<usize> {
        ds.trajectories.iter().map(|t| t.points.len()).collect()
    };
    let real = lens(d);
    let syn = lens(d_syn);
    let min = *real.iter().min().expect("non-empty");
    let max = *real.iter().max().expect("non-empty");
    let (mut hr, mut hs);
    if min == max {
        hr = vec![0.0; 2];
        hs = vec![0.0; 2];
        for &l in &real {
            hr[usize::from(l != min)] += 1.0;
        }
        for &l in &syn {
            hs[usize::from(l != min)] += 1.0;
        }
    } else {
        hr = vec![0.0; buckets];
        hs = vec![0.0; buckets];
        for &l in &real {
            hr[length_bucket(l, min, max, buckets)] += 1.0;
        }
        for &l in &syn {
            hs[length_bucket(l, min, max, buckets)] += 1.0;
        }
    }
    Ok(jsd_unchecked(&normalize(&hr), &normalize(&hs)))
}

/// Evaluation settings; defaults are the reference experiment's values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub eval_grid: EvalGrid,
    /// Sanity bound as a fraction of the number of original trajectories.
    pub sanity_fraction: f64,
    pub top_k: usize,
    pub min_pattern_len: usize,
    pub max_pattern_len: usize,
    pub bin_seconds: f64,
    pub length_buckets: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            eval_grid: EvalGrid { rows: 20, cols: 20 },
            sanity_fraction: 0.001,
            top_k: 200,
            min_pattern_len: 2,
            max_pattern_len: 8,
            bin_seconds: 900.0,
            length_buckets: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub temporal_bin_seconds: f64,
    pub temporal_hist_real: Vec<f64>,
    pub temporal_hist_syn: Vec<f64>,
    pub temporal_jsd: f64,
    pub location_avre: f64,
    pub location_kt: f64,
    pub fp_kt: f64,
    pub trip_error: f64,
    pub length_error: f64,
}

impl MetricsReport {
    /// Element-wise mean of several reports (for repeated runs).
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg_vec = |f: fn(&MetricsReport) -> &Vec<f64>| -> Vec<f64> {
            (0..f(first).len())
                .map(|i| reports.iter().map(|r| f(r)[i]).sum::<f64>() / n)
                .collect()
        };
        Some(MetricsReport {
            temporal_bin_seconds: first.temporal_bin_seconds,
            temporal_hist_real: avg_vec(|r| &r.temporal_hist_real),
            temporal_hist_syn: avg_vec(|r| &r.temporal_hist_syn),
            temporal_jsd: avg(|r| r.temporal_jsd),
            location_avre: avg(|r| r.location_avre),
            location_kt: avg(|r| r.location_kt),
            fp_kt: avg(|r| r.fp_kt),
            trip_error: avg(|r| r.trip_error),
            length_error: avg(|r| r.length_error),
        })
    }
}

/// Two-column CSV (`bin_start_seconds,probability`) for plotting.
pub fn temporal_plot_csv(hist: &[f64], s_time: f64, bin_seconds: f64) -> String {
    let mut out = String::from("bin_start_seconds,probability\n");
    for (i, p) in hist.iter().enumerate() {
        out.push_str(&format!("{},{}\n", s_time + i as f64 * bin_seconds, p));
    }
    out
}

pub fn evaluate_all(
    d: &RawDataset,
    d_syn: &RawDataset,
    dom: &SpatioTemporalDomain,
    params: &EvalParams,
) -> Result<MetricsReport, MetricsError> {
    let g = &params.eval_grid;
    let hist_real = temporal_visit_distribution(d, dom, params.bin_seconds)?;
    let hist_syn = temporal_visit_distribution(d_syn, dom, params.bin_seconds)?;
    let temporal_jsd = jsd(&hist_real, &hist_syn)?;
    let sanity_bound = params.sanity_fraction * d.len() as f64;
    Ok(MetricsReport {
        temporal_bin_seconds: params.bin_seconds,
        temporal_jsd,
        location_avre: location_avre(d, d_syn, dom, g, sanity_bound)?,
        location_kt: location_kt(d, d_syn, dom, g)?,
        fp_kt: fp_kt(
            d,
            d_syn,
            dom,
            g,
            params.top_k,
            params.min_pattern_len,
            params.max_pattern_len,
        )?,
        trip_error: trip_error(d, d_syn, dom, g)?,
        length_error: length_error(d, d_syn, params.length_buckets)?,
        temporal_hist_real: hist_real,
        temporal_hist_syn: hist_syn,
    })
}

#[cfg(test)]
mod tests;
