//! Raw trajectory datasets: JSON-lines and Porto taxi CSV readers, a
//! JSON-lines writer, and domain filtering.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Point, SpatioTemporalDomain};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DEFAULT_MAX_REJECT_RATIO: f64 = 0.01;
pub const PORTO_SAMPLING_INTERVAL: f64 = 15.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("missing required column {0}")]
    MissingColumn(&'static str),
    #[error("{rejected} of {total} records rejected (first: line {first_line}: {first_reason})")]
    TooManyRejects {
        rejected: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub id: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawDataset {
    pub trajectories: Vec<RawTrajectory>,
    pub source: String,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_points(&self) -> usize {
        self.trajectories.iter().map(|t| t.points.len()).sum()
    }
}

/// Timestamp ordering required within a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeOrder {
    #[default]
    Strict,
    /// Accepts equal consecutive timestamps, as produced by synthesis.
    NonDecreasing,
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_reject_ratio: f64,
    pub time_order: TimeOrder,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_reject_ratio: DEFAULT_MAX_REJECT_RATIO,
            time_order: TimeOrder::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

/// A parsed dataset with the per-line rejects that were tolerated.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub dataset: RawDataset,
    pub rejects: Vec<Reject>,
    /// Records skipped on purpose (Porto `MISSING_DATA` or empty polyline).
    pub skipped: usize,
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    points: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct JsonRecordOut<'a> {
    id: &'a str,
    points: Vec<[f64; 3]>,
}

fn check_points(points: &[Point], order: TimeOrder) -> Result<(), String> {
    if points.is_empty() {
        return Err("trajectory has no points".into());
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.lon.is_finite() && p.lat.is_finite() && p.time.is_finite()))
    {
        return Err(format!("non-finite coordinate in {p:?}"));
    }
    let bad = points.windows(2).position(|w| match order {
        TimeOrder::Strict => !(w[0].time < w[1].time),
        TimeOrder::NonDecreasing => !(w[0].time <= w[1].time),
    });
    match bad {
        Some(i) => Err(format!(
            "timestamps out of order at point {} ({} then {})",
            i + 1,
            points[i].time,
            points[i + 1].time
        )),
        None => Ok(()),
    }
}

struct Collector {
    opts: ParseOptions,
    trajectories: Vec<RawTrajectory>,
    ids: HashSet<String>,
    rejects: Vec<Reject>,
    skipped: usize,
    total: usize,
}

impl Collector {
    fn new(opts: ParseOptions) -> Self {
        Self {
            opts,
            trajectories: Vec::new(),
            ids: HashSet::new(),
            rejects: Vec::new(),
            skipped: 0,
            total: 0,
        }
    }

    fn reject(&mut self, line: usize, reason: impl Into<String>) {
        self.rejects.push(Reject {
            line,
            reason: reason.into(),
        });
    }

    fn accept(&mut self, line: usize, id: String, points: Vec<Point>) {
        if let Err(reason) = check_points(&points, self.opts.time_order) {
            self.reject(line, reason);
        } else if !self.ids.insert(id.clone()) {
            self.reject(line, format!("duplicate id {id:?}"));
        } else {
            self.trajectories.push(RawTrajectory { id, points });
        }
    }

    fn finish(self, source: String) -> Result<Parsed, IngestError> {
        if self.total == 0 {
            return Err(IngestError::EmptyDataset);
        }
        if !self.rejects.is_empty() {
            let ratio = self.rejects.len() as f64 / self.total as f64;
            if ratio > self.opts.max_reject_ratio {
                let first = &self.rejects[0];
                return Err(IngestError::TooManyRejects {
                    rejected: self.rejects.len(),
                    total: self.total,
                    first_line: first.line,
                    first_reason: first.reason.clone(),
                });
            }
        }
        if self.trajectories.is_empty() {
            return Err(IngestError::EmptyDataset);
        }
        Ok(Parsed {
            dataset: RawDataset {
                trajectories: self.trajectories,
                source,
            },
            rejects: self.rejects,
            skipped: self.skipped,
        })
    }
}

/// Reads one `{"id": ..., "points": [[lon, lat, time], ...]}` object per
/// line. Blank lines are ignored. Line numbers are 1-based.
pub fn parse_jsonl_dataset<R: BufRead>(
    reader: R,
    source: &str,
    opts: ParseOptions,
) -> Result<Parsed, IngestError> {
    let mut col = Collector::new(opts);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                col.total += 1;
                col.reject(line_no, "invalid UTF-8");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if line.trim().is_empty() {
            continue;
        }
        col.total += 1;
        match serde_json::from_str::<JsonRecord>(&line) {
            Ok(rec) => {
                let points = rec
                    .points
                    .iter()
                    .map(|&[lon, lat, time]| Point { lon, lat, time })
                    .collect();
                col.accept(line_no, rec.id, points);
            }
            Err(e) => col.reject(line_no, e.to_string()),
        }
    }
    col.finish(source.to_string())
}

pub fn write_jsonl_dataset<W: Write>(ds: &RawDataset, mut out: W) -> std::io::Result<()> {
    for tr in &ds.trajectories {
        let rec = JsonRecordOut {
            id: &tr.id,
            points: tr.points.iter().map(|p| [p.lon, p.lat, p.time]).collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn is_truthy(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "true" | "1" | "t" | "yes"
    )
}

/// Reads the ECML/PKDD 2015 Porto taxi CSV. Point `k` of a trip is stamped
/// `TIMESTAMP + k * sampling_interval`.
pub fn parse_porto_csv<R: Read>(
    reader: R,
    source: &str,
    sampling_interval: f64,
    opts: ParseOptions,
) -> Result<Parsed, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRecord {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let find = |name: &'static str| headers.iter().position(|h| h.trim() == name);
    let trip_col = find("TRIP_ID").ok_or(IngestError::MissingColumn("TRIP_ID"))?;
    let ts_col = find("TIMESTAMP").ok_or(IngestError::MissingColumn("TIMESTAMP"))?;
    let poly_col = find("POLYLINE").ok_or(IngestError::MissingColumn("POLYLINE"))?;
    let missing_col = find("MISSING_DATA");

    let mut col = Collector::new(opts);
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() as usize;
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                if e.is_io_error() {
                    if let csv::ErrorKind::Io(io) = e.into_kind() {
                        return Err(IngestError::Io(io));
                    }
                    unreachable!();
                }
                col.total += 1;
                col.reject(line, e.to_string());
                continue;
            }
        }
        let line = record.position().map_or(line, |p| p.line() as usize);
        col.total += 1;
        let field = |i: usize| record.get(i);
        let (Some(id), Some(ts), Some(poly)) = (field(trip_col), field(ts_col), field(poly_col))
        else {
            col.reject(line, "record has too few fields");
            continue;
        };
        if missing_col.and_then(field).is_some_and(is_truthy) {
            col.skipped += 1;
            continue;
        }
        let start: f64 = match ts.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                col.reject(line, format!("bad TIMESTAMP {ts:?}"));
                continue;
            }
        };
        let pairs: Vec<[f64; 2]> = match serde_json::from_str(poly) {
            Ok(p) => p,
            Err(e) => {
                col.reject(line, format!("bad POLYLINE: {e}"));
                continue;
            }
        };
        if pairs.is_empty() {
            col.skipped += 1;
            continue;
        }
        let points = pairs
            .iter()
            .enumerate()
            .map(|(k, &[lon, lat])| Point {
                lon,
                lat,
                time: start + k as f64 * sampling_interval,
            })
            .collect();
        col.accept(line, id.trim().to_string(), points);
    }
    col.finish(source.to_string())
}

/// How point times are compared against the domain's time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    /// Times and window are both absolute (e.g. epoch seconds).
    #[default]
    Absolute,
    /// The window is in seconds of day; point times are reduced modulo one
    /// day (UTC) and rewritten as seconds of day.
    TimeOfDay,
}

/// Keeps the in-domain points of each trajectory in their original order and
/// drops trajectories left empty. In [`TimeMode::TimeOfDay`] retained times
/// are rewritten to seconds of day, and a trajectory is cut at the first
/// point whose rewritten time does not increase (a trip crossing days).
pub fn filter_dataset(ds: &RawDataset, dom: &SpatioTemporalDomain, mode: TimeMode) -> RawDataset {
    let trajectories = ds
        .trajectories
        .iter()
        .filter_map(|tr| {
            let mut kept: Vec<Point> = Vec::new();
            for p in &tr.points {
                if !dom.contains_space(p.lon, p.lat) {
                    continue;
                }
                let time = match mode {
                    TimeMode::Absolute => p.time,
                    TimeMode::TimeOfDay => p.time.rem_euclid(SECONDS_PER_DAY),
                };
                if !dom.contains_time(time) {
                    continue;
                }
                if let Some(last) = kept.last() {
                    if !(last.time < time) {
                        break;
                    }
                }
                kept.push(Point { time, ..*p });
            }
            (!kept.is_empty()).then(|| RawTrajectory {
                id: tr.id.clone(),
                points: kept,
            })
        })
        .collect();
    RawDataset {
        trajectories,
        source: ds.source.clone(),
    }
}
