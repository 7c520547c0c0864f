//! Settings resolution: command-line flag, then config file, then built-in
//! default.

use std::path::{Path, PathBuf};

use dp_stts::grid::GridSpec;
use dp_stts::metrics::{EvalGrid, EvalParams};
use dp_stts::model::Privacy;
use dp_stts::synth::DEFAULT_MAX_LEN;
use serde::Deserialize;

use crate::args::{DomainArgs, EvalArgs, Format, GenArgs, InputArgs, ModelArgs};
use crate::error::CliError;
use crate::spec::{self, BBox, TimeWindow};

pub const DEFAULT_GRID: (u32, u32, u32) = (20, 20, 16);
pub const DEFAULT_V: u32 = 2;
pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_PIPELINE_RUNS: usize = 5;

/// Config file contents. Keys are the flag names with `_` for `-`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub format: Option<Format>,
    pub bbox: Option<String>,
    pub time_window: Option<String>,
    pub grid: Option<String>,
    pub v: Option<u32>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub noise_off: Option<bool>,
    pub epsilons: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub max_len: Option<usize>,
    pub eval_grid: Option<String>,
    pub sanity_fraction: Option<f64>,
    pub top_k: Option<usize>,
    pub bin_minutes: Option<f64>,
    pub runs: Option<usize>,
    pub model: Option<PathBuf>,
    pub synthetic: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|msg| CliError::Config {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("--{name} is required")))
}

#[derive(Debug, Clone)]
pub struct InputSettings {
    pub path: PathBuf,
    pub format: Format,
}

pub fn input(a: &InputArgs, f: &FileConfig) -> Result<InputSettings, CliError> {
    Ok(InputSettings {
        path: required(a.input.clone(), f.input.clone(), "input")?,
        format: a.format.or(f.format).unwrap_or(Format::Jsonl),
    })
}

#[derive(Debug, Clone, Default)]
pub struct DomainSettings {
    pub bbox: Option<BBox>,
    pub window: Option<TimeWindow>,
}

pub fn domain(a: &DomainArgs, f: &FileConfig) -> Result<DomainSettings, CliError> {
    let bbox = a
        .bbox
        .as_deref()
        .or(f.bbox.as_deref())
        .map(spec::parse_bbox)
        .transpose()?;
    let window = a
        .time_window
        .as_deref()
        .or(f.time_window.as_deref())
        .map(spec::parse_time_window)
        .transpose()?;
    Ok(DomainSettings { bbox, window })
}

#[derive(Debug, Clone, Copy)]
pub struct ModelSettings {
    pub grid: GridSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub noise_off: bool,
}

impl ModelSettings {
    pub fn privacy(&self, epsilon: f64) -> Privacy {
        if self.noise_off {
            Privacy::NoiseOff
        } else {
            Privacy::Budget {
                epsilon,
                delta_split: self.delta,
            }
        }
    }
}

pub fn model(a: &ModelArgs, f: &FileConfig) -> Result<ModelSettings, CliError> {
    let (w, h, t) = a
        .grid
        .as_deref()
        .or(f.grid.as_deref())
        .map(spec::parse_grid)
        .transpose()?
        .unwrap_or(DEFAULT_GRID);
    let v = a.v.or(f.v).unwrap_or(DEFAULT_V);
    Ok(ModelSettings {
        grid: GridSpec::new(w, h, t, v)?,
        epsilon: a.epsilon.or(f.epsilon).unwrap_or(DEFAULT_EPSILON),
        delta: a.delta.or(f.delta).unwrap_or(DEFAULT_DELTA),
        noise_off: a.noise_off || f.noise_off.unwrap_or(false),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GenSettings {
    /// `None` means "same as the original dataset".
    pub count: Option<usize>,
    pub max_len: usize,
}

pub fn gen(a: &GenArgs, f: &FileConfig) -> Result<GenSettings, CliError> {
    let max_len = a.max_len.or(f.max_len).unwrap_or(DEFAULT_MAX_LEN);
    if max_len == 0 {
        return Err(CliError::Usage("--max-len must be >= 1".into()));
    }
    let count = a.count.or(f.count);
    if count == Some(0) {
        return Err(CliError::Usage("--count must be >= 1".into()));
    }
    Ok(GenSettings { count, max_len })
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub params: EvalParams,
    pub runs: usize,
}

pub fn eval(a: &EvalArgs, f: &FileConfig, default_runs: usize) -> Result<EvalSettings, CliError> {
    let mut params = EvalParams::default();
    if let Some(s) = a.eval_grid.as_deref().or(f.eval_grid.as_deref()) {
        let (w, h) = spec::parse_eval_grid(s)?;
        params.eval_grid = EvalGrid::new(h, w)?;
    }
    if let Some(x) = a.sanity_fraction.or(f.sanity_fraction) {
        if !(x.is_finite() && x >= 0.0) {
            return Err(CliError::Usage(format!(
                "--sanity-fraction must be >= 0, got {x}"
            )));
        }
        params.sanity_fraction = x;
    }
    if let Some(k) = a.top_k.or(f.top_k) {
        params.top_k = k;
    }
    if let Some(m) = a.bin_minutes.or(f.bin_minutes) {
        if !(m.is_finite() && m > 0.0) {
            return Err(CliError::Usage(format!(
                "--bin-minutes must be positive, got {m}"
            )));
        }
        params.bin_seconds = m * 60.0;
    }
    let runs = a.runs.or(f.runs).unwrap_or(default_runs);
    if runs == 0 {
        return Err(CliError::Usage("--runs must be >= 1".into()));
    }
    Ok(EvalSettings { params, runs })
}
