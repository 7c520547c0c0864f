use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use dp_stts::grid::{discretize_trajectory, CubeTrajectory, GridSpec, SpatioTemporalDomain};
use dp_stts::ingest::{
    self, filter_dataset, ParseOptions, RawDataset, TimeMode, TimeOrder, PORTO_SAMPLING_INTERVAL,
};
use dp_stts::metrics::{evaluate_all, temporal_plot_csv, EvalParams, MetricsReport};
use dp_stts::model::{build_model, Privacy, SynthModel};
use dp_stts::synth::{generate_dataset, GenerationConfig};
use log::{info, warn};
use serde::Serialize;

use crate::args::{BuildArgs, EvaluateArgs, Format, PipelineArgs, SynthesizeArgs};
use crate::config::{self, DomainSettings, FileConfig, GenSettings, DEFAULT_SEED};
use crate::error::CliError;
use crate::spec;

/// Writes `bytes` to a temporary file next to `path` and renames it over.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn load_dataset(path: &Path, format: Format, order: TimeOrder) -> Result<RawDataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let opts = ParseOptions {
        time_order: order,
        ..Default::default()
    };
    let source = path.display().to_string();
    let parsed = match format {
        Format::Jsonl => ingest::parse_jsonl_dataset(BufReader::new(file), &source, opts),
        Format::PortoCsv => {
            ingest::parse_porto_csv(BufReader::new(file), &source, PORTO_SAMPLING_INTERVAL, opts)
        }
    }
    .map_err(|source| CliError::Ingest {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(r) = parsed.rejects.first() {
        warn!(
            "{}: rejected {} malformed records (first: line {}: {})",
            path.display(),
            parsed.rejects.len(),
            r.line,
            r.reason
        );
    }
    info!(
        "{}: {} trajectories, {} points, {} skipped",
        path.display(),
        parsed.dataset.len(),
        parsed.dataset.num_points(),
        parsed.skipped
    );
    Ok(parsed.dataset)
}

pub fn write_dataset(path: &Path, ds: &RawDataset) -> Result<(), CliError> {
    let mut buf = Vec::new();
    ingest::write_jsonl_dataset(ds, &mut buf).map_err(|e| CliError::io(path, e))?;
    write_atomic(path, &buf)
}

pub fn read_model(path: &Path) -> Result<SynthModel, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    SynthModel::from_json_slice(&bytes).map_err(|source| CliError::ModelFile {
        path: path.to_path_buf(),
        source,
    })
}

/// Domain from explicit bbox/window, falling back to the data's extent.
pub fn resolve_domain(
    d: &DomainSettings,
    data: &RawDataset,
) -> Result<(SpatioTemporalDomain, TimeMode), CliError> {
    let pts = || data.trajectories.iter().flat_map(|t| &t.points);
    let extent = |f: fn(&dp_stts::grid::Point) -> f64| {
        pts()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    };
    let (left, right, bottom, top) = match d.bbox {
        Some(b) => (b.lon_min, b.lon_max, b.lat_min, b.lat_max),
        None => {
            let (l, r) = extent(|p| p.lon);
            let (b, t) = extent(|p| p.lat);
            (l, r, b, t)
        }
    };
    let (s, e, mode) = match d.window {
        Some(w) => (w.start, w.end, w.mode),
        None => {
            let (s, e) = extent(|p| p.time);
            (s, e, TimeMode::Absolute)
        }
    };
    Ok((
        SpatioTemporalDomain::new(left, right, bottom, top, s, e)?,
        mode,
    ))
}

/// Filtered original dataset and its cube trajectories.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub domain: SpatioTemporalDomain,
    pub time_mode: TimeMode,
    pub grid: GridSpec,
    pub filtered: RawDataset,
    pub cubes: Vec<CubeTrajectory>,
}

pub fn prepare(
    raw: &RawDataset,
    domain: SpatioTemporalDomain,
    time_mode: TimeMode,
    grid: GridSpec,
) -> Result<Prepared, CliError> {
    let filtered = filter_dataset(raw, &domain, time_mode);
    let cubes: Vec<CubeTrajectory> = filtered
        .trajectories
        .iter()
        .filter_map(|t| discretize_trajectory(&t.points, &domain, &grid).ok())
        .collect();
    let dropped = raw.len() - cubes.len();
    info!(
        "kept {} of {} trajectories inside the domain ({} dropped)",
        cubes.len(),
        raw.len(),
        dropped
    );
    if cubes.is_empty() {
        return Err(CliError::Model(dp_stts::model::ModelError::EmptyDataset));
    }
    Ok(Prepared {
        domain,
        time_mode,
        grid,
        filtered,
        cubes,
    })
}

pub fn fit(p: &Prepared, privacy: Privacy, seed: u64) -> Result<SynthModel, CliError> {
    let mut m = build_model(&p.cubes, p.domain, p.grid, privacy, seed)?;
    m.metadata.time_mode = p.time_mode;
    match m.budget {
        Some(b) => info!(
            "budget: epsilon = {} = eps_s {} + eps_m {} (delta {})",
            b.total(),
            b.eps_s,
            b.eps_m,
            b.delta_split
        ),
        None => warn!("noise off: the model is not differentially private"),
    }
    Ok(m)
}

/// Seed of run `r`; run 0 uses the base seed itself.
pub fn derive_seed(base: u64, run: usize) -> u64 {
    base ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn gen_config(
    model: &SynthModel,
    g: &GenSettings,
    seed: u64,
) -> Result<GenerationConfig, CliError> {
    Ok(GenerationConfig::new(
        g.count.unwrap_or(model.metadata.source_size),
        g.max_len,
        seed,
    )?)
}

pub fn synthesize(model: &SynthModel, g: &GenSettings, seed: u64) -> Result<RawDataset, CliError> {
    let cfg = gen_config(model, g, seed)?;
    let ds = generate_dataset(model, &cfg)?;
    info!(
        "generated {} synthetic trajectories (seed {seed})",
        ds.len()
    );
    Ok(ds)
}

/// Outcome of repeated build/synthesize/evaluate runs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub mean: MetricsReport,
    pub runs: Vec<MetricsReport>,
    /// Model and synthetic dataset of the first run.
    pub model: SynthModel,
    pub synthetic: RawDataset,
}

/// `runs` independent repetitions, each with a fresh model and fresh
/// samples under `derive_seed(seed, r)`.
pub fn experiment(
    p: &Prepared,
    privacy: Privacy,
    g: &GenSettings,
    params: &EvalParams,
    seed: u64,
    runs: usize,
) -> Result<Experiment, CliError> {
    let mut reports = Vec::with_capacity(runs);
    let mut first = None;
    for r in 0..runs {
        let s = derive_seed(seed, r);
        let model = fit(p, privacy, s)?;
        let syn = synthesize(&model, g, s)?;
        let rep = evaluate_all(&p.filtered, &syn, &p.domain, params)?;
        info!("run {r}: {}", summary_line(&rep));
        reports.push(rep);
        if first.is_none() {
            first = Some((model, syn));
        }
    }
    let (model, synthetic) = first.ok_or_else(|| CliError::Usage("--runs must be >= 1".into()))?;
    Ok(Experiment {
        mean: MetricsReport::mean(&reports).expect("at least one run"),
        runs: reports,
        model,
        synthetic,
    })
}

pub fn summary_line(r: &MetricsReport) -> String {
    format!(
        "temporal JSD {:.4}, AvRE {:.4}, location KT {:.4}, FP KT {:.4}, trip error {:.4}, length error {:.4}",
        r.temporal_jsd, r.location_avre, r.location_kt, r.fp_kt, r.trip_error, r.length_error
    )
}

fn to_json(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report serializes");
    out.push(b'\n');
    out
}

/// Writes `report.json`, `temporal_real.csv` and `temporal_syn.csv`.
pub fn write_report(dir: &Path, r: &MetricsReport, s_time: f64) -> Result<(), CliError> {
    create_dir(dir)?;
    write_atomic(&dir.join("report.json"), &to_json(r))?;
    let bin = r.temporal_bin_seconds;
    write_atomic(
        &dir.join("temporal_real.csv"),
        temporal_plot_csv(&r.temporal_hist_real, s_time, bin).as_bytes(),
    )?;
    write_atomic(
        &dir.join("temporal_syn.csv"),
        temporal_plot_csv(&r.temporal_hist_syn, s_time, bin).as_bytes(),
    )
}

fn file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    path.map(FileConfig::load)
        .transpose()
        .map(Option::unwrap_or_default)
}

pub fn cmd_build(a: &BuildArgs, config: Option<&Path>) -> Result<(), CliError> {
    let f = file_config(config)?;
    let input = config::input(&a.input, &f)?;
    let dom = config::domain(&a.domain, &f)?;
    let ms = config::model(&a.model, &f)?;
    let seed = a.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
    let out = config::required(a.out.clone(), f.out.clone(), "out")?;

    let raw = load_dataset(&input.path, input.format, TimeOrder::Strict)?;
    let (domain, mode) = resolve_domain(&dom, &raw)?;
    let p = prepare(&raw, domain, mode, ms.grid)?;
    let model = fit(&p, ms.privacy(ms.epsilon), seed)?;
    write_atomic(&out, &model.to_json_vec())?;
    info!("wrote model {}", out.display());
    Ok(())
}

pub fn cmd_synthesize(a: &SynthesizeArgs, config: Option<&Path>) -> Result<(), CliError> {
    let f = file_config(config)?;
    let model_path = config::required(a.model.clone(), f.model.clone(), "model")?;
    let g = config::gen(&a.gen, &f)?;
    let seed = a.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
    let out = config::required(a.out.clone(), f.out.clone(), "out")?;

    let model = read_model(&model_path)?;
    let ds = synthesize(&model, &g, seed)?;
    write_dataset(&out, &ds)?;
    info!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs, config: Option<&Path>) -> Result<(), CliError> {
    let f = file_config(config)?;
    let input = config::input(&a.input, &f)?;
    let es = config::eval(&a.eval, &f, 1)?;
    let g = config::gen(&a.gen, &f)?;
    let seed = a.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
    let out = config::required(a.out.clone(), f.out.clone(), "out")?;
    let synthetic = a.synthetic.clone().or(f.synthetic.clone());
    let model_path = a.model.clone().or(f.model.clone());
    let model = model_path.as_deref().map(read_model).transpose()?;

    let raw = load_dataset(&input.path, input.format, TimeOrder::Strict)?;
    let dom = config::domain(&a.domain, &f)?;
    let (domain, mode) = match &model {
        Some(m) if dom.bbox.is_none() && dom.window.is_none() => (m.domain, m.metadata.time_mode),
        _ => resolve_domain(&dom, &raw)?,
    };
    let real = filter_dataset(&raw, &domain, mode);

    let report = match (synthetic, &model) {
        (Some(path), _) => {
            if es.runs != 1 {
                return Err(CliError::Usage(
                    "--runs needs --model instead of --synthetic".into(),
                ));
            }
            let syn = load_dataset(&path, Format::Jsonl, TimeOrder::NonDecreasing)?;
            evaluate_all(&real, &syn, &domain, &es.params)?
        }
        (None, Some(m)) => {
            let mut reports = Vec::with_capacity(es.runs);
            for r in 0..es.runs {
                let syn = synthesize(m, &g, derive_seed(seed, r))?;
                let rep = evaluate_all(&real, &syn, &domain, &es.params)?;
                info!("run {r}: {}", summary_line(&rep));
                reports.push(rep);
            }
            MetricsReport::mean(&reports).expect("runs >= 1")
        }
        (None, None) => {
            return Err(CliError::Usage(
                "evaluate needs --synthetic or --model".into(),
            ))
        }
    };
    info!("{}", summary_line(&report));
    write_report(&out, &report, domain.s_time)?;
    info!("wrote report to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    epsilon: Option<f64>,
    dir: String,
    report: &'a MetricsReport,
}

fn sweep_dir(epsilon: Option<f64>) -> String {
    match epsilon {
        Some(e) => format!("eps-{e}"),
        None => "noise-off".into(),
    }
}

pub fn cmd_pipeline(a: &PipelineArgs, config: Option<&Path>) -> Result<(), CliError> {
    let f = file_config(config)?;
    let input = config::input(&a.input, &f)?;
    let dom = config::domain(&a.domain, &f)?;
    let ms = config::model(&a.model, &f)?;
    let g = config::gen(&a.gen, &f)?;
    let es = config::eval(&a.eval, &f, config::DEFAULT_PIPELINE_RUNS)?;
    let seed = a.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
    let out: PathBuf = config::required(a.out.clone(), f.out.clone(), "out")?;
    let epsilons: Vec<Option<f64>> = if ms.noise_off {
        vec![None]
    } else {
        match a.epsilons.as_deref() {
            Some(s) => spec::parse_epsilons(s)?,
            None => f.epsilons.clone().unwrap_or_else(|| vec![ms.epsilon]),
        }
        .into_iter()
        .map(Some)
        .collect()
    };

    let raw = load_dataset(&input.path, input.format, TimeOrder::Strict)?;
    let (domain, mode) = resolve_domain(&dom, &raw)?;
    let p = prepare(&raw, domain, mode, ms.grid)?;
    create_dir(&out)?;

    let mut results = Vec::new();
    for eps in &epsilons {
        let privacy = ms.privacy(eps.unwrap_or(ms.epsilon));
        let exp = experiment(&p, privacy, &g, &es.params, seed, es.runs)?;
        let dir = sweep_dir(*eps);
        let sub = out.join(&dir);
        create_dir(&sub)?;
        write_atomic(&sub.join("model.json"), &exp.model.to_json_vec())?;
        write_dataset(&sub.join("synthetic.jsonl"), &exp.synthetic)?;
        write_report(&sub, &exp.mean, domain.s_time)?;
        info!("{dir} ({} runs): {}", es.runs, summary_line(&exp.mean));
        results.push((*eps, dir, exp.mean));
    }
    let summary: Vec<SweepEntry> = results
        .iter()
        .map(|(e, d, r)| SweepEntry {
            epsilon: *e,
            dir: d.clone(),
            report: r,
        })
        .collect();
    write_atomic(&out.join("summary.json"), &to_json(&summary))?;
    Ok(())
}
