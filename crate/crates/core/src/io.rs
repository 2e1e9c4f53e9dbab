//! File formats: event CSVs, rate curves, experiment configs and JSON results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::experiments::{ExperimentConfig, ExperimentReport, GridRow};
use crate::gof::{GofTestResult, KsResult};
use crate::models::{EventSequence, ModelKind, ModelSpec, ObservationWindow};

/// 17 significant digits: enough for every f64 to survive a text round trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `unit = (original − offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn identity() -> Self {
        Self {
            offset: 0.0,
            scale: 1.0,
        }
    }

    pub fn forward(&self, t: f64) -> f64 {
        (t - self.offset) / self.scale
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.offset + u * self.scale
    }
}

/// How raw event times become an [`EventSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowPolicy {
    /// Window start in file units (default 0).
    pub start: Option<f64>,
    /// Window end in file units (default: the last event time).
    pub end: Option<f64>,
    /// Drop events at or before this time; the window then starts here.
    pub exclude_before: Option<f64>,
    /// Map the window affinely onto `[0, 1]`.
    pub rescale: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub events: EventSequence,
    pub map: AffineMap,
    pub n_rows: usize,
    pub n_excluded: usize,
}

/// Reads a one-column CSV of event times (optional header `time`).
///
/// Rows are sorted; repeated times are rejected with their row numbers.
pub fn read_event_times(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    parse_event_times(&text)
}

pub fn parse_event_times(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(f64, u64)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("events CSV: {e}")))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.len() != 1 {
            return Err(Error::Parse(format!(
                "row {line}: expected one column, found {}",
                rec.len()
            )));
        }
        let field = &rec[0];
        if i == 0 && field.eq_ignore_ascii_case("time") {
            continue;
        }
        let t: f64 = field
            .parse()
            .map_err(|_| Error::Parse(format!("row {line}: {field:?} is not a number")))?;
        if !t.is_finite() {
            return Err(Error::Parse(format!("row {line}: time must be finite")));
        }
        rows.push((t, line));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let dups: Vec<String> = rows
        .windows(2)
        .filter(|w| w[0].0 == w[1].0)
        .map(|w| format!("rows {} and {} ({})", w[0].1, w[1].1, w[0].0))
        .collect();
    if !dups.is_empty() {
        return Err(Error::Parse(format!("duplicate event times: {}", dups.join(", "))));
    }
    Ok(rows.into_iter().map(|(t, _)| t).collect())
}

pub fn ingest_events(path: &Path, policy: &WindowPolicy) -> Result<Ingested> {
    apply_policy(read_event_times(path)?, policy)
}

/// Applies exclusion and rescaling to sorted, distinct times.
pub fn apply_policy(times: Vec<f64>, policy: &WindowPolicy) -> Result<Ingested> {
    let n_rows = times.len();
    let start = policy.start.unwrap_or(0.0);
    let start = policy.exclude_before.map_or(start, |cut| cut.max(start));
    let kept: Vec<f64> = times.into_iter().filter(|&t| t > start).collect();
    let n_excluded = n_rows - kept.len();
    if kept.is_empty() {
        return Err(Error::InsufficientEvents(format!(
            "no events after {start} ({n_rows} rows read)"
        )));
    }
    if policy.exclude_before.is_none() && n_excluded > 0 {
        return Err(Error::InvalidEvents(format!(
            "{n_excluded} events at or before the window start {start}"
        )));
    }
    let end = policy.end.unwrap_or(kept[kept.len() - 1]);
    let window = ObservationWindow::new(start, end)?;
    if let Some(&t) = kept.iter().find(|&&t| t > end) {
        return Err(Error::InvalidEvents(format!(
            "event at {t} lies after the window end {end}"
        )));
    }
    let (map, window) = if policy.rescale {
        (
            AffineMap {
                offset: start,
                scale: window.length(),
            },
            ObservationWindow::unit(),
        )
    } else {
        (AffineMap::identity(), window)
    };
    let unit: Vec<f64> = kept.iter().map(|&t| map.forward(t)).collect();
    Ok(Ingested {
        events: EventSequence::new(unit, window)?,
        map,
        n_rows,
        n_excluded,
    })
}

pub fn events_to_csv(times: &[f64]) -> String {
    let mut out = String::from("time\n");
    for &t in times {
        out.push_str(&fmt_f64(t));
        out.push('\n');
    }
    out
}

/// Gaussian-kernel occurrence rate on `grid` evenly spaced points of the window.
pub fn smooth_rate(events: &EventSequence, sigma: f64, grid: usize) -> Result<Vec<(f64, f64)>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("bandwidth must be positive, got {sigma}")));
    }
    if grid < 2 {
        return Err(Error::Config("rate grid needs at least two points".into()));
    }
    let w = events.window();
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let step = w.length() / (grid - 1) as f64;
    Ok((0..grid)
        .map(|k| {
            let t = if k == grid - 1 { w.t_end } else { w.t_start + k as f64 * step };
            let rate = events
                .times()
                .iter()
                .map(|&ti| {
                    let z = (t - ti) / sigma;
                    norm * (-0.5 * z * z).exp()
                })
                .sum();
            (t, rate)
        })
        .collect())
}

pub fn curve_to_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("t,rate\n");
    for &(t, r) in curve {
        out.push_str(&format!("{},{}\n", fmt_f64(t), fmt_f64(r)));
    }
    out
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Output document of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOutput {
    pub model_kind: ModelKind,
    pub n_events: usize,
    pub window: ObservationWindow,
    pub affine_map: AffineMap,
    pub fit: FitResult,
}

/// Output document of `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestOutput {
    pub null_model: ModelKind,
    pub seed: u64,
    pub affine_map: AffineMap,
    pub result: GofTestResult,
    pub reference: Option<KsResult>,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(format!("JSON encoding: {e}")))
}

pub fn replicates_to_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let err = |e: csv::Error| Error::Parse(format!("CSV encoding: {e}"));
    w.write_record([
        "replicate",
        "seed",
        "stream_id",
        "n_events",
        "statistic",
        "p_boot",
        "reject_boot",
        "p_ref",
        "reject_ref",
        "fit_converged",
        "bootstrap_used",
        "bootstrap_nonconverged",
        "error",
    ])
    .map_err(err)?;
    for r in &report.per_replicate {
        w.write_record([
            r.replicate.to_string(),
            r.seed.to_string(),
            r.stream_id.to_string(),
            r.n_events.to_string(),
            opt(r.statistic),
            opt(r.p_boot),
            r.reject_boot.to_string(),
            opt(r.p_ref),
            r.reject_ref.map(|b| b.to_string()).unwrap_or_default(),
            r.fit_converged.to_string(),
            r.bootstrap_used.to_string(),
            r.bootstrap_nonconverged.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("CSV encoding: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn grid_to_csv(rows: &[GridRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(format!("CSV encoding: {e}"));
    w.write_record([
        "label",
        "generator",
        "null_model",
        "M",
        "B",
        "rejection_rate_bootstrap",
        "rejection_rate_reference",
        "binomial_se",
    ])
    .map_err(err)?;
    for r in rows {
        let generator = serde_json::to_string(&r.generator).map_err(|e| Error::Parse(e.to_string()))?;
        w.write_record([
            r.label.clone(),
            generator,
            r.null_model.to_string(),
            r.replications.to_string(),
            r.bootstrap.to_string(),
            r.rejection_rate_bootstrap.to_string(),
            r.rejection_rate_reference.map(|v| v.to_string()).unwrap_or_default(),
            r.binomial_se.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("CSV encoding: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    kind: String,
    mu: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    theta0: Option<f64>,
    theta1: Option<f64>,
    a_n: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    generator: GeneratorSection,
    null_model: String,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "B")]
    b: usize,
    level: f64,
    seed: u64,
    weight_scale: Option<f64>,
    quad_order: Option<usize>,
    quad_rule: Option<String>,
    workers: Option<usize>,
    out_dir: Option<PathBuf>,
    reference: Option<bool>,
    null_a_n: Option<f64>,
}

/// Parsed experiment configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    parse_run_config(&fs::read_to_string(path)?)
}

/// Parses the TOML run configuration. Unknown keys are rejected.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let raw: RunConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
    let generator = generator_from(&raw.generator)?;
    let null_model: ModelKind = raw
        .null_model
        .parse()
        .map_err(|e: Error| Error::Config(e.to_string()))?;
    let mut experiment = ExperimentConfig::new(generator, null_model);
    experiment.replications = raw.m;
    experiment.bootstrap = raw.b;
    experiment.level = raw.level;
    experiment.seed = raw.seed;
    if let Some(c) = raw.weight_scale {
        experiment.weight_scale = c;
    }
    if let Some(q) = raw.quad_order {
        experiment.quad_order = q;
    }
    if let Some(rule) = raw.quad_rule {
        experiment.quad_rule = rule.parse()?;
    }
    if let Some(r) = raw.reference {
        experiment.run_reference_test = r;
    }
    if let Some(a) = raw.null_a_n {
        experiment.null_a_n = a;
    }
    experiment.check().map_err(|e| Error::Config(e.to_string()))?;
    Ok(RunConfig {
        experiment,
        workers: raw.workers,
        out_dir: raw.out_dir,
    })
}

/// Optional named parameters, as given on the command line or in a config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelParams {
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta0: Option<f64>,
    pub theta1: Option<f64>,
    pub a_n: Option<f64>,
}

/// Builds a model of `kind`; parameters that do not belong to it are an error.
pub fn model_from_params(kind: ModelKind, p: &ModelParams) -> Result<ModelSpec> {
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| Error::Config(format!("{name} is required for {kind}")))
    };
    let forbid = |name: &str, v: Option<f64>| match v {
        Some(_) => Err(Error::Config(format!("{name} does not apply to {kind}"))),
        None => Ok(()),
    };
    let spec = match kind {
        ModelKind::ConstantPoisson => {
            forbid("alpha", p.alpha)?;
            forbid("beta", p.beta)?;
            forbid("theta0", p.theta0)?;
            forbid("theta1", p.theta1)?;
            ModelSpec::ConstantPoisson {
                mu: need("mu", p.mu)?,
                a_n: p.a_n.unwrap_or(1.0),
            }
        }
        ModelKind::ExpAffinePoisson => {
            forbid("mu", p.mu)?;
            forbid("alpha", p.alpha)?;
            forbid("beta", p.beta)?;
            ModelSpec::ExpAffinePoisson {
                theta0: need("theta0", p.theta0)?,
                theta1: need("theta1", p.theta1)?,
                a_n: p.a_n.unwrap_or(1.0),
            }
        }
        ModelKind::HawkesExp => {
            forbid("theta0", p.theta0)?;
            forbid("theta1", p.theta1)?;
            forbid("a_n", p.a_n)?;
            ModelSpec::HawkesExp {
                mu: need("mu", p.mu)?,
                alpha: need("alpha", p.alpha)?,
                beta: need("beta", p.beta)?,
            }
        }
    };
    spec.check()?;
    Ok(spec)
}

fn generator_from(g: &GeneratorSection) -> Result<ModelSpec> {
    let kind: ModelKind = g.kind.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let params = ModelParams {
        mu: g.mu,
        alpha: g.alpha,
        beta: g.beta,
        theta0: g.theta0,
        theta1: g.theta1,
        a_n: g.a_n,
    };
    model_from_params(kind, &params).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("generator.{m}")),
        other => Error::Config(other.to_string()),
    })
}
