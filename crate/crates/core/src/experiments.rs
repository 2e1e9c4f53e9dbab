//! Monte Carlo estimation of type I error and power.
//!
//! Each replicate `r` simulates a data set from the generator on stream
//! `(r << 20) | 0`, runs the bootstrap test against the null family (bootstrap
//! replicate `b` on stream `(r << 20) | b`) and optionally the plug-in KS test.
//! Replicates run on a bounded rayon pool and are collected by index, so the
//! per-replicate records do not depend on the number of workers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::fit_mle;
use crate::gof::{
    bootstrap_from_fit, observed_fit_stream, plugin_ks_test, BootstrapConfig, QuadratureRule,
    RuleFamily, WeightFunction,
};
use crate::models::{ModelKind, ModelSpec, ObservationWindow, ThetaDomain};
use crate::simulate::{sample, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: ModelSpec,
    pub null_model: ModelKind,
    /// Number of simulated data sets `M`.
    pub replications: usize,
    /// Bootstrap replicates per test `B`.
    pub bootstrap: usize,
    pub level: f64,
    pub seed: u64,
    pub weight_scale: f64,
    pub quad_order: usize,
    #[serde(default)]
    pub quad_rule: RuleFamily,
    pub run_reference_test: bool,
    pub window: ObservationWindow,
    /// Intensity scale used when fitting a Poisson null.
    pub null_a_n: f64,
}

impl ExperimentConfig {
    pub fn new(generator: ModelSpec, null_model: ModelKind) -> Self {
        Self {
            generator,
            null_model,
            replications: 200,
            bootstrap: 199,
            level: 0.05,
            seed: 0,
            weight_scale: 1.0,
            quad_order: crate::gof::quadrature::DEFAULT_ORDER,
            quad_rule: RuleFamily::default(),
            run_reference_test: true,
            window: ObservationWindow::unit(),
            null_a_n: 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if self.bootstrap == 0 {
            return Err(Error::Config("B must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0,1), got {}", self.level)));
        }
        if self.replications as u64 >= 1 << 40 {
            return Err(Error::Config("M too large for the stream-id layout".into()));
        }
        self.generator.check()?;
        Ok(())
    }

    fn bootstrap_config(&self) -> Result<BootstrapConfig> {
        Ok(BootstrapConfig {
            replicates: self.bootstrap,
            level: self.level,
            quad: QuadratureRule::for_family(
                self.quad_rule,
                self.quad_order,
                WeightFunction::exponential(self.weight_scale)?,
            )?,
            domain: ThetaDomain::default_for(self.null_model),
            a_n: self.null_a_n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TypeOne,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub n_events: usize,
    pub statistic: Option<f64>,
    pub p_boot: Option<f64>,
    pub reject_boot: bool,
    pub p_ref: Option<f64>,
    pub reject_ref: Option<bool>,
    pub fit_converged: bool,
    pub bootstrap_used: usize,
    pub bootstrap_nonconverged: usize,
    /// Set when the observed-data fit or the bootstrap failed; such replicates
    /// count as non-rejections.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub rejection_rate_bootstrap: f64,
    pub rejection_rate_reference: Option<f64>,
    pub binomial_se: f64,
    pub n_failed: usize,
    pub n_nonconverged_fits: usize,
    pub per_replicate: Vec<ReplicateRecord>,
    pub wall_time_secs: f64,
}

/// Algorithm 1: data from the null family itself.
pub fn run_type1(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    if !cfg.generator.reduces_to(cfg.null_model) {
        return Err(Error::Config(format!(
            "type I experiment needs a generator inside the {} family, got {}",
            cfg.null_model,
            cfg.generator.kind()
        )));
    }
    run(cfg, ExperimentKind::TypeOne, workers, None)
}

/// Algorithm 2: data from a generator outside the null family.
pub fn run_power(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    if cfg.generator.reduces_to(cfg.null_model) {
        return Err(Error::Config(format!(
            "power experiment needs a generator outside the {} family; {:?} belongs to it",
            cfg.null_model, cfg.generator
        )));
    }
    run(cfg, ExperimentKind::Power, workers, None)
}

/// Runs either experiment, choosing the kind from the generator/null relation.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<ExperimentReport> {
    let kind = if cfg.generator.reduces_to(cfg.null_model) {
        ExperimentKind::TypeOne
    } else {
        ExperimentKind::Power
    };
    run(cfg, kind, workers, progress)
}

fn run(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    workers: Option<usize>,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let boot = cfg.bootstrap_config()?;
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    let records: Vec<ReplicateRecord> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let rec = run_replicate(cfg, &boot, r);
                if let Some(cb) = progress {
                    cb(done.fetch_add(1, Ordering::Relaxed) + 1, cfg.replications);
                }
                rec
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(summarize(cfg, kind, records, started.elapsed().as_secs_f64()))
}

fn summarize(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    per_replicate: Vec<ReplicateRecord>,
    wall_time_secs: f64,
) -> ExperimentReport {
    let m = per_replicate.len() as f64;
    let rate = per_replicate.iter().filter(|r| r.reject_boot).count() as f64 / m;
    let rejection_rate_reference = cfg.run_reference_test.then(|| {
        per_replicate
            .iter()
            .filter(|r| r.reject_ref == Some(true))
            .count() as f64
            / m
    });
    ExperimentReport {
        kind,
        config: cfg.clone(),
        rejection_rate_bootstrap: rate,
        rejection_rate_reference,
        binomial_se: (rate * (1.0 - rate) / m).sqrt(),
        n_failed: per_replicate.iter().filter(|r| r.error.is_some()).count(),
        n_nonconverged_fits: per_replicate.iter().filter(|r| !r.fit_converged).count(),
        per_replicate,
        wall_time_secs,
    }
}

/// Stream that generates the observed data of replicate `r`.
pub fn data_stream(seed: u64, r: usize) -> RngStream {
    RngStream::new(seed, r as u64).bootstrap(0)
}

fn run_replicate(cfg: &ExperimentConfig, boot: &BootstrapConfig, r: usize) -> Result<ReplicateRecord> {
    let base = RngStream::new(cfg.seed, r as u64);
    let data_rng = data_stream(cfg.seed, r);
    let data = sample(&cfg.generator, cfg.window, &data_rng)?;
    let mut rec = ReplicateRecord {
        replicate: r,
        seed: cfg.seed,
        stream_id: data_rng.stream_id,
        n_events: data.len(),
        statistic: None,
        p_boot: None,
        reject_boot: false,
        p_ref: None,
        reject_ref: None,
        fit_converged: false,
        bootstrap_used: 0,
        bootstrap_nonconverged: 0,
        error: None,
    };
    let fit = match fit_mle(cfg.null_model, boot.a_n, &data, &boot.domain, &observed_fit_stream(&base)) {
        Ok(f) => f,
        Err(e @ (Error::InsufficientEvents(_) | Error::Numerical(_))) => {
            rec.error = Some(e.to_string());
            if cfg.run_reference_test {
                rec.reject_ref = Some(false);
            }
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    rec.fit_converged = fit.converged;
    if cfg.run_reference_test {
        let ks = plugin_ks_test(&fit.model, &data)?;
        rec.p_ref = Some(ks.p_value);
        rec.reject_ref = Some(ks.p_value <= cfg.level);
    }
    match bootstrap_from_fit(cfg.null_model, &data, &fit, boot, &base) {
        Ok(res) => {
            rec.statistic = Some(res.statistic);
            rec.p_boot = Some(res.p_value);
            rec.reject_boot = res.reject;
            rec.bootstrap_used = res.bootstrap_stats.len();
            rec.bootstrap_nonconverged = res.bootstrap_nonconverged;
        }
        Err(e @ (Error::BootstrapDegenerate { .. } | Error::Numerical(_))) => {
            rec.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(rec)
}

/// One row of a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub label: String,
    pub generator: ModelSpec,
    pub null_model: ModelKind,
    pub replications: usize,
    pub bootstrap: usize,
    pub rejection_rate_bootstrap: f64,
    pub rejection_rate_reference: Option<f64>,
    pub binomial_se: f64,
}

/// Runs every configuration and returns one row per grid point.
pub fn run_grid(
    configs: &[(String, ExperimentConfig)],
    workers: Option<usize>,
) -> Result<Vec<GridRow>> {
    configs
        .iter()
        .map(|(label, cfg)| {
            let rep = run_experiment(cfg, workers, None)?;
            Ok(GridRow {
                label: label.clone(),
                generator: cfg.generator,
                null_model: cfg.null_model,
                replications: cfg.replications,
                bootstrap: cfg.bootstrap,
                rejection_rate_bootstrap: rep.rejection_rate_bootstrap,
                rejection_rate_reference: rep.rejection_rate_reference,
                binomial_se: rep.binomial_se,
            })
        })
        .collect()
}

/// Representative parameter grids: six Poisson rates (`type1-poisson`); Hawkes
/// with `μ = 50`, two values of `α/β` and increasing `α` (`type1-hawkes`);
/// Hawkes data with about 100 expected events against a Poisson null (`power`).
pub fn default_grid(name: &str, base: &ExperimentConfig) -> Result<Vec<(String, ExperimentConfig)>> {
    let with = |generator: ModelSpec, null_model: ModelKind| ExperimentConfig {
        generator,
        null_model,
        ..base.clone()
    };
    let grid = match name {
        "type1-poisson" => [30.0, 50.0, 100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&mu| {
                (
                    format!("poisson mu={mu}"),
                    with(ModelSpec::constant_poisson(mu), ModelKind::ConstantPoisson),
                )
            })
            .collect(),
        "type1-hawkes" => [0.3, 0.5]
            .iter()
            .flat_map(|&ratio| {
                [10.0, 20.0, 40.0, 80.0].into_iter().map(move |alpha| (ratio, alpha))
            })
            .map(|(ratio, alpha)| {
                let beta = alpha / ratio;
                (
                    format!("hawkes mu=50 ratio={ratio} alpha={alpha}"),
                    with(ModelSpec::hawkes(50.0, alpha, beta), ModelKind::HawkesExp),
                )
            })
            .collect(),
        "power" => [0.5, 0.9]
            .iter()
            .flat_map(|&ratio| [5.0, 20.0, 50.0, 90.0].into_iter().map(move |alpha| (ratio, alpha)))
            .map(|(ratio, alpha)| {
                let mu = 100.0 * (1.0 - ratio);
                let beta = alpha / ratio;
                (
                    format!("hawkes mu={mu} ratio={ratio} alpha={alpha} vs poisson"),
                    with(ModelSpec::hawkes(mu, alpha, beta), ModelKind::ConstantPoisson),
                )
            })
            .collect(),
        other => {
            return Err(Error::Config(format!(
                "unknown grid {other:?} (expected type1-poisson, type1-hawkes or power)"
            )))
        }
    };
    Ok(grid)
}
