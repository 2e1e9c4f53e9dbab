//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 bad input data,
//! 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimate::fit_mle;
use crate::experiments::{default_grid, run_experiment, run_grid};
use crate::gof::quadrature::{QuadratureRule, RuleFamily, WeightFunction};
use crate::gof::{bootstrap_test, plugin_ks_test, BootstrapConfig};
use crate::io::{
    self, curve_to_csv, events_to_csv, ingest_events, load_run_config, model_from_params,
    smooth_rate, write_atomic, FitOutput, ModelParams, TestOutput, WindowPolicy,
};
use crate::models::{ModelKind, ModelSpec, ObservationWindow, ThetaDomain};
use crate::simulate::{sample, RngStream};

/// Environment variable that sets the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "PPGOF_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "ppgof", version, about = "Goodness-of-fit tests for Poisson and Hawkes processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one event sequence and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model by maximum likelihood.
    Fit(FitArgs),
    /// Run the bootstrap goodness-of-fit test on an event file.
    Test(TestArgs),
    /// Run a Monte Carlo experiment from a TOML config.
    Experiment(ExperimentArgs),
    /// Kernel-smoothed occurrence rate of an event file.
    Smooth(SmoothArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta1: Option<f64>,
    /// Baseline scale of the Poisson families.
    #[arg(long = "a-n")]
    a_n: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_kind)]
    model: ModelKind,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Window start in file units (default 0).
    #[arg(long, allow_negative_numbers = true)]
    t_start: Option<f64>,
    /// Window end in file units (default: last event).
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Drop events at or before this time.
    #[arg(long, allow_negative_numbers = true)]
    exclude_before: Option<f64>,
    /// Keep file units instead of mapping the window onto [0, 1].
    #[arg(long)]
    no_rescale: bool,
}

impl WindowArgs {
    fn policy(&self) -> WindowPolicy {
        WindowPolicy {
            start: self.t_start,
            end: self.t_end,
            exclude_before: self.exclude_before,
            rescale: !self.no_rescale,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    model: ModelKind,
    #[arg(long = "a-n", default_value_t = 1.0)]
    a_n: f64,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    events: PathBuf,
    /// Null model family.
    #[arg(long, value_parser = parse_kind)]
    null: ModelKind,
    /// Bootstrap replicates.
    #[arg(long, short = 'B', default_value_t = 199)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Also run the plug-in Kolmogorov-Smirnov test.
    #[arg(long)]
    reference: bool,
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    #[arg(long, default_value_t = 64)]
    quad_order: usize,
    /// double_exponential or gauss_laguerre.
    #[arg(long, default_value = "double_exponential", value_parser = parse_rule)]
    quad_rule: RuleFamily,
    #[arg(long = "a-n", default_value_t = 1.0)]
    a_n: f64,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Run a named grid (type1-poisson, type1-hawkes, power) around the config.
    #[arg(long)]
    grid: Option<String>,
    /// No progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SmoothArgs {
    #[arg(long)]
    events: PathBuf,
    /// Kernel bandwidth in the units of the ingested window.
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rule(s: &str) -> std::result::Result<RuleFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidModel(_) | Error::WrongKind(_) => 1,
        Error::OutsideWindow { .. }
        | Error::InvalidEvents(_)
        | Error::InsufficientEvents(_)
        | Error::Parse(_)
        | Error::Io(_) => 2,
        Error::BootstrapDegenerate { .. } | Error::Numerical(_) | Error::Invariant(_) => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Test(a) => test(a, out),
        Command::Experiment(a) => experiment(a, out, err),
        Command::Smooth(a) => smooth(a, out),
    }
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let p = &a.params;
    let params = ModelParams {
        mu: p.mu,
        alpha: p.alpha,
        beta: p.beta,
        theta0: p.theta0,
        theta1: p.theta1,
        a_n: p.a_n,
    };
    let model = model_from_params(a.model, &params)?;
    let window = ObservationWindow::new(0.0, a.t_end).map_err(|e| Error::Config(e.to_string()))?;
    let events = sample(&model, window, &RngStream::new(a.seed, 0))?;
    emit(a.out.as_deref(), &events_to_csv(events.times()), out)
}

fn fit(a: FitArgs, out: &mut dyn Write) -> Result<()> {
    let ing = ingest_events(&a.events, &a.window.policy())?;
    let domain = ThetaDomain::default_for(a.model);
    let fit = fit_mle(a.model, a.a_n, &ing.events, &domain, &RngStream::new(a.seed, 0))?;
    let doc = FitOutput {
        model_kind: a.model,
        n_events: ing.events.len(),
        window: ing.events.window(),
        affine_map: ing.map,
        fit,
    };
    emit(a.out.as_deref(), &(io::to_json(&doc)? + "\n"), out)
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// `--workers`, then the environment variable, then the config file.
fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n = v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a count")))?;
        return Ok(Some(n));
    }
    Ok(config)
}

fn test(a: TestArgs, out: &mut dyn Write) -> Result<()> {
    let ing = ingest_events(&a.events, &a.window.policy())?;
    let mut cfg = BootstrapConfig::new(a.null, a.bootstrap, a.level)?;
    cfg.quad = QuadratureRule::for_family(
        a.quad_rule,
        a.quad_order,
        WeightFunction::exponential(a.weight_scale)?,
    )?;
    cfg.a_n = a.a_n;
    let rng = RngStream::new(a.seed, 0);
    let result = pool(resolve_workers(a.workers, None)?)?
        .install(|| bootstrap_test(a.null, &ing.events, &cfg, &rng))?;
    let reference = if a.reference {
        let fitted = ModelSpec::from_theta(a.null, &result.theta_hat, cfg.a_n)?;
        Some(plugin_ks_test(&fitted, &ing.events)?)
    } else {
        None
    };
    let doc = TestOutput {
        null_model: a.null,
        seed: a.seed,
        affine_map: ing.map,
        result,
        reference,
    };
    emit(a.out.as_deref(), &(io::to_json(&doc)? + "\n"), out)
}

fn experiment(a: ExperimentArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let run = load_run_config(&a.config)?;
    let workers = resolve_workers(a.workers, run.workers)?;
    let dir = a.out_dir.or(run.out_dir).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;

    if let Some(name) = a.grid {
        let configs = default_grid(&name, &run.experiment)?;
        let rows = run_grid(&configs, workers)?;
        write_atomic(&dir.join("grid.csv"), io::grid_to_csv(&rows)?.as_bytes())?;
        write_atomic(&dir.join("grid.json"), (io::to_json(&rows)? + "\n").as_bytes())?;
        writeln!(out, "{} grid points written to {}", rows.len(), dir.display())?;
        return Ok(());
    }

    let quiet = a.quiet;
    let progress = |done: usize, total: usize| {
        if !quiet && (done == total || done.is_multiple_of(10)) {
            eprint!("\r{done}/{total} replicates");
            if done == total {
                eprintln!();
            }
        }
    };
    let report = run_experiment(&run.experiment, workers, Some(&progress))?;
    write_atomic(&dir.join("replicates.csv"), io::replicates_to_csv(&report)?.as_bytes())?;
    write_atomic(&dir.join("report.json"), (io::to_json(&report)? + "\n").as_bytes())?;
    if report.n_failed > 0 {
        writeln!(err, "warning: {} replicates failed", report.n_failed)?;
    }
    let reference = report
        .rejection_rate_reference
        .map_or(String::new(), |r| format!(", reference {r:.4}"));
    writeln!(
        out,
        "rejection rate {:.4} (se {:.4}){reference}, {} replicates in {:.1}s",
        report.rejection_rate_bootstrap,
        report.binomial_se,
        report.per_replicate.len(),
        report.wall_time_secs
    )?;
    Ok(())
}

fn smooth(a: SmoothArgs, out: &mut dyn Write) -> Result<()> {
    let ing = ingest_events(&a.events, &a.window.policy())?;
    let curve = smooth_rate(&ing.events, a.sigma, a.grid)?;
    emit(a.out.as_deref(), &curve_to_csv(&curve), out)
}
