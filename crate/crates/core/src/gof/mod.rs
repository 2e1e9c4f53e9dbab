//! Goodness-of-fit testing through the time-rescaled increments.
//!
//! Under the fitted model the increments `Λ(t_i) − Λ(t_{i−1})` should look like
//! unit exponentials. Their empirical Laplace transform `L_n(u)` is compared with
//! `L(u) = 1/(1+u)` in the weighted norm `‖h‖² = ∫ h(u)² e^{−cu} du`, and the
//! null distribution of `‖L_n − L‖` is calibrated with a parametric bootstrap
//! that re-simulates from the fitted model and refits each replicate.
//!
//! The realized statistic omits the common `√a_n` factor, which does not change
//! the comparison with the bootstrap replicates.

pub mod ks;
pub mod quadrature;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, FitResult};
use crate::models::{EventSequence, ModelKind, ModelSpec, ThetaDomain};
use crate::simulate::{sample, RngStream};

pub use ks::{ks_exponential_test, kolmogorov_sf, KsResult};
pub use quadrature::{QuadratureRule, RuleFamily, WeightFunction};

/// Attempts per bootstrap replicate before it is skipped.
pub const MAX_BOOTSTRAP_ATTEMPTS: u32 = 3;

/// Rescaled increments `Λ(t_i) − Λ(t_{i−1})` under `model`.
pub fn rescale(model: &ModelSpec, events: &EventSequence) -> Result<Vec<f64>> {
    model.check()?;
    Ok(model.compensator_increments(events))
}

/// `(1/N) Σ exp(−u · x_i)`.
pub fn empirical_laplace(increments: &[f64], u: f64) -> Result<f64> {
    if increments.is_empty() {
        return Err(Error::InsufficientEvents(
            "empirical Laplace transform needs at least one increment".into(),
        ));
    }
    Ok(laplace_mean(increments, u))
}

fn laplace_mean(increments: &[f64], u: f64) -> f64 {
    increments.iter().map(|&x| (-u * x).exp()).sum::<f64>() / increments.len() as f64
}

/// Laplace transform of the unit exponential law.
pub fn reference_laplace(u: f64) -> f64 {
    1.0 / (1.0 + u)
}

/// `‖L_n − L‖` evaluated with `quad`.
pub fn gof_statistic(increments: &[f64], quad: &QuadratureRule) -> Result<f64> {
    if increments.is_empty() {
        return Err(Error::InsufficientEvents(
            "statistic needs at least one increment".into(),
        ));
    }
    let sq = quad.integrate(|u| {
        let d = laplace_mean(increments, u) - reference_laplace(u);
        d * d
    });
    Ok(sq.max(0.0).sqrt())
}

/// Add-one Monte Carlo p-value `(1 + #{S*_b ≥ S}) / (B + 1)`.
pub fn bootstrap_p_value(statistic: f64, bootstrap: &[f64]) -> f64 {
    (1 + count_at_least(statistic, bootstrap)) as f64 / (bootstrap.len() + 1) as f64
}

fn count_at_least(statistic: f64, bootstrap: &[f64]) -> usize {
    bootstrap.iter().filter(|&&s| s >= statistic).count()
}

/// Largest number of exceedances `#{S*_b ≥ S}` compatible with rejection at `level`:
/// `floor(level · (B+1)) − 1`, or `None` when no rejection is possible.
fn max_exceedances(level: f64, b: usize) -> Option<usize> {
    let k = (level * (b + 1) as f64 + 1e-9).floor() as usize;
    k.checked_sub(1)
}

/// `p ≤ level`, evaluated on integer counts.
pub fn bootstrap_rejects(statistic: f64, bootstrap: &[f64], level: f64) -> bool {
    max_exceedances(level, bootstrap.len())
        .is_some_and(|m| count_at_least(statistic, bootstrap) <= m)
}

/// Critical value of the add-one rule: the `k`-th largest bootstrap statistic,
/// `k = floor(level · (B+1))`. The test rejects exactly when the statistic is
/// strictly above it; `+∞` when `k = 0`.
pub fn critical_value(bootstrap: &[f64], level: f64) -> f64 {
    match max_exceedances(level, bootstrap.len()) {
        None => f64::INFINITY,
        Some(m) => {
            let mut sorted = bootstrap.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted[m]
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    /// Requested number of bootstrap replicates `B`.
    pub replicates: usize,
    pub level: f64,
    pub quad: QuadratureRule,
    pub domain: ThetaDomain,
    /// Intensity scale for Poisson families; ignored for Hawkes.
    pub a_n: f64,
}

impl BootstrapConfig {
    pub fn new(kind: ModelKind, replicates: usize, level: f64) -> Result<Self> {
        Ok(Self {
            replicates,
            level,
            quad: QuadratureRule::double_exponential(quadrature::DEFAULT_ORDER)?,
            domain: ThetaDomain::default_for(kind),
            a_n: 1.0,
        })
    }

    fn check(&self, kind: ModelKind) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("bootstrap needs B >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0,1), got {}", self.level)));
        }
        if !(self.a_n >= 1.0 && self.a_n.is_finite()) {
            return Err(Error::Config(format!("a_n must be >= 1, got {}", self.a_n)));
        }
        self.domain.check(kind)
    }

    /// Usable replicates required after skips: `max(20, ⌈B/2⌉)`, capped at `B`.
    pub fn min_usable(&self) -> usize {
        20usize.max(self.replicates.div_ceil(2)).min(self.replicates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofTestResult {
    pub null_model: ModelKind,
    pub statistic: f64,
    pub bootstrap_stats: Vec<f64>,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub n_events: usize,
    pub theta_hat: Vec<f64>,
    pub fit_converged: bool,
    /// Bootstrap fits that failed or did not converge.
    pub bootstrap_nonconverged: usize,
}

/// Statistic of `events` under the fitted `model`.
pub fn statistic_under(model: &ModelSpec, events: &EventSequence, quad: &QuadratureRule) -> Result<f64> {
    gof_statistic(&rescale(model, events)?, quad)
}

/// Stream for the observed-data fit of the replicate owning `rng`.
pub fn observed_fit_stream(rng: &RngStream) -> RngStream {
    rng.bootstrap(0).substream(1)
}

/// Parametric bootstrap test of `H0: events follow the `kind` family`.
pub fn bootstrap_test(
    kind: ModelKind,
    events: &EventSequence,
    cfg: &BootstrapConfig,
    rng: &RngStream,
) -> Result<GofTestResult> {
    cfg.check(kind)?;
    let fit = fit_mle(kind, cfg.a_n, events, &cfg.domain, &observed_fit_stream(rng))?;
    bootstrap_from_fit(kind, events, &fit, cfg, rng)
}

/// Bootstrap given an already computed fit of the observed data.
pub fn bootstrap_from_fit(
    kind: ModelKind,
    events: &EventSequence,
    fit: &FitResult,
    cfg: &BootstrapConfig,
    rng: &RngStream,
) -> Result<GofTestResult> {
    cfg.check(kind)?;
    let statistic = statistic_under(&fit.model, events, &cfg.quad)?;
    let window = events.window();

    let outcomes: Vec<Result<(Option<f64>, usize)>> = (1..=cfg.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let stream = rng.bootstrap(b);
            let mut failures = 0;
            for attempt in 0..MAX_BOOTSTRAP_ATTEMPTS {
                let sim = sample(&fit.model, window, &stream.substream(2 * attempt))?;
                match fit_mle(kind, cfg.a_n, &sim, &cfg.domain, &stream.substream(2 * attempt + 1)) {
                    Ok(refit) => {
                        if !refit.converged {
                            failures += 1;
                        }
                        let s = statistic_under(&refit.model, &sim, &cfg.quad)?;
                        return Ok((Some(s), failures));
                    }
                    Err(Error::InsufficientEvents(_) | Error::Numerical(_)) => failures += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((None, failures))
        })
        .collect();

    let mut bootstrap_stats = Vec::with_capacity(cfg.replicates);
    let mut bootstrap_nonconverged = 0;
    for o in outcomes {
        let (stat, failures) = o?;
        bootstrap_nonconverged += failures;
        bootstrap_stats.extend(stat);
    }
    if bootstrap_stats.len() < cfg.min_usable() {
        return Err(Error::BootstrapDegenerate {
            used: bootstrap_stats.len(),
            requested: cfg.replicates,
        });
    }
    Ok(GofTestResult {
        null_model: kind,
        statistic,
        p_value: bootstrap_p_value(statistic, &bootstrap_stats),
        reject: bootstrap_rejects(statistic, &bootstrap_stats, cfg.level),
        bootstrap_stats,
        level: cfg.level,
        n_events: events.len(),
        theta_hat: fit.theta_hat.clone(),
        fit_converged: fit.converged,
        bootstrap_nonconverged,
    })
}

/// Plug-in reference test: KS of the increments rescaled with the fitted model.
pub fn plugin_ks_test(fitted: &ModelSpec, events: &EventSequence) -> Result<KsResult> {
    ks_exponential_test(&rescale(fitted, events)?)
}
