//! Log-likelihood, analytic score and maximum-likelihood fitting.
//!
//! The point-process log-likelihood over the window `[t_start, t_end]` is
//!
//! ```text
//! ℓ(θ) = Σ_i log λ(t_i, θ) − Λ(t_end, θ)
//! ```
//!
//! Hawkes terms use the O(n) recursions
//!
//! ```text
//! A_i = e^{−β Δ_i} (1 + A_{i−1})                 Σ_{j<i} e^{−β(t_i − t_j)}
//! B_i = e^{−β Δ_i} (B_{i−1} + Δ_i (1 + A_{i−1}))  Σ_{j<i} (t_i − t_j) e^{−β(t_i − t_j)}
//! ```
//!
//! so `λ(t_i) = μ + α A_i` and `∂λ(t_i)/∂β = −α B_i`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EventSequence, ModelKind, ModelSpec, ThetaDomain};
use crate::optimize::{minimize_box, OptimOptions};
use crate::simulate::RngStream;

/// Number of optimizer starts for iterative fits.
pub const N_STARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub theta_hat: Vec<f64>,
    pub log_lik: f64,
    pub converged: bool,
    pub n_restarts_used: usize,
    pub gradient_norm_at_opt: f64,
}

pub fn log_likelihood(model: &ModelSpec, events: &EventSequence) -> Result<f64> {
    model.check()?;
    let window = events.window();
    let len = window.length();
    let n = events.len() as f64;
    match *model {
        ModelSpec::ConstantPoisson { mu, a_n } => {
            let rate = a_n * mu;
            Ok(if n > 0.0 { n * rate.ln() } else { 0.0 } - rate * len)
        }
        ModelSpec::ExpAffinePoisson {
            theta0,
            theta1,
            a_n,
        } => {
            let sum_log: f64 = events
                .times()
                .iter()
                .map(|&t| a_n.ln() + theta0 + theta1 * t)
                .sum();
            Ok(sum_log - model.baseline_integral(window.t_start, window.t_end))
        }
        ModelSpec::HawkesExp { mu, alpha, beta } => {
            let mut sum_log = 0.0;
            for_each_hawkes_state(events, beta, |a, _| {
                let lam = mu + alpha * a;
                if !(lam > 0.0) {
                    return Err(Error::Numerical(format!("non-positive intensity {lam}")));
                }
                sum_log += lam.ln();
                Ok(())
            })?;
            let (tail, _) = hawkes_tail(events, beta);
            Ok(sum_log - mu * len - alpha / beta * tail)
        }
    }
}

/// Gradient of [`log_likelihood`] in the model's natural parameters.
pub fn score(model: &ModelSpec, events: &EventSequence) -> Result<Vec<f64>> {
    model.check()?;
    let window = events.window();
    let len = window.length();
    let n = events.len() as f64;
    match *model {
        ModelSpec::ConstantPoisson { mu, a_n } => Ok(vec![n / mu - a_n * len]),
        ModelSpec::ExpAffinePoisson {
            theta0,
            theta1,
            a_n,
        } => {
            let big_lambda = model.baseline_integral(window.t_start, window.t_end);
            let t0 = window.t_start;
            let first_moment = a_n
                * (theta0 + theta1 * t0).exp()
                * (t0 * len * crate::models::exprel(theta1 * len)
                    + len * len * first_moment_kernel(theta1 * len));
            let sum_t: f64 = events.times().iter().sum();
            Ok(vec![n - big_lambda, sum_t - first_moment])
        }
        ModelSpec::HawkesExp { mu, alpha, beta } => {
            let (mut d_mu, mut d_alpha, mut d_beta) = (0.0, 0.0, 0.0);
            for_each_hawkes_state(events, beta, |a, b| {
                let lam = mu + alpha * a;
                if !(lam > 0.0) {
                    return Err(Error::Numerical(format!("non-positive intensity {lam}")));
                }
                d_mu += 1.0 / lam;
                d_alpha += a / lam;
                d_beta -= alpha * b / lam;
                Ok(())
            })?;
            let (tail, weighted_tail) = hawkes_tail(events, beta);
            d_mu -= len;
            d_alpha -= tail / beta;
            d_beta -= -alpha / (beta * beta) * tail + alpha / beta * weighted_tail;
            Ok(vec![d_mu, d_alpha, d_beta])
        }
    }
}

/// Calls `f(A_i, B_i)` for every event in order.
fn for_each_hawkes_state<F>(events: &EventSequence, beta: f64, mut f: F) -> Result<()>
where
    F: FnMut(f64, f64) -> Result<()>,
{
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let times = events.times();
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let dt = t - times[i - 1];
            let decay = (-beta * dt).exp();
            b = decay * (b + dt * (1.0 + a));
            a = decay * (1.0 + a);
        }
        f(a, b)?;
    }
    Ok(())
}

/// `(Σ_j (1 − e_j), Σ_j (T − t_j) e_j)` with `e_j = e^{−β(T − t_j)}`.
fn hawkes_tail(events: &EventSequence, beta: f64) -> (f64, f64) {
    let end = events.window().t_end;
    events.times().iter().fold((0.0, 0.0), |(s1, s2), &t| {
        let gap = end - t;
        let e = (-beta * gap).exp();
        (s1 - (-beta * gap).exp_m1(), s2 + gap * e)
    })
}

/// `∫_0^1 s e^{x s} ds`.
fn first_moment_kernel(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // Σ_k x^k / (k! (k + 2))
        let mut term = 1.0;
        let mut sum = 0.5;
        for k in 1..30 {
            term *= x / k as f64;
            sum += term / (k as f64 + 2.0);
        }
        sum
    } else {
        (x.exp() * (x - 1.0) + 1.0) / (x * x)
    }
}

#[derive(Debug, Clone, Copy)]
enum Transform {
    Identity,
    Log,
    Logit,
}

impl Transform {
    fn forward(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Log => v.ln(),
            Transform::Logit => (v / (1.0 - v)).ln(),
        }
    }

    fn inverse(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.exp(),
            Transform::Logit => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// d(value)/dx at the given value.
    fn jacobian(self, v: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => v,
            Transform::Logit => v * (1.0 - v),
        }
    }
}

fn transforms(kind: ModelKind) -> &'static [Transform] {
    match kind {
        ModelKind::ConstantPoisson => &[Transform::Log],
        ModelKind::ExpAffinePoisson => &[Transform::Identity, Transform::Identity],
        ModelKind::HawkesExp => &[Transform::Log, Transform::Logit, Transform::Log],
    }
}

fn model_from_coords(kind: ModelKind, c: &[f64], a_n: f64) -> ModelSpec {
    match kind {
        ModelKind::ConstantPoisson => ModelSpec::ConstantPoisson { mu: c[0], a_n },
        ModelKind::ExpAffinePoisson => ModelSpec::ExpAffinePoisson {
            theta0: c[0],
            theta1: c[1],
            a_n,
        },
        ModelKind::HawkesExp => ModelSpec::HawkesExp {
            mu: c[0],
            alpha: c[1] * c[2],
            beta: c[2],
        },
    }
}

/// Chain rule from the natural-parameter score to domain coordinates.
fn coord_gradient(kind: ModelKind, c: &[f64], natural: &[f64]) -> Vec<f64> {
    match kind {
        ModelKind::HawkesExp => {
            let (rho, beta) = (c[1], c[2]);
            vec![natural[0], natural[1] * beta, natural[1] * rho + natural[2]]
        }
        _ => natural.to_vec(),
    }
}

/// Maximum-likelihood fit over `domain`.
///
/// Constant Poisson uses the closed form `rate = n / window length`. The other
/// families run projected BFGS in log/logit coordinates from [`N_STARTS`] starts
/// (one moment-based, the rest drawn from `rng`) and keep the best optimum.
/// Hawkes fits with fewer than three events fall back to the embedded Poisson
/// fit on the `ρ` lower bound and are flagged as not converged.
pub fn fit_mle(
    kind: ModelKind,
    a_n: f64,
    events: &EventSequence,
    domain: &ThetaDomain,
    rng: &RngStream,
) -> Result<FitResult> {
    domain.check(kind)?;
    let n = events.len();
    if n == 0 {
        return Err(Error::InsufficientEvents(
            "maximum likelihood needs at least one event".into(),
        ));
    }
    let len = events.window().length();
    let rate = n as f64 / len;
    let a_n = if kind == ModelKind::HawkesExp { 1.0 } else { a_n };
    match kind {
        ModelKind::ConstantPoisson => {
            let mu = (rate / a_n).clamp(domain.lower[0], domain.upper[0]);
            finish(ModelSpec::ConstantPoisson { mu, a_n }, events, true, 0)
        }
        ModelKind::HawkesExp if n < 3 => {
            let mu = rate.clamp(domain.lower[0], domain.upper[0]);
            let rho = domain.lower[1];
            let beta = 1.0f64.clamp(domain.lower[2], domain.upper[2]);
            finish(ModelSpec::hawkes(mu, rho * beta, beta), events, false, 0)
        }
        _ => fit_iterative(kind, a_n, events, domain, rng),
    }
}

fn finish(model: ModelSpec, events: &EventSequence, converged: bool, starts: usize) -> Result<FitResult> {
    let log_lik = log_likelihood(&model, events)?;
    let gradient_norm_at_opt = score(&model, events)?
        .iter()
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        theta_hat: model.theta(),
        model,
        log_lik,
        converged,
        n_restarts_used: starts,
        gradient_norm_at_opt,
    })
}

fn fit_iterative(
    kind: ModelKind,
    a_n: f64,
    events: &EventSequence,
    domain: &ThetaDomain,
    rng: &RngStream,
) -> Result<FitResult> {
    let tf = transforms(kind);
    let lower: Vec<f64> = tf.iter().zip(&domain.lower).map(|(t, &v)| t.forward(v)).collect();
    let upper: Vec<f64> = tf.iter().zip(&domain.upper).map(|(t, &v)| t.forward(v)).collect();
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let c: Vec<f64> = tf.iter().zip(x).map(|(t, &v)| t.inverse(v)).collect();
        let model = model_from_coords(kind, &c, a_n);
        let ll = log_likelihood(&model, events).ok()?;
        let natural = score(&model, events).ok()?;
        let gc = coord_gradient(kind, &c, &natural);
        let gx = gc
            .iter()
            .zip(tf.iter().zip(&c))
            .map(|(g, (t, &v))| -g * t.jacobian(v))
            .collect();
        Some((-ll, gx))
    };

    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut starts_run = 0;
    for start in start_points(kind, a_n, events, domain, rng) {
        let x0: Vec<f64> = tf.iter().zip(&start).map(|(t, &v)| t.forward(v)).collect();
        starts_run += 1;
        let Some(out) = minimize_box(objective, &x0, &lower, &upper, OptimOptions::default())
        else {
            continue;
        };
        let better = best.as_ref().is_none_or(|(f, _, _)| out.f < *f);
        if better {
            let converged = out.converged();
            best = Some((out.f, out.x, converged));
        }
    }
    let (_, x, converged) = best.ok_or_else(|| {
        Error::Numerical(format!("{kind} likelihood undefined at every start point"))
    })?;
    let c: Vec<f64> = tf.iter().zip(&x).map(|(t, &v)| t.inverse(v)).collect();
    let c: Vec<f64> = c
        .iter()
        .zip(domain.lower.iter().zip(&domain.upper))
        .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
        .collect();
    finish(model_from_coords(kind, &c, a_n), events, converged, starts_run)
}

/// Start points in domain coordinates.
fn start_points(
    kind: ModelKind,
    a_n: f64,
    events: &EventSequence,
    domain: &ThetaDomain,
    rng: &RngStream,
) -> Vec<Vec<f64>> {
    let mut rng = rng.rng();
    let window = events.window();
    let len = window.length();
    let rate = events.len() as f64 / len;
    let clamp = |c: Vec<f64>| -> Vec<f64> {
        c.iter()
            .zip(domain.lower.iter().zip(&domain.upper))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
            .collect()
    };
    let mut out = Vec::with_capacity(N_STARTS);
    match kind {
        ModelKind::ExpAffinePoisson => {
            // θ₀ chosen so the expected count matches n for the given slope
            let level = |slope: f64| {
                let unit = ModelSpec::exp_affine(0.0, slope, a_n);
                (events.len() as f64 / unit.baseline_integral(window.t_start, window.t_end)).ln()
            };
            out.push(clamp(vec![level(0.0), 0.0]));
            while out.len() < N_STARTS {
                let slope = rng.random_range(-3.0..3.0) / len;
                out.push(clamp(vec![level(slope), slope]));
            }
        }
        ModelKind::HawkesExp => {
            out.push(clamp(vec![0.5 * rate, 0.5, rate.max(1.0 / len)]));
            let (lo_b, hi_b) = ((1.0 / len).ln(), (10.0 * rate.max(1.0 / len)).ln());
            while out.len() < N_STARTS {
                let rho = rng.random_range(0.05..0.9);
                let beta = rng.random_range(lo_b..hi_b).exp();
                out.push(clamp(vec![rate * (1.0 - rho), rho, beta]));
            }
        }
        ModelKind::ConstantPoisson => out.push(clamp(vec![rate / a_n])),
    }
    out
}
