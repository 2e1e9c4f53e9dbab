//! Parametric intensity models.
//!
//! Three families are supported:
//!
//! ```text
//! ConstantPoisson   λ(t) = a_n · μ
//! ExpAffinePoisson  λ(t) = a_n · exp(θ₀ + θ₁ t)
//! HawkesExp         λ(t) = μ + Σ_{t_i < t} α · exp(-β (t - t_i))
//! ```
//!
//! Excitation is left-open: an event at exactly `t` does not contribute to
//! `λ(t)`. Every evaluation is restricted to the observation window, and the
//! implicit origin `t_0 = t_start` is never stored in an [`EventSequence`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Newton/bisection iteration cap for [`ModelSpec::inverse_compensator`].
pub const INVERSION_MAX_ITER: usize = 200;
/// Relative tolerance on `|Λ(t) - s|` for the compensator inverse.
pub const INVERSION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub t_start: f64,
    pub t_end: f64,
}

impl ObservationWindow {
    pub fn new(t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::InvalidEvents(format!(
                "window [{t_start}, {t_end}] must be finite with t_end > t_start"
            )));
        }
        Ok(Self { t_start, t_end })
    }

    /// The unit window `[0, 1]`.
    pub fn unit() -> Self {
        Self {
            t_start: 0.0,
            t_end: 1.0,
        }
    }

    pub fn length(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= self.t_start && t <= self.t_end {
            Ok(())
        } else {
            Err(Error::OutsideWindow {
                t,
                start: self.t_start,
                end: self.t_end,
            })
        }
    }
}

impl Default for ObservationWindow {
    fn default() -> Self {
        Self::unit()
    }
}

/// Strictly increasing event times inside `(t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    times: Vec<f64>,
    window: ObservationWindow,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, window: ObservationWindow) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t <= window.t_start || t > window.t_end {
                return Err(Error::InvalidEvents(format!(
                    "event {i} at {t} outside ({}, {}]",
                    window.t_start, window.t_end
                )));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(Error::InvalidEvents(format!(
                    "events {} and {i} are not strictly increasing ({} >= {t})",
                    i - 1,
                    times[i - 1]
                )));
            }
        }
        Ok(Self { times, window })
    }

    pub fn empty(window: ObservationWindow) -> Self {
        Self {
            times: Vec::new(),
            window,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Events strictly before `t`.
    pub fn before(&self, t: f64) -> &[f64] {
        let k = self.times.partition_point(|&x| x < t);
        &self.times[..k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ConstantPoisson,
    ExpAffinePoisson,
    HawkesExp,
}

impl ModelKind {
    pub fn n_params(self) -> usize {
        match self {
            ModelKind::ConstantPoisson => 1,
            ModelKind::ExpAffinePoisson => 2,
            ModelKind::HawkesExp => 3,
        }
    }

    pub fn is_poisson(self) -> bool {
        !matches!(self, ModelKind::HawkesExp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ConstantPoisson => "constant_poisson",
            ModelKind::ExpAffinePoisson => "exp_affine_poisson",
            ModelKind::HawkesExp => "hawkes_exp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "poisson" | "constant_poisson" | "constant" => Ok(ModelKind::ConstantPoisson),
            "exp_affine" | "exp_affine_poisson" | "inhomogeneous_poisson" => {
                Ok(ModelKind::ExpAffinePoisson)
            }
            "hawkes" | "hawkes_exp" => Ok(ModelKind::HawkesExp),
            _ => Err(Error::Parse(format!(
                "unknown model kind {s:?} (expected poisson, exp-affine or hawkes)"
            ))),
        }
    }
}

/// A single failed check reported by [`ModelSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NonFinite(&'static str),
    RateNotPositive(&'static str),
    NegativeExcitation,
    BranchingNotSubcritical { ratio: f64 },
    ScaleBelowOne { a_n: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite(p) => write!(f, "parameter {p} is not finite"),
            Violation::RateNotPositive(p) => write!(f, "rate not positive ({p})"),
            Violation::NegativeExcitation => f.write_str("excitation amplitude alpha is negative"),
            Violation::BranchingNotSubcritical { ratio } => {
                write!(f, "branching factor ≥ 1 (alpha/beta = {ratio})")
            }
            Violation::ScaleBelowOne { a_n } => write!(f, "scale a_n = {a_n} is below 1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    ConstantPoisson { mu: f64, a_n: f64 },
    ExpAffinePoisson { theta0: f64, theta1: f64, a_n: f64 },
    HawkesExp { mu: f64, alpha: f64, beta: f64 },
}

/// Result of inverting the compensator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inversion {
    At(f64),
    /// `s` exceeds `Λ(t_end)`.
    BeyondWindow,
}

impl Inversion {
    pub fn time(self) -> Option<f64> {
        match self {
            Inversion::At(t) => Some(t),
            Inversion::BeyondWindow => None,
        }
    }
}

impl ModelSpec {
    pub fn constant_poisson(mu: f64) -> Self {
        ModelSpec::ConstantPoisson { mu, a_n: 1.0 }
    }

    pub fn exp_affine(theta0: f64, theta1: f64, a_n: f64) -> Self {
        ModelSpec::ExpAffinePoisson {
            theta0,
            theta1,
            a_n,
        }
    }

    pub fn hawkes(mu: f64, alpha: f64, beta: f64) -> Self {
        ModelSpec::HawkesExp { mu, alpha, beta }
    }

    /// Builds a model from a parameter vector in its natural coordinates.
    pub fn from_theta(kind: ModelKind, theta: &[f64], a_n: f64) -> Result<Self> {
        if theta.len() != kind.n_params() {
            return Err(Error::Config(format!(
                "{kind} expects {} parameters, got {}",
                kind.n_params(),
                theta.len()
            )));
        }
        Ok(match kind {
            ModelKind::ConstantPoisson => ModelSpec::ConstantPoisson { mu: theta[0], a_n },
            ModelKind::ExpAffinePoisson => ModelSpec::ExpAffinePoisson {
                theta0: theta[0],
                theta1: theta[1],
                a_n,
            },
            ModelKind::HawkesExp => ModelSpec::HawkesExp {
                mu: theta[0],
                alpha: theta[1],
                beta: theta[2],
            },
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::ConstantPoisson { .. } => ModelKind::ConstantPoisson,
            ModelSpec::ExpAffinePoisson { .. } => ModelKind::ExpAffinePoisson,
            ModelSpec::HawkesExp { .. } => ModelKind::HawkesExp,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        match *self {
            ModelSpec::ConstantPoisson { mu, .. } => vec![mu],
            ModelSpec::ExpAffinePoisson { theta0, theta1, .. } => vec![theta0, theta1],
            ModelSpec::HawkesExp { mu, alpha, beta } => vec![mu, alpha, beta],
        }
    }

    pub fn a_n(&self) -> f64 {
        match *self {
            ModelSpec::ConstantPoisson { a_n, .. } | ModelSpec::ExpAffinePoisson { a_n, .. } => a_n,
            ModelSpec::HawkesExp { .. } => 1.0,
        }
    }

    /// True when this model is also a member of the `kind` family
    /// (e.g. a Hawkes process with `alpha = 0` is a constant Poisson process).
    pub fn reduces_to(&self, kind: ModelKind) -> bool {
        if self.kind() == kind {
            return true;
        }
        let constant = match *self {
            ModelSpec::ConstantPoisson { .. } => true,
            ModelSpec::ExpAffinePoisson { theta1, .. } => theta1 == 0.0,
            ModelSpec::HawkesExp { alpha, .. } => alpha == 0.0,
        };
        match kind {
            ModelKind::ConstantPoisson => constant,
            // every constant rate is exp-affine with θ₁ = 0, and a Hawkes process with α = 0
            ModelKind::ExpAffinePoisson | ModelKind::HawkesExp => constant,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = |name: &'static str, v: f64, out: &mut Vec<Violation>| {
            if !v.is_finite() {
                out.push(Violation::NonFinite(name));
                false
            } else {
                true
            }
        };
        match *self {
            ModelSpec::ConstantPoisson { mu, a_n } => {
                if finite("mu", mu, &mut out) && mu <= 0.0 {
                    out.push(Violation::RateNotPositive("mu"));
                }
                if finite("a_n", a_n, &mut out) && a_n < 1.0 {
                    out.push(Violation::ScaleBelowOne { a_n });
                }
            }
            ModelSpec::ExpAffinePoisson {
                theta0,
                theta1,
                a_n,
            } => {
                finite("theta0", theta0, &mut out);
                finite("theta1", theta1, &mut out);
                if finite("a_n", a_n, &mut out) && a_n < 1.0 {
                    out.push(Violation::ScaleBelowOne { a_n });
                }
            }
            ModelSpec::HawkesExp { mu, alpha, beta } => {
                let ok_mu = finite("mu", mu, &mut out);
                let ok_alpha = finite("alpha", alpha, &mut out);
                let ok_beta = finite("beta", beta, &mut out);
                if ok_mu && mu <= 0.0 {
                    out.push(Violation::RateNotPositive("mu"));
                }
                if ok_alpha && alpha < 0.0 {
                    out.push(Violation::NegativeExcitation);
                }
                if ok_beta && beta <= 0.0 {
                    out.push(Violation::RateNotPositive("beta"));
                }
                if ok_alpha && ok_beta && beta > 0.0 && alpha >= beta {
                    out.push(Violation::BranchingNotSubcritical {
                        ratio: alpha / beta,
                    });
                }
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// Conditional intensity `λ(t)` using events of `history` strictly before `t`.
    pub fn intensity_at(&self, history: &EventSequence, t: f64) -> Result<f64> {
        history.window().check_time(t)?;
        Ok(match *self {
            ModelSpec::ConstantPoisson { mu, a_n } => a_n * mu,
            ModelSpec::ExpAffinePoisson {
                theta0,
                theta1,
                a_n,
            } => a_n * (theta0 + theta1 * t).exp(),
            ModelSpec::HawkesExp { mu, alpha, beta } => {
                let excitation: f64 = history
                    .before(t)
                    .iter()
                    .map(|&ti| (-beta * (t - ti)).exp())
                    .sum();
                mu + alpha * excitation
            }
        })
    }

    /// Closed-form compensator `Λ(t) = ∫_{t_start}^t λ(s) ds`.
    pub fn compensator(&self, history: &EventSequence, t: f64) -> Result<f64> {
        let window = history.window();
        window.check_time(t)?;
        Ok(match *self {
            ModelSpec::HawkesExp { mu, alpha, beta } => {
                let jumps: f64 = history
                    .before(t)
                    .iter()
                    .map(|&ti| -(-beta * (t - ti)).exp_m1())
                    .sum();
                mu * (t - window.t_start) + alpha / beta * jumps
            }
            _ => self.baseline_integral(window.t_start, t),
        })
    }

    /// `Λ(t_i) - Λ(t_{i-1})` for every event, with `t_0 = t_start`.
    ///
    /// The Hawkes case runs in O(n) using the decayed excitation state
    /// `S_i = Σ_{j ≤ i} exp(-β (t_i - t_j))`.
    pub fn compensator_increments(&self, events: &EventSequence) -> Vec<f64> {
        let t0 = events.window().t_start;
        let times = events.times();
        match *self {
            ModelSpec::HawkesExp { mu, alpha, beta } => {
                let ratio = alpha / beta;
                let mut state = 0.0;
                let mut prev = t0;
                times
                    .iter()
                    .map(|&t| {
                        let dt = t - prev;
                        let decay_gap = -(-beta * dt).exp_m1();
                        let inc = mu * dt + ratio * state * decay_gap;
                        state = state * (-beta * dt).exp() + 1.0;
                        prev = t;
                        inc
                    })
                    .collect()
            }
            _ => {
                let mut prev = t0;
                times
                    .iter()
                    .map(|&t| {
                        let inc = self.baseline_integral(prev, t);
                        prev = t;
                        inc
                    })
                    .collect()
            }
        }
    }

    /// Returns `t` with `Λ(t) = s`, or [`Inversion::BeyondWindow`] when
    /// `s > Λ(t_end)`.
    pub fn inverse_compensator(&self, history: &EventSequence, s: f64) -> Result<Inversion> {
        self.inverse_compensator_from(history, s, history.window().t_start)
    }

    /// As [`Self::inverse_compensator`], with the search bracket starting at
    /// `lower` (which must satisfy `Λ(lower) ≤ s`).
    pub(crate) fn inverse_compensator_from(
        &self,
        history: &EventSequence,
        s: f64,
        lower: f64,
    ) -> Result<Inversion> {
        let window = history.window();
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Numerical(format!(
                "cannot invert compensator at s = {s}"
            )));
        }
        if s == 0.0 {
            return Ok(Inversion::At(window.t_start));
        }
        let total = self.compensator(history, window.t_end)?;
        if s > total {
            return Ok(Inversion::BeyondWindow);
        }
        let tol = INVERSION_TOL * s.max(1.0);
        let mut lo = lower.clamp(window.t_start, window.t_end);
        let mut hi = window.t_end;
        let lam_lo = self.compensator(history, lo)?;
        if lam_lo > s + tol {
            return Err(Error::Invariant(format!(
                "compensator bracket lower end {lo} maps above target {s}"
            )));
        }
        let mut t = lo + (hi - lo) * ((s - lam_lo) / (total - lam_lo).max(f64::MIN_POSITIVE));
        t = t.clamp(lo, hi);
        for _ in 0..INVERSION_MAX_ITER {
            let f = self.compensator(history, t)? - s;
            if f.abs() <= tol {
                return Ok(Inversion::At(t));
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                return Ok(Inversion::At(t));
            }
            let slope = self.intensity_at(history, t)?;
            if !(slope > 0.0) {
                return Err(Error::Invariant(format!(
                    "non-positive intensity {slope} at t = {t}"
                )));
            }
            let newton = t - f / slope;
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::Invariant(format!(
            "compensator inversion did not converge for s = {s}"
        )))
    }

    /// `∫_a^b` of the deterministic baseline (Poisson kinds; μ·(b-a) for Hawkes).
    pub(crate) fn baseline_integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            ModelSpec::ConstantPoisson { mu, a_n } => a_n * mu * (b - a),
            ModelSpec::ExpAffinePoisson {
                theta0,
                theta1,
                a_n,
            } => {
                let h = b - a;
                a_n * (theta0 + theta1 * a).exp() * h * exprel(theta1 * h)
            }
            ModelSpec::HawkesExp { mu, .. } => mu * (b - a),
        }
    }
}

/// `(e^x - 1) / x`, continuous at zero.
pub(crate) fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * (0.5 + x / 6.0)
    } else {
        x.exp_m1() / x
    }
}

/// Box bounds for maximum-likelihood estimation.
///
/// Coordinates are the optimizer's natural ones: `(μ)` for constant Poisson,
/// `(θ₀, θ₁)` for exp-affine Poisson and `(μ, ρ = α/β, β)` for Hawkes, where the
/// `stability` flag records that `ρ < 1` is enforced through the `ρ` bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub stability: bool,
}

impl ThetaDomain {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::ConstantPoisson => Self {
                lower: vec![1e-3],
                upper: vec![1e6],
                stability: false,
            },
            ModelKind::ExpAffinePoisson => Self {
                lower: vec![-20.0, -20.0],
                upper: vec![20.0, 20.0],
                stability: false,
            },
            ModelKind::HawkesExp => Self {
                lower: vec![1e-3, 1e-6, 1e-3],
                upper: vec![1e6, 1.0 - 1e-6, 1e4],
                stability: true,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn check(&self, kind: ModelKind) -> Result<()> {
        if self.lower.len() != kind.n_params() || self.upper.len() != kind.n_params() {
            return Err(Error::Config(format!(
                "domain dimension does not match {kind}"
            )));
        }
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "domain coordinate {i} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        match kind {
            ModelKind::ConstantPoisson if self.lower[0] <= 0.0 => {
                Err(Error::Config("rate lower bound must be positive".into()))
            }
            ModelKind::HawkesExp
                if self.lower[0] <= 0.0
                    || self.lower[1] <= 0.0
                    || self.upper[1] >= 1.0
                    || self.lower[2] <= 0.0 =>
            {
                Err(Error::Config(
                    "Hawkes domain needs positive mu, beta and 0 < rho < 1".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Model parameters expressed in domain coordinates.
    pub fn coords_of(model: &ModelSpec) -> Vec<f64> {
        match *model {
            ModelSpec::HawkesExp { mu, alpha, beta } => vec![mu, alpha / beta, beta],
            _ => model.theta(),
        }
    }

    pub fn contains(&self, model: &ModelSpec) -> bool {
        let c = Self::coords_of(model);
        c.len() == self.dim()
            && c
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_events(times: &[f64]) -> EventSequence {
        EventSequence::new(times.to_vec(), ObservationWindow::unit()).unwrap()
    }

    #[test]
    fn intensity_examples() {
        let empty = EventSequence::empty(ObservationWindow::unit());
        let h = ModelSpec::hawkes(1.0, 0.5, 1.0);
        assert_eq!(h.intensity_at(&empty, 0.7).unwrap(), 1.0);

        let p = ModelSpec::ConstantPoisson { mu: 2.0, a_n: 10.0 };
        assert_eq!(p.intensity_at(&unit_events(&[0.1]), 0.3).unwrap(), 20.0);

        let h = ModelSpec::hawkes(1.0, 1.0, 2.0);
        let v = h.intensity_at(&unit_events(&[0.5]), 1.0).unwrap();
        assert!((v - (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        assert!((v - 1.367879).abs() < 1e-6);
    }

    #[test]
    fn excitation_is_left_open() {
        let h = ModelSpec::hawkes(1.0, 1.0, 2.0);
        let ev = unit_events(&[0.5]);
        assert_eq!(h.intensity_at(&ev, 0.5).unwrap(), 1.0);
        assert!(h.intensity_at(&ev, 0.5 + 1e-12).unwrap() > 1.9);
    }

    #[test]
    fn outside_window_is_an_error() {
        let h = ModelSpec::hawkes(1.0, 1.0, 2.0);
        let ev = unit_events(&[0.5]);
        assert!(matches!(
            h.intensity_at(&ev, 1.5),
            Err(Error::OutsideWindow { .. })
        ));
        assert!(h.compensator(&ev, -0.1).is_err());
    }

    #[test]
    fn compensator_examples() {
        let p = ModelSpec::constant_poisson(2.0);
        let empty = EventSequence::empty(ObservationWindow::unit());
        assert_eq!(p.compensator(&empty, 0.5).unwrap(), 1.0);

        let h = ModelSpec::hawkes(1.0, 1.0, 2.0);
        let ev = unit_events(&[0.5, 0.9]);
        assert_eq!(h.compensator(&ev, 0.0).unwrap(), 0.0);

        let v = h.compensator(&unit_events(&[0.5]), 1.0).unwrap();
        let expected = 1.0 + 0.5 * (1.0 - (-1.0f64).exp());
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 1.316060).abs() < 1e-6);
    }

    #[test]
    fn increments_examples() {
        let p = ModelSpec::constant_poisson(1.0);
        let inc = p.compensator_increments(&unit_events(&[0.2, 0.7]));
        assert!((inc[0] - 0.2).abs() < 1e-15 && (inc[1] - 0.5).abs() < 1e-15);

        let empty = EventSequence::empty(ObservationWindow::unit());
        assert!(p.compensator_increments(&empty).is_empty());
        assert!(ModelSpec::hawkes(1.0, 0.5, 1.0)
            .compensator_increments(&empty)
            .is_empty());

        let h = ModelSpec::hawkes(1.0, 1.0, 2.0);
        let inc = h.compensator_increments(&unit_events(&[0.5, 1.0]));
        assert!((inc[0] - 0.5).abs() < 1e-15);
        assert!((inc[1] - (0.5 + 0.5 * (1.0 - (-1.0f64).exp()))).abs() < 1e-14);
        assert!((inc[1] - 0.816060).abs() < 1e-6);
    }

    #[test]
    fn inverse_examples() {
        let empty = EventSequence::empty(ObservationWindow::unit());
        let p = ModelSpec::constant_poisson(2.0);
        let t = p.inverse_compensator(&empty, 1.0).unwrap().time().unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert_eq!(p.inverse_compensator(&empty, 0.0).unwrap(), Inversion::At(0.0));
        assert_eq!(
            p.inverse_compensator(&empty, 2.5).unwrap(),
            Inversion::BeyondWindow
        );

        let e = ModelSpec::exp_affine(0.0, 1.0, 1.0);
        let s = std::f64::consts::E - 1.0;
        let t = e.inverse_compensator(&empty, s).unwrap().time().unwrap();
        assert!((t - 1.0).abs() < 1e-9);
        assert!(e.inverse_compensator(&empty, -1.0).is_err());
    }

    #[test]
    fn inverse_through_hawkes_history() {
        let h = ModelSpec::hawkes(1.0, 1.5, 2.0);
        let ev = unit_events(&[0.1, 0.2, 0.25, 0.8]);
        for &t in &[0.05, 0.1, 0.2, 0.22, 0.5, 0.8, 0.95, 1.0] {
            let s = h.compensator(&ev, t).unwrap();
            let back = h.inverse_compensator(&ev, s).unwrap().time().unwrap();
            assert!((back - t).abs() < 1e-9, "{t} -> {s} -> {back}");
        }
    }

    #[test]
    fn validation_examples() {
        let v = ModelSpec::hawkes(1.0, 2.0, 1.0).validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("branching factor ≥ 1"));

        let v = ModelSpec::constant_poisson(0.0).validate();
        assert_eq!(v, vec![Violation::RateNotPositive("mu")]);
        assert!(v[0].to_string().contains("rate not positive"));

        assert!(ModelSpec::hawkes(50.0, 40.0, 80.0).validate().is_empty());
        assert!(ModelSpec::hawkes(30.0, 0.0, 1.0).validate().is_empty());

        let v = ModelSpec::ConstantPoisson { mu: -1.0, a_n: 0.5 }.validate();
        assert_eq!(v.len(), 2);
        let v = ModelSpec::hawkes(f64::NAN, -1.0, 0.0).validate();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn kind_parsing_and_reduction() {
        assert_eq!("hawkes".parse::<ModelKind>().unwrap(), ModelKind::HawkesExp);
        assert_eq!(
            "exp-affine".parse::<ModelKind>().unwrap(),
            ModelKind::ExpAffinePoisson
        );
        assert!("gamma".parse::<ModelKind>().is_err());
        assert!(ModelSpec::hawkes(30.0, 0.0, 1.0).reduces_to(ModelKind::ConstantPoisson));
        assert!(!ModelSpec::hawkes(30.0, 1.0, 2.0).reduces_to(ModelKind::ConstantPoisson));
        assert!(ModelSpec::constant_poisson(3.0).reduces_to(ModelKind::ExpAffinePoisson));
        assert!(!ModelSpec::exp_affine(0.0, 1.0, 1.0).reduces_to(ModelKind::ConstantPoisson));
    }

    #[test]
    fn event_sequence_rejects_bad_input() {
        let w = ObservationWindow::unit();
        assert!(EventSequence::new(vec![0.2, 0.2], w).is_err());
        assert!(EventSequence::new(vec![0.3, 0.2], w).is_err());
        assert!(EventSequence::new(vec![0.0], w).is_err());
        assert!(EventSequence::new(vec![1.0], w).is_ok());
        assert!(EventSequence::new(vec![1.0 + 1e-9], w).is_err());
        assert!(ObservationWindow::new(1.0, 1.0).is_err());
    }

    #[test]
    fn default_domains_are_valid() {
        for kind in [
            ModelKind::ConstantPoisson,
            ModelKind::ExpAffinePoisson,
            ModelKind::HawkesExp,
        ] {
            ThetaDomain::default_for(kind).check(kind).unwrap();
        }
        let d = ThetaDomain::default_for(ModelKind::HawkesExp);
        assert!(d.contains(&ModelSpec::hawkes(50.0, 40.0, 80.0)));
        assert!(!d.contains(&ModelSpec::hawkes(50.0, 80.0, 80.0)));
    }
}
