//! Exact samplers with reproducible random streams.
//!
//! Every random draw in the crate comes from an [`RngStream`]: a ChaCha20
//! generator keyed by a 64-bit seed, with the 64-bit ChaCha stream selector set
//! to `stream_id`. Sub-streams jump the block counter by `2^64` words, so each
//! `(seed, stream_id, substream)` triple is a disjoint, independent sequence.
//!
//! Stream-id layout used by the bootstrap and the experiment harness:
//!
//! ```text
//! replicate r, observed data      stream (r << 20) | 0
//! replicate r, bootstrap b >= 1   stream (r << 20) | b
//! ```

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EventSequence, Inversion, ModelSpec, ObservationWindow};

/// Bits reserved for the bootstrap index inside a stream id.
pub const BOOTSTRAP_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    #[serde(default)]
    pub substream: u32,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            seed,
            stream_id,
            substream: 0,
        }
    }

    /// Stream for bootstrap replicate `b` of the replicate this stream belongs to.
    pub fn bootstrap(&self, b: u64) -> Self {
        assert!(b < (1 << BOOTSTRAP_BITS), "bootstrap index {b} overflows");
        Self::new(self.seed, (self.stream_id << BOOTSTRAP_BITS) | b)
    }

    pub fn substream(&self, k: u32) -> Self {
        Self {
            substream: k,
            ..*self
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((self.substream as u128) << 64);
        rng
    }
}

/// Arrival times of a unit-rate Poisson process on `[0, horizon]`.
pub fn sample_standard_poisson(horizon: f64, rng: &RngStream) -> Vec<f64> {
    standard_poisson_with(horizon, &mut rng.rng())
}

pub(crate) fn standard_poisson_with<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    if !(horizon > 0.0) {
        return out;
    }
    let mut s = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        s += e;
        if s > horizon {
            return out;
        }
        out.push(s);
    }
}

/// Inhomogeneous Poisson process by inverting the compensator at the points of
/// a standard Poisson process on `[0, Λ(t_end)]`.
pub fn sample_inhomogeneous_poisson(
    model: &ModelSpec,
    window: ObservationWindow,
    rng: &RngStream,
) -> Result<EventSequence> {
    model.check()?;
    if !model.kind().is_poisson() {
        return Err(Error::WrongKind(format!(
            "inversion sampling needs a Poisson model, got {}",
            model.kind()
        )));
    }
    let empty = EventSequence::empty(window);
    let total = model.compensator(&empty, window.t_end)?;
    let unit = sample_standard_poisson(total, rng);
    let mut times = Vec::with_capacity(unit.len());
    let mut lower = window.t_start;
    for s in unit {
        match model.inverse_compensator_from(&empty, s, lower)? {
            Inversion::At(t) => {
                // two arrivals closer than the inversion resolution collapse to one
                if t > lower {
                    times.push(t);
                    lower = t;
                }
            }
            Inversion::BeyondWindow => break,
        }
    }
    EventSequence::new(times, window)
}

/// Counters from one run of the thinning sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ThinningTrace {
    pub candidates: usize,
    pub accepted: usize,
    /// Largest observed `λ(t) / λ_dominating`; never above 1.
    pub max_ratio: f64,
}

pub fn sample_hawkes(
    model: &ModelSpec,
    window: ObservationWindow,
    rng: &RngStream,
) -> Result<EventSequence> {
    sample_hawkes_traced(model, window, rng).map(|(ev, _)| ev)
}

/// Ogata thinning. Between events the intensity only decays, so the intensity
/// just after the current time dominates until the next acceptance.
pub fn sample_hawkes_traced(
    model: &ModelSpec,
    window: ObservationWindow,
    rng: &RngStream,
) -> Result<(EventSequence, ThinningTrace)> {
    model.check()?;
    let ModelSpec::HawkesExp { mu, alpha, beta } = *model else {
        return Err(Error::WrongKind(format!(
            "thinning sampler needs a Hawkes model, got {}",
            model.kind()
        )));
    };
    let mut rng = rng.rng();
    let mut trace = ThinningTrace::default();
    let mut times = Vec::new();
    let mut t = window.t_start;
    let mut excitation = 0.0;
    loop {
        let bound = mu + excitation;
        let wait: f64 = rng.sample::<f64, _>(Exp1) / bound;
        let candidate = t + wait;
        if candidate > window.t_end {
            break;
        }
        excitation *= (-beta * wait).exp();
        let ratio = (mu + excitation) / bound;
        trace.candidates += 1;
        trace.max_ratio = trace.max_ratio.max(ratio);
        if ratio > 1.0 + 1e-12 {
            return Err(Error::Invariant(format!(
                "thinning acceptance ratio {ratio} exceeds 1"
            )));
        }
        t = candidate;
        if rng.random::<f64>() < ratio && Some(&candidate) != times.last() {
            times.push(candidate);
            excitation += alpha;
            trace.accepted += 1;
        }
    }
    Ok((EventSequence::new(times, window)?, trace))
}

/// Dispatches to the exact sampler for the model's family.
pub fn sample(model: &ModelSpec, window: ObservationWindow, rng: &RngStream) -> Result<EventSequence> {
    if model.kind().is_poisson() {
        sample_inhomogeneous_poisson(model, window, rng)
    } else {
        sample_hawkes(model, window, rng)
    }
}
