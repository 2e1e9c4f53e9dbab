//! Parametric bootstrap goodness-of-fit tests for Poisson and Hawkes point
//! processes.
//!
//! The pipeline is: fit a model by maximum likelihood ([`estimate`]), map the
//! event times through the fitted compensator ([`models`]), measure how far the
//! rescaled increments are from unit exponentials with a weighted-L² distance
//! between Laplace transforms ([`gof`]), and calibrate that distance by
//! re-simulating from the fitted model ([`simulate`]). [`experiments`] runs the
//! whole test many times to estimate type I error and power.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod gof;
pub mod io;
pub mod models;
pub mod optimize;
pub mod simulate;

pub use error::{Error, Result};
pub use estimate::{fit_mle, log_likelihood, score, FitResult};
pub use gof::{bootstrap_test, BootstrapConfig, GofTestResult};
pub use models::{EventSequence, ModelKind, ModelSpec, ObservationWindow, ThetaDomain};
pub use simulate::RngStream;
