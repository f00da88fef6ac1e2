//! Error types shared across the crate.

use thiserror::Error;

/// Invalid configuration detected at load/validate time.
#[derive(Debug, Error)]
#[error("configuration error: {msg}")]
pub struct ConfigError {
    msg: String,
}

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self { msg: msg.into() }
    }
}

/// Simulation failures. Non-finite state aborts the run and reports the last
/// good state time so the log can be inspected up to the failure.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite state at t = {t:.6} s (last good t = {last_good:.6} s)")]
    NonFiniteState { t: f64, last_good: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Control-allocation failures.
#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("infeasible bounds: lower[{index}] = {lower} > upper[{index}] = {upper}")]
    InfeasibleBounds { index: usize, lower: f64, upper: f64 },
}
