use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no unstable mode: q = {q_hz} Hz is at or above q0 = {q0_hz} Hz")]
    NoUnstableMode { q_hz: f64, q0_hz: f64 },

    #[error("domain size is undefined for a {0} quench")]
    NotDeepQuench(&'static str),

    #[error("mode k = {k_um} um^-1 is not dynamically stable (E_s^2 = {es2} Hz^2)")]
    UnstableMode { k_um: f64, es2: f64 },

    #[error("ground state did not converge after {iterations} iterations (last relative change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("non-finite field value at t = {t_ms} ms (step {step}, component {component}, index {index:?})")]
    NumericalAbort {
        t_ms: f64,
        step: usize,
        component: usize,
        index: (usize, usize),
    },

    #[error("empty analysis region")]
    EmptyRegion,

    #[error("zero density normalisation in correlation")]
    ZeroDenominator,

    #[error("correlation profile has no minimum inside the lag window")]
    NoMinimum,

    #[error("fit error: {0}")]
    Fit(String),

    #[error("mismatched time grids: {0}")]
    MismatchedGrids(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
