use std::path::PathBuf;

use crate::fixedpoint::FixedPointRecord;
use crate::floer::{ContinuationState, StripGrid};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no admissible frequencies at this k (delta = {delta}, k = {k})")]
    NoAdmissibleFrequencies { delta: f64, k: usize },

    #[error("kernel is not admissible: psi_hat({mode}) = {value} but |exp(i m^2) - 1| = {gap} < delta = {delta}")]
    NotAdmissible {
        mode: i64,
        value: f64,
        gap: f64,
        delta: f64,
    },

    #[error("kernel is not Hermitian: psi_hat({mode}) != conj(psi_hat({neg}))", neg = -mode)]
    NotHermitian { mode: i64 },

    #[error("integrator step too large: norm drift {drift:e} exceeds {limit:e} at dt = {dt}")]
    IntegratorStepTooLarge { drift: f64, limit: f64, dt: f64 },

    #[error("strip solver failed after {iterations} iterations: residual {residual:e} ({reason})")]
    StripSolve {
        iterations: usize,
        residual: f64,
        reason: String,
        best: Box<StripGrid>,
    },

    #[error("continuation stalled at T = {t}: step {step:e} below minimum ({reason})")]
    ContinuationStalled {
        t: f64,
        step: f64,
        reason: String,
        state: Box<ContinuationState>,
    },

    #[error("Newton refinement failed after {iterations} iterations: residual {residual:e}")]
    NewtonFailed {
        iterations: usize,
        residual: f64,
        best: Box<FixedPointRecord>,
    },

    #[error("node (s index {s_index}, t index {t_index}) lies outside the tubular neighborhood: projection norm {projection_norm:.3} < 0.5")]
    TubularNeighborhood {
        s_index: usize,
        t_index: usize,
        projection_norm: f64,
    },

    #[error("checks failed: {0}")]
    CheckFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegratorStepTooLarge { .. }
                | Error::StripSolve { .. }
                | Error::ContinuationStalled { .. }
                | Error::NewtonFailed { .. }
                | Error::TubularNeighborhood { .. }
        )
    }
}
