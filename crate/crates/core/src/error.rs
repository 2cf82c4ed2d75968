//! Error type shared by all numerical modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spectral density: {0}")]
    InvalidDensity(String),

    #[error("invalid cascade system: {0}")]
    InvalidSystem(String),

    #[error("density is not integrable: {0}")]
    NonIntegrable(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {value:e} +/- {error:e})")]
    NoConvergence {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("pole at {pole} coincides with a density discontinuity at {discontinuity}")]
    PoleOnSupportBoundary { pole: f64, discontinuity: f64 },

    #[error("kernel oscillations not resolved at tau = {tau}")]
    OscillationResolution { tau: f64 },

    #[error(
        "time step too coarse: step-halving changes the endpoint by {change:e} (rtol {rtol:e})"
    )]
    StepTooCoarse { change: f64, rtol: f64 },

    #[error("invalid solver step: {0}")]
    InvalidStep(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("no dominant peak: {0}")]
    NoPeak(String),

    #[error("discretization range too narrow: {0}")]
    RangeTooNarrow(String),

    #[error("recurrence guard violated: {0}")]
    RecurrenceGuard(String),

    #[error("norm drift {drift:e} at t = {time}")]
    NormDrift { drift: f64, time: f64 },

    #[error("intermediate-level population {population:e} exceeds {threshold:e}")]
    NotConverged { population: f64, threshold: f64 },
}

impl Error {
    /// Stable name of the error variant, used in CLI failure reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidDensity(_) => "InvalidDensity",
            Error::InvalidSystem(_) => "InvalidSystem",
            Error::NonIntegrable(_) => "NonIntegrable",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::PoleOnSupportBoundary { .. } => "PoleOnSupportBoundary",
            Error::OscillationResolution { .. } => "OscillationResolution",
            Error::StepTooCoarse { .. } => "StepTooCoarse",
            Error::InvalidStep(_) => "InvalidStep",
            Error::GridMismatch(_) => "GridMismatch",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::NoPeak(_) => "NoPeak",
            Error::RangeTooNarrow(_) => "RangeTooNarrow",
            Error::RecurrenceGuard(_) => "RecurrenceGuard",
            Error::NormDrift { .. } => "NormDrift",
            Error::NotConverged { .. } => "NotConverged",
        }
    }
}
