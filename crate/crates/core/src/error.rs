use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A clean chain (W = 0) never scatters.
    #[error("infinite scattering time: the on-site potential vanishes")]
    InfiniteScatteringTime,

    #[error("`{quantity}` is not defined in this phase ({phase})")]
    NotDefinedInPhase {
        quantity: &'static str,
        phase: &'static str,
    },

    #[error("system size {n} exceeds the master-equation limit {limit}; use the quantum-drift ensemble instead")]
    SizeLimit { n: usize, limit: usize },

    #[error("integration failed at t = {achieved} (target {target}): {reason}")]
    Integration {
        achieved: f64,
        target: f64,
        reason: String,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigensolve(String),

    #[error("linear solve failed: {reason} (residual {residual:e})")]
    LinearSolve { reason: String, residual: f64 },

    #[error("trajectory {index} aborted at t = {time}: norm drift {drift:e}")]
    NormDrift { index: usize, time: f64, drift: f64 },

    #[error("all {0} trajectories failed")]
    AllTrajectoriesFailed(usize),

    #[error("fit window [{start}, {end}] is unusable: {reason}")]
    FitWindow {
        start: f64,
        end: f64,
        reason: String,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("coherent series ends at t = {horizon} but the tail carries {tail_fraction:.3} of the integral; extend it to t >= {required}")]
    SeriesTooShort {
        horizon: f64,
        required: f64,
        tail_fraction: f64,
    },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of numerical routines (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::Eigensolve(_)
                | Error::LinearSolve { .. }
                | Error::NormDrift { .. }
                | Error::AllTrajectoriesFailed(_)
                | Error::Quadrature(_)
                | Error::SeriesTooShort { .. }
                | Error::FitWindow { .. }
        )
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {value}")))
    }
}
