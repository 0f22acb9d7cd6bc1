//! Error types shared across the simulator.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Bad configuration or invalid input value.
    #[error("config error: {0}")]
    Config(String),

    /// An argument outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A lookup outside a tabulated range.
    #[error("out of range on {axis} axis: {value} not in [{min}, {max}]")]
    OutOfRange {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A caller broke an internal contract (mismatched lengths, stale kernels, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Quadrature failed to converge; carries the tolerance actually achieved.
    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },

    /// Numerical failure during integration (NaN, blow-up, instability).
    #[error("numerical failure: {0}")]
    Numerics(String),

    /// Integration became unstable; a smaller step is suggested.
    #[error("integration instability: {what}; try a smaller time step (dt <= {suggested_dt:e} ps)")]
    Instability { what: String, suggested_dt: f64 },

    /// Hard violation of the polaron weak-field validity bound (metric >= 1).
    #[error("polaron validity bound violated: metric = {metric:.3} >= 1")]
    ValidityBound { metric: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 validity bound.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Domain(_) => 2,
            SimError::ValidityBound { .. } => 4,
            SimError::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
