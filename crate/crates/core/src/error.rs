use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// The symmetric eigensolver did not converge, or was fed non-finite data.
    #[error("eigendecomposition failed for {dim}x{dim} matrix (frobenius norm {frob_norm:e}, finite: {finite})")]
    Eigen {
        dim: usize,
        frob_norm: f64,
        finite: bool,
    },

    /// A caller broke a documented precondition (dimension mismatch, sigma <= 0, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A problem file could not be parsed or failed a structural invariant.
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    /// A stored reference point is not a KKT point to the stated tolerance.
    #[error("reference point verification failed for '{id}': sigma(v*) = {residual:e} exceeds tolerance {tol:e}")]
    Verification { id: String, residual: f64, tol: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
