//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix required to be Hermitian deviates from its adjoint.
    #[error("matrix is not Hermitian (‖M − M†‖ = {deviation:.3e}, tol {tol:.3e})")]
    Hermiticity { deviation: f64, tol: f64 },

    /// A NaN or infinite component was found where only finite values are admitted.
    #[error("non-finite entry at {context}")]
    NonFinite { context: String },

    /// An eigenvalue falls outside the admitted ±1 bands, or a required
    /// sign subspace is empty.
    #[error("spectrum is not dichotomic: {0}")]
    Spectrum(String),

    /// Eigenvalue signature inconsistent with the requested dimension.
    #[error("invalid signature: {0}")]
    Signature(String),

    /// A matrix required to be an orthogonal projector is not one.
    #[error(
        "matrix is not a projector (hermiticity {hermiticity:.3e}, idempotency {idempotency:.3e})"
    )]
    Projector { hermiticity: f64, idempotency: f64 },

    /// Projection onto an outcome whose probability is numerically zero.
    #[error("collapse onto outcome of probability {probability:.3e} (below floor {floor:.3e})")]
    ZeroProbabilityCollapse { probability: f64, floor: f64 },

    /// Numerical failure: solver non-convergence, out-of-range probability,
    /// or a broken invariant upstream.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Two routes that are algebraically identical disagreed beyond
    /// tolerance; this signals an implementation bug, not bad input.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    /// Parameter vector length does not match the search space.
    #[error("parameter vector has length {got}, expected {expected}")]
    Parameter { got: usize, expected: usize },

    /// Outcome labels of two distributions do not match.
    #[error("label mismatch: ({0}, {1}) vs ({2}, {3})")]
    Label(String, String, String, String),

    /// An argument value outside the accepted domain.
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
