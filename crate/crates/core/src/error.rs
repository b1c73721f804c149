//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The vertices do not span the ambient dimension.
    #[error("degenerate simplex: |det A| = {det:.3e} below cutoff {cutoff:.3e}")]
    DegenerateSimplex { det: f64, cutoff: f64 },

    /// Dimension outside what the requested operation supports.
    #[error("dimension {dim} unsupported here (supported: {supported})")]
    UnsupportedDimension { dim: usize, supported: &'static str },

    /// Face index outside `0..=n`.
    #[error("face index {index} out of range: an {dim}-simplex has {} faces", dim + 1)]
    FaceIndexOutOfRange { index: usize, dim: usize },

    /// Antisymmetrization over equal wavenumbers vanishes identically.
    #[error(
        "wavenumbers {0:?} do not give a mode: they must be strictly decreasing positive integers"
    )]
    IdenticallyZeroMode(Vec<u32>),

    /// Refinement level beyond the configured cap.
    #[error("refinement level {requested} exceeds cap {cap} in dimension {dim}")]
    ResourceLimit {
        requested: usize,
        cap: usize,
        dim: usize,
    },

    /// Coefficient matrix fails symmetry or positive definiteness.
    #[error("invalid elliptic coefficients: {0}")]
    InvalidCoefficients(String),

    /// Eigensolver or factorization failure.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// Neumann masses violate the triangle inequality; no triangle produces them.
    #[error("no triangle has Neumann masses ({0}, {1}, {2})")]
    NoSuchTriangle(f64, f64, f64),

    /// Neumann masses are not consistent with any SPD operator.
    #[error("inconsistent Neumann data: {0}")]
    InconsistentData(String),

    /// The counterexample family is only defined while 1 - d^2 - eps^2 > 0.
    #[error("epsilon {0} outside the admissible range of the counterexample family")]
    EpsilonTooLarge(f64),

    /// Quadrature rule dimension does not match the integration domain.
    #[error("quadrature rule of dimension {rule} applied to a domain of dimension {domain}")]
    QuadratureDimensionMismatch { rule: usize, domain: usize },

    /// Requested more eigenpairs than interior degrees of freedom.
    #[error("requested {requested} eigenpairs but the system has {available} interior DOFs")]
    TooManyEigenpairs { requested: usize, available: usize },
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::DegenerateSimplex { .. } => "DegenerateSimplex",
            Error::UnsupportedDimension { .. } => "UnsupportedDimension",
            Error::FaceIndexOutOfRange { .. } => "FaceIndexOutOfRange",
            Error::IdenticallyZeroMode(_) => "IdenticallyZeroMode",
            Error::ResourceLimit { .. } => "ResourceLimit",
            Error::InvalidCoefficients(_) => "InvalidCoefficients",
            Error::NumericalBreakdown(_) => "NumericalBreakdown",
            Error::NoSuchTriangle(..) => "NoSuchTriangle",
            Error::InconsistentData(_) => "InconsistentData",
            Error::EpsilonTooLarge(_) => "EpsilonTooLarge",
            Error::QuadratureDimensionMismatch { .. } => "QuadratureDimensionMismatch",
            Error::TooManyEigenpairs { .. } => "TooManyEigenpairs",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
