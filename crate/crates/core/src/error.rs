use thiserror::Error;

pub type Result<T, E = OuError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OuError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix is not symmetric (relative defect {defect:.3e})")]
    Asymmetric { defect: f64 },

    #[error("drift is not Hurwitz-stable (spectral abscissa {abscissa:.6e})")]
    NotStable { abscissa: f64 },

    #[error("quadrature did not converge after {panels} panels (achieved {achieved:.3e})")]
    QuadratureNotConverged { panels: usize, achieved: f64 },

    #[error("result is not representable in f64 ({0})")]
    Unrepresentable(String),

    #[error("invariant covariance is not available for this model")]
    MissingInvariantCovariance,

    #[error("vector is not in the range of the factor (residual {residual:.3e})")]
    NotInRange { residual: f64 },

    #[error("restricted generator is not normal (defect {defect:.3e})")]
    NonNormal { defect: f64 },

    #[error("Cameron-Martin space is not invariant under the semigroup")]
    NotInvariant,

    #[error("covariance is indefinite (min eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl OuError {
    /// Input problems (exit 2) versus numerical breakdowns (exit 3).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            OuError::InvalidInput(_)
                | OuError::DimensionMismatch { .. }
                | OuError::Asymmetric { .. }
                | OuError::Unsupported(_)
                | OuError::Io(_)
                | OuError::Json(_)
        )
    }

    pub(crate) fn dims(expected: impl Into<String>, got: impl Into<String>) -> Self {
        OuError::DimensionMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
