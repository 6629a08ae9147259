use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {diff:e}")]
    NonSymmetric { row: usize, col: usize, diff: f64 },
    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e}")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("point lies outside the scaling cone of the matrix index")]
    OutsideCone,
    #[error("numerator vanishes on the fit window (tail independence at this scaling)")]
    Degenerate,
    #[error("ratio diverges: fitted slope {slope:.6} is below {threshold:.6}")]
    Diverging { slope: f64, threshold: f64 },
    #[error("too few tail points: expected count {expected:.1} < {required}")]
    TooFewTailPoints { expected: f64, required: usize },
    #[error("margin mismatch: column {column}, row {row} maps to {value}")]
    MarginMismatch { column: usize, row: usize, value: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short diagnostic name used in machine-readable reports.
    pub fn diagnostic_name(&self) -> &'static str {
        match self {
            Error::NonSymmetric { .. } => "NonSymmetric",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::Domain(_) => "DomainError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::OutsideCone => "OutsideCone",
            Error::Degenerate => "Degenerate",
            Error::Diverging { .. } => "Diverging",
            Error::TooFewTailPoints { .. } => "TooFewTailPoints",
            Error::MarginMismatch { .. } => "MarginMismatch",
            Error::Unsupported(_) => "Unsupported",
        }
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}

pub(crate) fn check_unit_cube(u: &[f64]) -> Result<()> {
    for (i, &x) in u.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("coordinate {i} = {x} lies outside [0, 1]")));
        }
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
