use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("inner Woodbury system is numerically singular")]
    Singular,

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("normal vector of a half-space or hyperplane is zero")]
    ZeroNormal,

    #[error("box is empty: lower[{index}] = {lower} > upper[{index}] = {upper}")]
    EmptyBox { index: usize, lower: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies outside the domain of the {generator} generator: {detail}")]
    DomainViolation {
        generator: &'static str,
        detail: String,
    },

    #[error("the one-dimensional projection problem has no finite minimizer")]
    NoFiniteMinimizer,

    #[error("Bregman projection did not converge: residual {residual:.3e} after {iterations} iterations")]
    ProjectionNotConverged { residual: f64, iterations: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("line search failed after {backtracks} backtracking steps")]
    LineSearchFailed { backtracks: usize },

    #[error("regions do not partition the voxels: {0}")]
    PartitionError(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(generator: &'static str, detail: impl Into<String>) -> Self {
        Error::DomainViolation {
            generator,
            detail: detail.into(),
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
