use thiserror::Error;

/// Errors raised by the numerical kernels, solvers and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has no nonzero entry")]
    ZeroVector,
    #[error("negative entry {value} at index {index} is not allowed by the sqrt-L1 map")]
    NegativeEntry { index: usize, value: f64 },
    #[error("vector norm {norm} is not 1 (no sphere map was requested)")]
    NotUnit { norm: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension {n} is too small (need at least {min})")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("Gegenbauer order must be positive, got {0}")]
    InvalidOrder(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("series did not meet its stopping rule before degree {l_max}")]
    TruncationExceeded { l_max: usize },
    #[error("grid with {points} points is too coarse (need at least {min})")]
    GridTooCoarse { points: usize, min: usize },
    #[error("radius {r} is outside the domain of the parametrix coefficient")]
    OutOfDomain { r: f64 },
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),
    #[error("matrix of size {m} exceeds the dense eigensolver limit {max}")]
    MatrixTooLarge { m: usize, max: usize },
    #[error("kernel evaluation failed for pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("fewer than {min} walkers ({got})")]
    TooFewWalkers { got: usize, min: usize },
    #[error(transparent)]
    Svm(#[from] crate::svm::SvmError),
    #[error(transparent)]
    Data(#[from] crate::experiments::DataError),
}

pub type Result<T> = std::result::Result<T, Error>;
