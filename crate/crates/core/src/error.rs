use thiserror::Error;

/// Failure signals raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// H = 1/2 has no c_H; callers must take the Brownian fast path.
    #[error("degenerate kernel: H = 1/2 has no normalization constant")]
    DegenerateKernel,

    #[error("boundary singularity: kernel evaluated at s = {s}")]
    BoundarySingularity { s: f64 },

    #[error("quadrature failed to reach tolerance {requested:e} (achieved {achieved:e})")]
    QuadFailure { requested: f64, achieved: f64 },

    #[error("kernel degenerate: {0}")]
    KernelDegenerate(String),

    #[error("local determinism at extension step {step}: lambda = {lambda:e}")]
    LocalDeterminism { step: usize, lambda: f64 },

    #[error("kernel discretization failure: {0}")]
    KernelDiscretization(String),

    #[error("transform singular: diagonal entry {index} is {value:e}")]
    TransformSingular { index: usize, value: f64 },

    #[error("cholesky factorization failed: matrix not positive definite")]
    Cholesky,

    #[error("novikov partition: step {step} integrates to {mass:e} > cap {cap:e}")]
    StepExceedsCap { step: usize, mass: f64, cap: f64 },

    #[error("separator degenerate: rank-deficient regression design ({0})")]
    SeparatorDegenerate(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("graph: {0}")]
    Graph(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
