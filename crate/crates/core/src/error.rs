use thiserror::Error;

/// Errors raised by the core library.
///
/// Kernel and model validation errors carry the offending data so callers
/// (the CLI in particular) can print a useful diagnostic.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("SymmetryViolation: p({offset:?}) = {weight} but p({image:?}) = {image_weight}")]
    SymmetryViolation {
        offset: Vec<i64>,
        weight: String,
        image: Vec<i64>,
        image_weight: String,
    },

    #[error("ReducibleKernel: support generates a proper sublattice of Z^{dim}")]
    ReducibleKernel { dim: usize },

    #[error("ZeroAtOriginViolation: p(0) = {0}")]
    ZeroAtOriginViolation(String),

    #[error("EmptySupport: kernel has no positive weight")]
    EmptySupport,

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid torus: {0}")]
    InvalidTorus(String),

    #[error("OutOfSupport: {0}")]
    OutOfSupport(String),

    #[error("NoConsistentConvention: {0}")]
    NoConsistentConvention(String),

    #[error("TruncationTooSmall: tail bound {tail:e} at n_max = {n_max} exceeds {tolerance:e}")]
    TruncationTooSmall { n_max: usize, tail: f64, tolerance: f64 },

    #[error("TableOverflow: {0}")]
    TableOverflow(String),

    #[error("StateTooLarge: {states} states exceeds the limit {limit}")]
    StateTooLarge { states: usize, limit: usize },

    #[error("InadmissibleMove: {0}")]
    InadmissibleMove(String),

    #[error("GridBeyondHorizon: grid point {point} > horizon {horizon}")]
    GridBeyondHorizon { point: f64, horizon: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
