use thiserror::Error;

use crate::grid::Kind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2×2 cells, got {nx}×{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("{kind}({i}, {j}) is outside the grid")]
    OutOfRange { kind: Kind, i: usize, j: usize },
    #[error("flat index {flat} out of range (N = {n})")]
    FlatOutOfRange { flat: usize, n: usize },
    #[error("invalid parameter (Re = {re}, nu = {nu}); Re must be positive")]
    InvalidParameter { re: f64, nu: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("time step {index} failed: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<SolveError>,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResidualError {
    #[error("unsteady residual needs the previous time level")]
    MissingPrevious,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("functional descriptor does not match the evaluation mode")]
    ModeMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RomError {
    #[error("collocated least-squares system is rank deficient (rank {rank} < {n})")]
    RankDeficient { rank: usize, n: usize },
    #[error("extension rejected: interpolatory residual max |value| = {max:e} is below the degeneracy threshold")]
    Degenerate { max: f64 },
    #[error("no eligible collocation points remain")]
    NoEligiblePoints,
    #[error("model mode {model} cannot be used for {requested}")]
    WrongMode {
        model: &'static str,
        requested: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("online solve failed at time index {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<RomError>,
    },
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {major}.{minor}")]
    UnsupportedVersion { major: u32, minor: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("malformed csv at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
