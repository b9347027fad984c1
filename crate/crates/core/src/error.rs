use std::path::PathBuf;

/// Errors raised anywhere in the crate.
///
/// Variants fall into two families that the CLI maps to different exit
/// codes: input/validation problems and numerical failures
/// (see [`Error::is_numerical`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}:{line}: column `{column}`: {message}", file.display())]
    Input {
        file: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{}: {message}", file.display())]
    Schema { file: PathBuf, message: String },

    #[error("unknown unit id `{0}`")]
    UnknownUnit(String),

    #[error("self-edge on unit `{0}`")]
    SelfEdge(String),

    #[error("duplicate unit id `{0}`")]
    DuplicateUnit(String),

    #[error("invalid polygon for unit `{unit}`: {message}")]
    InvalidPolygon { unit: String, message: String },

    #[error("partition has no polygons")]
    MissingPolygons,

    #[error("weights matrix has no edges")]
    EdgelessGraph,

    #[error("zero variance")]
    ZeroVariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative value in {0}")]
    NegativeValue(&'static str),

    #[error("night counts exceed all counts at unit index {0}")]
    NightExceedsAll(usize),

    #[error("lag unavailable for target week {0}")]
    LagUnavailable(u32),

    #[error("week {week} outside panel range 1..={n_weeks}")]
    WeekOutOfRange { week: u32, n_weeks: u32 },

    #[error("rank deficient design: collinear columns {0:?}")]
    RankDeficient(Vec<String>),

    #[error("response must contain non-negative integers (row {0})")]
    InvalidCounts(usize),

    #[error("{model} did not converge after {iterations} iterations")]
    Divergence { model: &'static str, iterations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("window with target week {week}: {source}")]
    Window { week: u32, source: Box<Error> },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    /// True for failures of an estimator or solver, false for bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient(_)
            | Error::Divergence { .. }
            | Error::Numerical(_)
            | Error::ZeroVariance
            | Error::EdgelessGraph => true,
            Error::Window { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
