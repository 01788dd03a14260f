use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("factor `{factor}` value {value} matches none of its levels")]
    ValueNotALevel { factor: String, value: f64 },

    #[error("invalid factor spec `{name}`: {reason}")]
    InvalidFactor { name: String, reason: String },

    #[error("invalid run count {n_runs} for {n_factors} factors: must be a power of two and at least factors + 1")]
    InvalidRunCount { n_runs: usize, n_factors: usize },

    #[error("invalid run `{run_id}`: {reason}")]
    InvalidRun { run_id: String, reason: String },

    #[error("degenerate geometry for run `{run_id}`: {reason}")]
    DegenerateGeometry { run_id: String, reason: String },

    #[error("position {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("normal equations are not positive definite")]
    SingularSystem,

    #[error("design has rank {rank}, at least {required} independent runs are needed")]
    RankDeficientDesign { rank: usize, required: usize },

    #[error("coded level {value} of factor {factor} lies outside [-1, 1]")]
    ExtrapolationRefused { factor: usize, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("run id mismatch at position {index}: `{expected}` vs `{found}`")]
    RunIdMismatch {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical algorithms themselves, as opposed
    /// to bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry { .. }
                | Error::SingularSystem
                | Error::RankDeficientDesign { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
