use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite after jitter ({context})")]
    NotPositiveDefinite { context: String },

    #[error("correlation matrix is singular: locations {0} and {1} coincide and the nugget is zero")]
    CoincidentLocations(usize, usize),

    #[error("likelihood evaluation failed at theta = {theta:?}: {reason}")]
    Likelihood { theta: Vec<f64>, reason: String },

    #[error("aggregation matrix H must have full row rank (rank m for an m x n matrix): {0}")]
    RankDeficient(String),

    #[error("too few effective points: {0}")]
    TooFewPoints(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("all importance weights are zero in iteration {iteration}: {failures} of {n} evaluations failed")]
    AllWeightsZero {
        iteration: usize,
        n: usize,
        failures: usize,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("simulation draw {draw}: {source}")]
    Draw {
        draw: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable short name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::CoincidentLocations(..) => "coincident_locations",
            Error::Likelihood { .. } => "likelihood",
            Error::RankDeficient(_) => "rank_deficient",
            Error::TooFewPoints(_) => "too_few_points",
            Error::Degenerate(_) => "degenerate",
            Error::AllWeightsZero { .. } => "all_weights_zero",
            Error::Iteration { source, .. } | Error::Draw { source, .. } => source.kind(),
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
