use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: {what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schema error: missing required column `{column}`")]
    MissingColumn { column: String },
    #[error("parse error at row {row}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },
    #[error("propensity {value} at index {index} is outside the open interval (0, 1)")]
    PropensityDomain { index: usize, value: f64 },
    #[error("could not reach target treated fraction {target} (closest mean {achieved})")]
    Bisection { target: f64, achieved: f64 },
    #[error("normal equations are rank deficient; use a ridge penalty lambda > 0")]
    RankDeficient,
    #[error("training set is empty or carries zero total weight")]
    EmptyTrainingSet,
    #[error("treatment labels contain a single class; both 0 and 1 are required")]
    DegenerateLabels,
    #[error("the {arm} arm is empty")]
    DegenerateArm { arm: &'static str },
    #[error("no split with both arms in each half after {attempts} attempts")]
    DegenerateSplit { attempts: usize },
    #[error("propensity window of half-width {window} leaves the {arm} arm empty")]
    InsufficientWindowData { window: f64, arm: &'static str },
    #[error("no propensity stratum contains both treated and control rows")]
    NoOverlap,
    #[error("correlation undefined for a constant input")]
    UndefinedCorrelation,
    #[error("empty input")]
    EmptyInput,
    #[error("enumeration over 2^{n} assignments exceeds the limit of n = {max}")]
    CostGuard { n: usize, max: usize },
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input files or configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn { .. }
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Config(_)
                | Error::UnknownEstimator(_)
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            found,
        })
    }
}
