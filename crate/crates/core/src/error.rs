use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: field `{field}`: {message}")]
    InvalidField {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate key (question_id={question_id}, condition={condition}, format={format})")]
    DuplicateKey {
        line: usize,
        question_id: String,
        condition: String,
        format: String,
    },
    #[error("line {line}: non-finite confidence (nlp)")]
    NonFiniteConfidence { line: usize },
    #[error("empty trial set")]
    EmptySet,
    #[error("too few trials: {n} < {min}")]
    TooFewTrials { n: usize, min: usize },
    #[error("n_ratings must be >= 2, got {0}")]
    InvalidScale(usize),
    #[error("count table is already padded")]
    AlreadyPadded,
    #[error("bin {bin} outside 1..={n_bins}")]
    BinOutOfRange { bin: usize, n_bins: usize },
    #[error("probability {0} outside (0, 1)")]
    OutOfDomain(f64),
    #[error("d' is zero; M-ratio and meta-d' are undefined")]
    ZeroDPrime,
    #[error("only one correctness class present")]
    OneClassOnly,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance input; rank correlation undefined")]
    ZeroVariance,
    #[error("profiles mix (condition, format) groups")]
    MixedProfileSet,
    #[error("domain sets differ: {0}")]
    DomainMismatch(String),
    #[error("trial sets are not paired on question_id ({missing} missing, {extra} extra)")]
    UnpairedSets { missing: usize, extra: usize },
    #[error("trials span multiple domains: {0}")]
    MultipleDomains(String),
    #[error("{degenerate} of {total} resamples undefined; no interval available")]
    TooManyDegenerate { degenerate: usize, total: usize },
    #[error("TOST requires a 90% interval, got {0}")]
    WrongCiLevel(f64),
    #[error("no trials for condition {condition} in domain {domain}")]
    MissingCondition { condition: String, domain: String },
    #[error("unsupported generative family for this oracle: {0}")]
    UnsupportedFamily(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("config: {0}")]
    Config(String),
    #[error("incomplete input: {0}")]
    IncompleteInput(String),
    #[error("nothing to plot")]
    EmptyInput,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this is a data-quality problem (as opposed to config or numerics).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MissingField { .. }
                | Error::InvalidField { .. }
                | Error::Malformed { .. }
                | Error::DuplicateKey { .. }
                | Error::NonFiniteConfidence { .. }
                | Error::EmptySet
                | Error::TooFewTrials { .. }
                | Error::OneClassOnly
                | Error::UnpairedSets { .. }
                | Error::MultipleDomains(_)
                | Error::MissingCondition { .. }
                | Error::DomainMismatch(_)
        )
    }

    /// Process exit status: 1 data, 2 config, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        if self.is_data_error() {
            1
        } else if matches!(
            self,
            Error::Config(_)
                | Error::InvalidConfig(_)
                | Error::WrongCiLevel(_)
                | Error::UnknownMetric(_)
                | Error::InvalidScale(_)
                | Error::UnsupportedFamily(_)
        ) {
            2
        } else {
            3
        }
    }
}
