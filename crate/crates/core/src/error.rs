use crate::popgen::PostStratumKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty population")]
    EmptyPopulation,

    #[error("empty sample: no blocks selected")]
    EmptySample,

    #[error("evaluation subsample is empty")]
    EmptySubsample,

    #[error("degenerate table for stratum {stratum}: c1 = {c1}")]
    DegenerateTable { stratum: String, c1: f64 },

    #[error("stratum {stratum} still has c1 = {c1} below the threshold {min_c1} after full collapse")]
    Uncollapsible {
        stratum: PostStratumKey,
        c1: f64,
        min_c1: f64,
    },

    #[error("unresolved cases remain in stratum {0}; run imputation first")]
    UnresolvedCases(PostStratumKey),

    #[error("no resolved cases available to impute from")]
    NoResolvedCases,

    #[error("stratum {0} is not part of the post-stratification scheme")]
    UnknownStratum(PostStratumKey),

    #[error("no adjustment factor for stratum {0}")]
    MissingFactor(PostStratumKey),

    #[error("census count is zero for stratum {0}")]
    ZeroCensusCount(PostStratumKey),

    #[error("true counts are required (simulation mode)")]
    MissingTruth,

    #[error("demographic analysis has national scope only; {0} was requested")]
    GeographicScope(String),

    #[error("match results cover different cases: {0}")]
    CaseMismatch(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot grow a sample: {needed} groups needed but only {supported} supported")]
    ScaleUp { needed: u64, supported: u64 },

    #[error("column `{column}`: {message}")]
    Schema { column: String, message: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            column: column.into(),
            message: message.into(),
        }
    }
}
