use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error(
        "sample covariance is singular (smallest eigenvalue {min_eig:e}, largest {max_eig:e})"
    )]
    SingularCovariance { min_eig: f64, max_eig: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("neighborhood size k = {k} too large for {n} points")]
    KTooLarge { k: usize, n: usize },

    #[error("point index {index} out of range ({len} points)")]
    BadIndex { index: usize, len: usize },

    #[error("kernel construction set is empty")]
    EmptyKcs,

    #[error("KCS covariance is not positive definite (ridge {ridge:e})")]
    SingularSigma { ridge: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("inconsistent marginals: variable `{variable}` sums to {sum}, expected total {total}")]
    InconsistentMarginals {
        variable: String,
        sum: u64,
        total: u64,
    },

    #[error("bias-corrected synthesis stalled after {iterations} iterations with {produced}/{target} points")]
    StallLimit {
        iterations: usize,
        produced: usize,
        target: usize,
        /// Points accepted before giving up, in original units.
        partial: crate::PointSet,
        /// Per-variable, per-bin deficits `F_b - |Y_b|` at the time of the stall.
        deficits: Vec<Vec<i64>>,
    },

    #[error("data is empty")]
    EmptyData,

    #[error("degenerate variance: both standard deviations are zero")]
    DegenerateVariance,

    #[error("density is zero at the study point")]
    ZeroDensity,

    #[error("rejection sampler stalled: acceptance rate {rate:e} below {min:e}")]
    RejectionStall { rate: f64, min: f64 },

    #[error("invalid spec: {0}")]
    BadSpec(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short variant name used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::SingularCovariance { .. } => "SingularCovariance",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::BadIndex { .. } => "BadIndex",
            Error::EmptyKcs => "EmptyKcs",
            Error::SingularSigma { .. } => "SingularSigma",
            Error::EmptySample => "EmptySample",
            Error::BadParams(_) => "BadParams",
            Error::InconsistentMarginals { .. } => "InconsistentMarginals",
            Error::StallLimit { .. } => "StallLimit",
            Error::EmptyData => "EmptyData",
            Error::DegenerateVariance => "DegenerateVariance",
            Error::ZeroDensity => "ZeroDensity",
            Error::RejectionStall { .. } => "RejectionStall",
            Error::BadSpec(_) => "BadSpec",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
        }
    }
}
