use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of model construction and of the exact and sampling engines.
///
/// Two variants deserve branching on: `Resonance` marks parameter
/// combinations where the averaged evolution genuinely degenerates (the
/// resolvent of the averaged step touches the unit circle, fluctuations
/// diverge), while `NumericalHealth` marks internal consistency checks that
/// must never fire on healthy input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("matrix not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("initial state not normalized (norm off by {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("empty accessible space: every spectral weight fell below the floor")]
    EmptyAccessibleSpace,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resonance: {detail}")]
    Resonance {
        detail: String,
        /// Reciprocal condition estimate of the offending solve, when one was
        /// formed before the failure was detected.
        rcond: Option<f64>,
    },

    #[error("numerical health check failed: {0}")]
    NumericalHealth(String),

    #[error("winding undefined: {0}")]
    UndefinedWinding(String),

    #[error("grid under-resolved: {0}")]
    UnderResolvedGrid(String),

    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
