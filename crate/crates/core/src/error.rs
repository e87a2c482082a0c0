use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: String,
        found: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("non-finite gradient for nonconvex constraint {constraint} at step {step}")]
    NonFiniteGradient { constraint: usize, step: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("innovation covariance is singular at step {step}, particle {particle}")]
    SingularInnovation { step: usize, particle: usize },

    #[error(
        "all particle weights underflowed at step {step}; increase the measurement covariance (smaller Q, larger F scaling)"
    )]
    WeightUnderflow { step: usize },

    #[error("cluster {cluster} has zero total weight at step {step}")]
    ZeroClusterWeight { cluster: usize, step: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown scenario preset `{0}`")]
    UnknownScenario(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn dim(field: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            field: field.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
