use thiserror::Error;

pub type Result<T> = std::result::Result<T, AsrcError>;

#[derive(Debug, Error)]
pub enum AsrcError {
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("operator is not positive definite (curvature {curvature:.3e} in column {column})")]
    NotPositiveDefinite { column: usize, curvature: f64 },
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("node {0} has zero degree")]
    IsolatedNode(usize),
    #[error("edge set carries no positive weight")]
    EmptyGraph,
    #[error("label arrays differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("the adagae variant needs n_clusters")]
    MissingClusterCount,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AsrcError {
    /// Failures that come from the numerical core rather than from inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            AsrcError::NonConvergence { .. }
                | AsrcError::NotPositiveDefinite { .. }
                | AsrcError::NonFiniteLoss(_)
                | AsrcError::IsolatedNode(_)
                | AsrcError::EmptyGraph
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` expects {expected}, got `{value}`")]
    TypeError {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("line {0}: expected key=value")]
    Syntax(usize),
}
