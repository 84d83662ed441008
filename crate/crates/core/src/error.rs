use thiserror::Error;

/// Errors produced by the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no sources")]
    NoSources,
    #[error("invalid speed: {0}")]
    InvalidSpeed(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid speed model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("CFL condition violated: dt * c_max / h = {ratio:.4} exceeds {limit:.4}")]
    Cfl { ratio: f64, limit: f64 },
    #[error("non-finite wave field detected at step {step}")]
    NonFinite { step: usize },
    #[error("forward solve for column {column} failed: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("insufficient epsilon samples: need at least {need}, got {got}")]
    InsufficientEpsilon { need: usize, got: usize },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical kernels (CFL, blow-up).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Cfl { .. } | Error::NonFinite { .. } => true,
            Error::Column { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
