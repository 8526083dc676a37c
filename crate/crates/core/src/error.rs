use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("command ({vx}, {vy}) outside the controller envelope")]
    CommandOutOfEnvelope { vx: f64, vy: f64 },

    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),

    #[error("not enough valid samples: have {have}, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("design matrix is rank deficient (insufficient excitation in the data)")]
    RankDeficient,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("point ({x:.3}, {y:.3}) is outside the map")]
    OutOfMap { x: f64, y: f64 },

    #[error("point ({x:.3}, {y:.3}) lies on a void cell")]
    VoidCell { x: f64, y: f64 },

    #[error("parse error{}: {message}", .column.as_ref().map(|c| format!(" in column `{c}`")).unwrap_or_default())]
    Parse {
        column: Option<String>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(message: impl Into<String>) -> Self {
        Error::Parse {
            column: None,
            message: message.into(),
        }
    }

    pub(crate) fn parse_column(column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            column: Some(column.into()),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
