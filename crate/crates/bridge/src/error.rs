use std::io;

use teleop_otg_core::Error as CoreError;

/// Failures of the bridge layer.
#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: line {line}, column {column}: {message}")]
    Urdf { path: String, line: u32, column: u32, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("dof mismatch: config has {expected} joints, input has {found}")]
    DofMismatch { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("websocket: {0}")]
    WebSocket(Box<tungstenite::Error>),
}

impl From<tungstenite::Error> for BridgeError {
    fn from(e: tungstenite::Error) -> Self {
        BridgeError::WebSocket(Box::new(e))
    }
}

impl BridgeError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        BridgeError::Io { context: context.into(), source }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BridgeError::Core(CoreError::ChainResolution(_)) => 2,
            BridgeError::DofMismatch { .. } | BridgeError::Core(CoreError::DimensionMismatch { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BridgeError>;
