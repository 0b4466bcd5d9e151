use freedrag_core::{DragError, RunStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("session already finished with status {}", .0.as_str())]
    Finished(RunStatus),
    #[error("session worker is gone")]
    WorkerGone,
    #[error(transparent)]
    Engine(#[from] DragError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

pub type Result<T> = std::result::Result<T, SessionError>;
