use thiserror::Error;

use crate::trace::DragTrace;

#[derive(Debug, Error)]
pub enum DragError {
    /// A caller broke an operation's precondition (shape, length, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Loss or gradient became non-finite. The trace up to the failure is kept.
    #[error("optimization diverged at substep {substep}")]
    Diverged {
        substep: usize,
        trace: Box<DragTrace<f64>>,
    },
}

impl DragError {
    pub fn contract(msg: impl Into<String>) -> Self {
        DragError::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, DragError>;
