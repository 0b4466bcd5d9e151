//! The feature-dragging loop: drag loss toward adaptive templates, line
//! search along the handle→target segment with backtracking, and per-point
//! termination.

mod config;
mod engine;
pub mod loss;
pub mod search;
pub mod template;

use serde::{Deserialize, Serialize};

use crate::field::{FeatureVector, Point2};

pub use config::{DragConfig, BLOB_LEARNING_RATE, DIRECT_LEARNING_RATE};
pub use engine::{DragState, FreeDrag};
pub use loss::{drag_loss, mask_loss, total_loss, LossTerms};
pub use search::{candidate_set, localize, next_position, select_case};
pub use template::{calibrate, lambda_coeff, update_template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Active,
    Terminated,
}

/// One handle/target pair and its evolving drag state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragPoint<S> {
    pub origin: Point2<S>,
    pub target: Point2<S>,
    pub current: Point2<S>,
    pub template: FeatureVector<S>,
    /// Template discrepancy right after `current` was chosen.
    pub l_in: S,
    /// Template discrepancy after the last substep of the drag.
    pub l_en: S,
    pub lambda: S,
    pub status: PointStatus,
}

/// Lifecycle of a drag run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Converged,
    StepBudgetExhausted,
    Diverged,
}

impl RunStatus {
    pub fn is_finished(self) -> bool {
        self != RunStatus::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Converged => "converged",
            RunStatus::StepBudgetExhausted => "step_budget_exhausted",
            RunStatus::Diverged => "diverged",
        }
    }
}
