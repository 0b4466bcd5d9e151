use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::scalar::Scalar;

/// Hyperparameters of the feature-dragging loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragConfig<S> {
    /// Target feature discrepancy when placing the next handle position.
    pub l: S,
    /// Maximum single movement distance, px.
    pub d: S,
    /// Patch radius of the feature aggregate.
    pub r: i64,
    /// Mask-loss weight.
    pub gamma: S,
    /// Upper bound on the template update coefficient.
    pub lambda_cap: S,
    pub steps_per_drag: usize,
    pub max_total_steps: usize,
    pub learning_rate: S,
    /// A point stops once its handle is this close to the target, px.
    pub terminate_dist: S,
    /// Ablation switch: `false` pins the update coefficient to zero.
    pub update_template: bool,
    /// Ablation switch: `false` always advances (no freeze / fallback).
    pub backtracking: bool,
}

/// Default gradient-descent rate for the blob backend.
pub const BLOB_LEARNING_RATE: f64 = 5.1;
/// Default gradient-descent rate for the direct-field backend.
pub const DIRECT_LEARNING_RATE: f64 = 0.01;

impl<S: Scalar> DragConfig<S> {
    /// `l = 0.3, d = 3`, for most content.
    pub fn preset_a() -> Self {
        DragConfig {
            l: S::lit(0.3),
            d: S::lit(3.0),
            r: 3,
            gamma: S::lit(10.0),
            lambda_cap: S::lit(0.8),
            steps_per_drag: 5,
            max_total_steps: 300,
            learning_rate: S::lit(BLOB_LEARNING_RATE),
            terminate_dist: S::lit(2.0),
            update_template: true,
            backtracking: true,
        }
    }

    /// `l = 0.4, d = 4`, for content that moves further per step.
    pub fn preset_b() -> Self {
        DragConfig {
            l: S::lit(0.4),
            d: S::lit(4.0),
            ..Self::preset_a()
        }
    }

    pub fn with_ld(mut self, l: f64, d: f64) -> Self {
        self.l = S::lit(l);
        self.d = S::lit(d);
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = S::lit(lr);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(DragError::contract(format!("invalid drag config: {what}")));
        let pos = |v: S| v.is_finite() && v > S::zero();
        if !pos(self.l) {
            return bad("l must be > 0");
        }
        if !pos(self.d) {
            return bad("d must be > 0");
        }
        if self.r < 0 {
            return bad("r must be >= 0");
        }
        if !(self.gamma.is_finite() && self.gamma >= S::zero()) {
            return bad("gamma must be >= 0");
        }
        if !(pos(self.lambda_cap) && self.lambda_cap <= S::one()) {
            return bad("lambda_cap must lie in (0, 1]");
        }
        if self.steps_per_drag < 1 {
            return bad("steps_per_drag must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= S::zero()) {
            return bad("learning_rate must be >= 0");
        }
        if !pos(self.terminate_dist) {
            return bad("terminate_dist must be > 0");
        }
        Ok(())
    }
}

impl<S: Scalar> Default for DragConfig<S> {
    fn default() -> Self {
        Self::preset_a()
    }
}
