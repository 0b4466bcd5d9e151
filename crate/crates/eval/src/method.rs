use serde::{Deserialize, Serialize};

use freedrag_baseline::{PointDrag, TrackConfig, TrackState};
use freedrag_core::drag::{DragState, FreeDrag, RunStatus};
use freedrag_core::{
    AnyBackend, ConfigOverrides, DragMethod, DragTrace, Instruction, LatentCode, Point2, Result,
    Scalar,
};

/// Either built-in method over a runtime-chosen backend.
#[derive(Debug, Clone)]
pub enum AnyMethod<S> {
    FreeDrag(FreeDrag<S, AnyBackend<S>>),
    PointDrag(PointDrag<S, AnyBackend<S>>),
}

/// Serializable state of an [`AnyMethod`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "state", rename_all = "snake_case")]
pub enum MethodState<S> {
    #[serde(rename = "freedrag")]
    FreeDrag(DragState<S>),
    #[serde(rename = "pointdrag")]
    PointDrag(TrackState<S>),
}

impl<S: Scalar> AnyMethod<S> {
    pub fn state(&self) -> MethodState<S> {
        match self {
            AnyMethod::FreeDrag(m) => MethodState::FreeDrag(m.state().clone()),
            AnyMethod::PointDrag(m) => MethodState::PointDrag(m.state()),
        }
    }

    /// Rebuilds a method from a saved state and the instruction's config.
    pub fn restore(
        inst: &Instruction,
        extra: &ConfigOverrides,
        state: MethodState<S>,
    ) -> Result<Self> {
        let backend: AnyBackend<S> = inst.backend.build()?;
        Ok(match state {
            MethodState::FreeDrag(s) => {
                AnyMethod::FreeDrag(FreeDrag::from_state(backend, inst.drag_config(extra)?, s)?)
            }
            MethodState::PointDrag(s) => AnyMethod::PointDrag(PointDrag::from_state(
                backend,
                TrackConfig::for_instruction(inst, extra)?,
                s,
            )?),
        })
    }

    fn inner(&self) -> &dyn DragMethod<S> {
        match self {
            AnyMethod::FreeDrag(m) => m,
            AnyMethod::PointDrag(m) => m,
        }
    }
}

impl<S: Scalar> DragMethod<S> for AnyMethod<S> {
    fn step(&mut self) -> Result<RunStatus> {
        match self {
            AnyMethod::FreeDrag(m) => m.step(),
            AnyMethod::PointDrag(m) => m.step(),
        }
    }

    fn status(&self) -> RunStatus {
        self.inner().status()
    }

    fn trace(&self) -> &DragTrace<S> {
        self.inner().trace()
    }

    fn latent(&self) -> &LatentCode<S> {
        self.inner().latent()
    }

    fn handles(&self) -> Vec<Point2<S>> {
        self.inner().handles()
    }

    fn substeps_used(&self) -> usize {
        self.inner().substeps_used()
    }
}
