use crate::drag::RunStatus;
use crate::error::Result;
use crate::field::{LatentCode, Point2};
use crate::scalar::Scalar;
use crate::trace::DragTrace;

/// Stepping interface shared by the feature-dragging engine and the
/// point-tracking baseline.
pub trait DragMethod<S: Scalar> {
    /// Advances by one drag (one localization plus its substeps, or one
    /// supervision/tracking cycle for the baseline).
    fn step(&mut self) -> Result<RunStatus>;

    fn status(&self) -> RunStatus;

    fn trace(&self) -> &DragTrace<S>;

    fn latent(&self) -> &LatentCode<S>;

    /// Current handle position of every point.
    fn handles(&self) -> Vec<Point2<S>>;

    fn substeps_used(&self) -> usize;

    fn run(&mut self) -> Result<RunStatus> {
        loop {
            let s = self.step()?;
            if s.is_finished() {
                return Ok(s);
            }
        }
    }
}
