//! Append-only per-drag log shared by both drag methods.

use serde::{Deserialize, Serialize};

use crate::field::Point2;
use crate::scalar::Scalar;

/// How the next handle position was chosen at the end of a drag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Drag was good: move on along the line.
    Advance,
    /// Drag was insufficient: optimize toward the same point again.
    Freeze,
    /// Drag went wrong: search backwards over a doubled window.
    Fallback,
    /// The point reached its target and stopped.
    Terminated,
    /// Point-tracking baseline iteration.
    Track,
}

impl Case {
    pub fn as_str(self) -> &'static str {
        match self {
            Case::Advance => "advance",
            Case::Freeze => "freeze",
            Case::Fallback => "fallback",
            Case::Terminated => "terminated",
            Case::Track => "track",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "advance" => Case::Advance,
            "freeze" => Case::Freeze,
            "fallback" => Case::Fallback,
            "terminated" => Case::Terminated,
            "track" => Case::Track,
            _ => return None,
        })
    }
}

/// One point's outcome for one drag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragRecord<S> {
    /// Drag index, starting at 1.
    pub k: usize,
    pub point_index: usize,
    /// Position optimized toward during this drag.
    pub h: Point2<S>,
    pub l_in: S,
    pub l_en: S,
    pub lambda: S,
    pub case: Case,
    /// Total loss after the last substep of the drag.
    pub loss: S,
    /// Gradient substeps spent in this drag.
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DragTrace<S> {
    pub records: Vec<DragRecord<S>>,
    /// Total loss after every substep, in order.
    pub substep_losses: Vec<S>,
}

impl<S: Scalar> DragTrace<S> {
    pub fn new() -> Self {
        DragTrace {
            records: Vec::new(),
            substep_losses: Vec::new(),
        }
    }

    pub fn push(&mut self, rec: DragRecord<S>) {
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_substeps(&self) -> usize {
        self.substep_losses.len()
    }

    pub fn count_case(&self, case: Case) -> usize {
        self.records.iter().filter(|r| r.case == case).count()
    }

    /// Handle trajectory of one point, drag by drag.
    pub fn trajectory(&self, point_index: usize) -> Vec<Point2<S>> {
        self.records
            .iter()
            .filter(|r| r.point_index == point_index)
            .map(|r| r.h)
            .collect()
    }

    pub fn to_f64(&self) -> DragTrace<f64> {
        DragTrace {
            records: self
                .records
                .iter()
                .map(|r| DragRecord {
                    k: r.k,
                    point_index: r.point_index,
                    h: r.h.cast(),
                    l_in: r.l_in.as_f64(),
                    l_en: r.l_en.as_f64(),
                    lambda: r.lambda.as_f64(),
                    case: r.case,
                    loss: r.loss.as_f64(),
                    substeps: r.substeps,
                })
                .collect(),
            substep_losses: self.substep_losses.iter().map(|v| v.as_f64()).collect(),
        }
    }
}
