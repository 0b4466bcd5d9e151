//! A single interactive editing session and its persisted form.

use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use freedrag_core::instruction::{ConfigOverrides, PointPair, RleMask, SCHEMA_VERSION};
use freedrag_core::{
    DragError, DragMethod, DragTrace, FeatureMap, GeneratorBackend, Instruction, LatentCode,
    RunStatus,
};
use freedrag_eval::metrics::start_method;
use freedrag_eval::{AnyMethod, MethodState};
use serde::{Deserialize, Serialize};

use crate::artifacts::{render_png, trace_rows, RenderScale, TraceRow};
use crate::error::{Result, SessionError};

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Orders snapshots of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SnapshotVersion {
    pub drag_index: usize,
    pub substep: usize,
}

/// Serializable session, enough to resume it elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub instruction: Instruction,
    /// Overrides layered on top of the instruction's own config.
    pub config: ConfigOverrides,
    pub version: SnapshotVersion,
    /// Latent the current run started from.
    pub start_latent: LatentCode<f64>,
    /// Absent until point pairs are set.
    pub state: Option<MethodState<f64>>,
    pub trace: DragTrace<f64>,
    pub created_at: f64,
    pub updated_at: f64,
}

/// Base64 PNG plus its gray-level scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderPayload {
    pub png_base64: String,
    pub scale: RenderScale,
}

impl RenderPayload {
    pub fn of(f: &FeatureMap<f64>) -> Result<Self> {
        let (png, scale) = render_png(f)?;
        Ok(RenderPayload {
            png_base64: STANDARD.encode(png),
            scale,
        })
    }
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub status: RunStatus,
    pub version: SnapshotVersion,
    /// Trace rows appended by this step.
    pub trace_delta: Vec<TraceRow>,
    pub handles: Vec<[f64; 2]>,
    pub render: RenderPayload,
}

/// Compact view returned by mutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub status: Option<RunStatus>,
    pub version: SnapshotVersion,
    pub points: Vec<PointPair>,
    pub handles: Vec<[f64; 2]>,
    pub render: RenderPayload,
}

pub struct Session {
    id: String,
    instruction: Instruction,
    config: ConfigOverrides,
    start_latent: LatentCode<f64>,
    method: Option<AnyMethod<f64>>,
    created_at: f64,
    updated_at: f64,
}

fn check_header(inst: &Instruction) -> Result<()> {
    if inst.schema_version != SCHEMA_VERSION {
        return Err(SessionError::BadRequest(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            inst.schema_version
        )));
    }
    Ok(())
}

fn bad(e: DragError) -> SessionError {
    match e {
        DragError::Contract(m) | DragError::Unsupported(m) => SessionError::BadRequest(m),
        other => SessionError::Engine(other),
    }
}

impl Session {
    /// New session on the instruction's backend. Points may be empty; they
    /// can be set later.
    pub fn create(id: String, instruction: Instruction, config: ConfigOverrides) -> Result<Self> {
        check_header(&instruction)?;
        let start_latent = instruction.backend.initial_latent::<f64>().map_err(bad)?;
        let t = now();
        let mut s = Session {
            id,
            instruction,
            config,
            start_latent,
            method: None,
            created_at: t,
            updated_at: t,
        };
        s.restart()?;
        Ok(s)
    }

    pub fn from_record(rec: SessionRecord) -> Result<Self> {
        check_header(&rec.instruction)?;
        let method = rec
            .state
            .map(|st| AnyMethod::restore(&rec.instruction, &rec.config, st))
            .transpose()
            .map_err(bad)?;
        Ok(Session {
            id: rec.session_id,
            instruction: rec.instruction,
            config: rec.config,
            start_latent: rec.start_latent,
            method,
            created_at: rec.created_at,
            updated_at: rec.updated_at,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn instruction(&self) -> &Instruction {
        &self.instruction
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.method.as_ref().map(|m| m.status())
    }

    pub fn version(&self) -> SnapshotVersion {
        match &self.method {
            Some(AnyMethod::FreeDrag(m)) => SnapshotVersion {
                drag_index: m.state().drag_index,
                substep: m.state().substep,
            },
            Some(AnyMethod::PointDrag(m)) => SnapshotVersion {
                drag_index: m.substeps_used(),
                substep: m.substeps_used(),
            },
            None => SnapshotVersion {
                drag_index: 0,
                substep: 0,
            },
        }
    }

    pub fn latent(&self) -> &LatentCode<f64> {
        self.method
            .as_ref()
            .map(|m| m.latent())
            .unwrap_or(&self.start_latent)
    }

    pub fn trace(&self) -> DragTrace<f64> {
        self.method
            .as_ref()
            .map(|m| m.trace().clone())
            .unwrap_or_default()
    }

    pub fn handles(&self) -> Vec<[f64; 2]> {
        self.method
            .as_ref()
            .map(|m| m.handles().iter().map(|p| [p.x, p.y]).collect())
            .unwrap_or_default()
    }

    pub fn features(&self) -> Result<FeatureMap<f64>> {
        let backend = self.instruction.backend.build::<f64>().map_err(bad)?;
        Ok(backend.generate(self.latent())?)
    }

    pub fn render(&self) -> Result<RenderPayload> {
        RenderPayload::of(&self.features()?)
    }

    /// (Re)starts the run from `start_latent` with the current points.
    fn restart(&mut self) -> Result<()> {
        self.method = if self.instruction.points.is_empty() {
            None
        } else {
            Some(
                start_method(&self.instruction, self.start_latent.clone(), &self.config)
                    .map_err(bad)?,
            )
        };
        self.updated_at = now();
        Ok(())
    }

    /// Replaces the point pairs (and optionally the mask). The new run
    /// starts from the current latent, so earlier edits are kept.
    pub fn set_points(&mut self, points: Vec<PointPair>, mask: Option<RleMask>) -> Result<()> {
        let mut next = self.instruction.clone();
        next.points = points;
        if mask.is_some() {
            next.mask = mask;
        }
        if !next.points.is_empty() {
            next.validate().map_err(bad)?;
        }
        let latent = self.latent().clone();
        let (old_inst, old_start) = (
            std::mem::replace(&mut self.instruction, next),
            std::mem::replace(&mut self.start_latent, latent),
        );
        if let Err(e) = self.restart() {
            self.instruction = old_inst;
            self.start_latent = old_start;
            return Err(e);
        }
        Ok(())
    }

    /// Back to the backend's initial latent, keeping the current points.
    pub fn reset(&mut self) -> Result<()> {
        self.start_latent = self
            .instruction
            .backend
            .initial_latent::<f64>()
            .map_err(bad)?;
        self.restart()
    }

    /// Advances one drag.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let method = self
            .method
            .as_mut()
            .ok_or_else(|| SessionError::BadRequest("no point pairs set".into()))?;
        if method.status().is_finished() {
            return Err(SessionError::Finished(method.status()));
        }
        let before = method.trace().len();
        let status = method.step()?;
        let delta = trace_rows(method.trace())[before..].to_vec();
        self.updated_at = now();
        Ok(StepOutcome {
            status,
            version: self.version(),
            trace_delta: delta,
            handles: self.handles(),
            render: self.render()?,
        })
    }

    pub fn summary(&self) -> Result<SessionSummary> {
        Ok(SessionSummary {
            session_id: self.id.clone(),
            status: self.status(),
            version: self.version(),
            points: self.instruction.points.clone(),
            handles: self.handles(),
            render: self.render()?,
        })
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            session_id: self.id.clone(),
            instruction: self.instruction.clone(),
            config: self.config.clone(),
            version: self.version(),
            start_latent: self.start_latent.clone(),
            state: self.method.as_ref().map(|m| m.state()),
            trace: self.trace(),
            created_at: self.created_at,
            updated_at: self.updated_at,
        }
    }
}
