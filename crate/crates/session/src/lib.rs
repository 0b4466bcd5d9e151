//! Batch runner and interactive session service for `freedrag-core`.
//!
//! The CLI writes traces, renders and reports to disk; the HTTP service
//! keeps one worker thread per editing session and exposes it as JSON.

pub mod api;
pub mod artifacts;
pub mod batch;
pub mod error;
pub mod session;
pub mod worker;

pub use error::{Result, SessionError};
pub use session::{Session, SessionRecord, StepOutcome};
pub use worker::{Registry, SessionHandle};
