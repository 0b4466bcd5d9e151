//! One OS thread per session. Handlers talk to it through a command channel
//! and await the reply, so sessions never share mutable state and a slow
//! step only blocks its own session.

use std::collections::HashMap;
use std::sync::{mpsc, Arc, Mutex};
use std::thread;

use freedrag_core::instruction::{ConfigOverrides, PointPair, RleMask};
use freedrag_core::Instruction;
use rand::Rng;
use tokio::sync::oneshot;

use crate::error::{Result, SessionError};
use crate::session::{Session, SessionRecord, SessionSummary, StepOutcome};

type Reply<T> = oneshot::Sender<Result<T>>;

enum Command {
    Summary(Reply<SessionSummary>),
    Snapshot(Reply<SessionRecord>),
    Step(Reply<StepOutcome>),
    SetPoints(Vec<PointPair>, Option<RleMask>, Reply<SessionSummary>),
    Reset(Reply<SessionSummary>),
}

fn serve(mut session: Session, rx: mpsc::Receiver<Command>) {
    // Send failures mean the requester went away; nothing to do.
    while let Ok(cmd) = rx.recv() {
        match cmd {
            Command::Summary(tx) => {
                let _ = tx.send(session.summary());
            }
            Command::Snapshot(tx) => {
                let _ = tx.send(Ok(session.record()));
            }
            Command::Step(tx) => {
                let _ = tx.send(session.step());
            }
            Command::SetPoints(points, mask, tx) => {
                let _ = tx.send(
                    session
                        .set_points(points, mask)
                        .and_then(|_| session.summary()),
                );
            }
            Command::Reset(tx) => {
                let _ = tx.send(session.reset().and_then(|_| session.summary()));
            }
        }
    }
}

/// Cheap, cloneable handle to a session's worker.
#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Command>,
}

impl SessionHandle {
    pub fn spawn(session: Session) -> Self {
        let (tx, rx) = mpsc::channel();
        let name = format!("session-{}", session.id());
        thread::Builder::new()
            .name(name)
            .spawn(move || serve(session, rx))
            .expect("spawn session worker");
        SessionHandle { tx }
    }

    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T> {
        let (tx, rx) = oneshot::channel();
        self.tx
            .send(make(tx))
            .map_err(|_| SessionError::WorkerGone)?;
        rx.await.map_err(|_| SessionError::WorkerGone)?
    }

    pub async fn summary(&self) -> Result<SessionSummary> {
        self.call(Command::Summary).await
    }

    pub async fn snapshot(&self) -> Result<SessionRecord> {
        self.call(Command::Snapshot).await
    }

    pub async fn step(&self) -> Result<StepOutcome> {
        self.call(Command::Step).await
    }

    pub async fn set_points(
        &self,
        points: Vec<PointPair>,
        mask: Option<RleMask>,
    ) -> Result<SessionSummary> {
        self.call(|tx| Command::SetPoints(points, mask, tx)).await
    }

    pub async fn reset(&self) -> Result<SessionSummary> {
        self.call(Command::Reset).await
    }
}

/// Maps session ids to workers. Dropping a handle's last sender stops its
/// worker.
#[derive(Clone, Default)]
pub struct Registry {
    sessions: Arc<Mutex<HashMap<String, SessionHandle>>>,
    config: ConfigOverrides,
}

fn new_id() -> String {
    format!("{:032x}", rand::thread_rng().gen::<u128>())
}

impl Registry {
    /// Registry whose sessions all layer `config` over their instruction.
    pub fn with_config(config: ConfigOverrides) -> Self {
        Registry {
            sessions: Arc::default(),
            config,
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, SessionHandle>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn create(&self, instruction: Instruction) -> Result<(String, SessionHandle)> {
        let id = new_id();
        let session = Session::create(id.clone(), instruction, self.config.clone())?;
        Ok((id.clone(), self.insert(session)))
    }

    /// Registers a session restored from a record, under its own id.
    pub fn restore(&self, record: SessionRecord) -> Result<SessionHandle> {
        Ok(self.insert(Session::from_record(record)?))
    }

    fn insert(&self, session: Session) -> SessionHandle {
        let id = session.id().to_string();
        let handle = SessionHandle::spawn(session);
        self.lock().insert(id, handle.clone());
        handle
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle> {
        self.lock()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    pub fn remove(&self, id: &str) -> Result<()> {
        self.lock()
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
