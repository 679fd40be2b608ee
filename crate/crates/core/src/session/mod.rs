//! Sessions: one notebook, one workspace, one kernel and the event log.
//!
//! [`Session`] is the single writer. [`host::SessionHost`] puts it behind a
//! command queue so any number of clients can talk to it, and
//! [`protocol`] defines the JSON frames they exchange.

pub mod host;
pub mod protocol;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kernel::{KernelBackend, KernelError, KernelSnapshot, MockKernel};
use crate::notebook::{Notebook, NotebookError};
use crate::workspace::{
    apply, Command, EngineConfig, EngineError, EventKind, Mode, ProvenanceEvent, WorkspaceState,
};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl From<NotebookError> for SessionError {
    fn from(e: NotebookError) -> Self {
        match e {
            NotebookError::Schema {
                location,
                line,
                message,
            } => SessionError::Schema {
                path: location,
                line,
                message,
            },
            other => SessionError::Schema {
                path: String::new(),
                line: 0,
                message: other.to_string(),
            },
        }
    }
}

/// Everything needed to resume a session exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub version: u32,
    pub config: EngineConfig,
    pub state: WorkspaceState,
    pub log: Vec<ProvenanceEvent>,
    /// Number of log events already reflected in `state`.
    pub log_cursor: usize,
    pub last_t: u64,
    pub kernel: KernelSnapshot,
    /// SHA-256 of the kernel snapshot's canonical JSON.
    pub kernel_digest: String,
}

pub struct Session {
    state: WorkspaceState,
    kernel: Box<dyn KernelBackend>,
    config: EngineConfig,
    log: Vec<ProvenanceEvent>,
    last_t: u64,
    started: Instant,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn kernel_digest(snapshot: &KernelSnapshot) -> String {
    digest(
        serde_json::to_string(snapshot)
            .expect("kernel snapshot serializes")
            .as_bytes(),
    )
}

impl Session {
    /// Opens a session on the mock kernel. The log starts with a
    /// `SessionStart` event recording mode and dwell threshold.
    pub fn open(notebook: Notebook, mode: Mode, config: EngineConfig) -> Session {
        Session::with_kernel(notebook, mode, config, Box::new(MockKernel::new()))
    }

    pub fn with_kernel(
        notebook: Notebook,
        mode: Mode,
        config: EngineConfig,
        kernel: Box<dyn KernelBackend>,
    ) -> Session {
        Session {
            state: WorkspaceState::new(notebook, mode),
            kernel,
            config,
            log: vec![ProvenanceEvent {
                t: 0,
                kind: EventKind::SessionStart {
                    mode,
                    dwell_ms: config.dwell_ms,
                },
            }],
            last_t: 0,
            started: Instant::now(),
        }
    }

    pub fn open_file(path: &Path, mode: Mode, config: EngineConfig) -> Result<Session, SessionError> {
        Ok(Session::open(Notebook::load(path)?, mode, config))
    }

    pub fn state(&self) -> &WorkspaceState {
        &self.state
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn log(&self) -> &[ProvenanceEvent] {
        &self.log
    }

    pub fn last_t(&self) -> u64 {
        self.last_t
    }

    pub fn kernel(&self) -> &dyn KernelBackend {
        self.kernel.as_ref()
    }

    pub fn kernel_mut(&mut self) -> &mut dyn KernelBackend {
        self.kernel.as_mut()
    }

    /// Applies `command` at time `t` (ms since start). Rejected commands
    /// leave the session unchanged and log nothing.
    pub fn dispatch(&mut self, command: &Command, t: u64) -> Result<Vec<ProvenanceEvent>, EngineError> {
        if t < self.last_t {
            return Err(EngineError::TimeWentBackwards { last: self.last_t, t });
        }
        let kinds = apply(&mut self.state, self.kernel.as_mut(), &self.config, command)?;
        self.last_t = t;
        let events: Vec<ProvenanceEvent> = kinds.into_iter().map(|kind| ProvenanceEvent { t, kind }).collect();
        self.log.extend(events.iter().cloned());
        Ok(events)
    }

    /// Dispatches at the current wall-clock offset, never earlier than the
    /// last event.
    pub fn dispatch_now(&mut self, command: &Command) -> Result<Vec<ProvenanceEvent>, EngineError> {
        let elapsed = self.started.elapsed().as_millis() as u64;
        self.dispatch(command, elapsed.max(self.last_t))
    }

    /// Digest over the canonical serialization of workspace and kernel.
    pub fn state_hash(&self) -> String {
        let kernel = self.kernel.snapshot().ok();
        let canonical = serde_json::to_string(&(&self.state, &kernel)).expect("state serializes");
        digest(canonical.as_bytes())
    }

    pub fn snapshot(&self) -> Result<SessionSnapshot, SessionError> {
        let kernel = self.kernel.snapshot()?;
        Ok(SessionSnapshot {
            version: SNAPSHOT_VERSION,
            config: self.config,
            state: self.state.clone(),
            log: self.log.clone(),
            log_cursor: self.log.len(),
            last_t: self.last_t,
            kernel_digest: kernel_digest(&kernel),
            kernel,
        })
    }

    /// Rebuilds a session from a snapshot after checking its invariants.
    pub fn restore(snapshot: SessionSnapshot, kernel: Box<dyn KernelBackend>) -> Result<Session, SessionError> {
        let schema = |message: String| SessionError::Schema {
            path: String::new(),
            line: 0,
            message,
        };
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(schema(format!("unsupported snapshot version {}", snapshot.version)));
        }
        if snapshot.log_cursor != snapshot.log.len() {
            return Err(schema(format!(
                "log cursor {} does not match {} logged events",
                snapshot.log_cursor,
                snapshot.log.len()
            )));
        }
        snapshot.state.notebook.validate().map_err(schema)?;
        snapshot.state.check_invariants().map_err(schema)?;
        if kernel_digest(&snapshot.kernel) != snapshot.kernel_digest {
            return Err(schema("kernel digest mismatch".into()));
        }
        if snapshot.log.windows(2).any(|w| w[1].t < w[0].t) || snapshot.log.last().is_some_and(|e| e.t > snapshot.last_t) {
            return Err(schema("log timestamps are inconsistent".into()));
        }
        let mut kernel = kernel;
        kernel.restore(&snapshot.kernel)?;
        Ok(Session {
            state: snapshot.state,
            kernel,
            config: snapshot.config,
            log: snapshot.log,
            last_t: snapshot.last_t,
            started: Instant::now(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        let text = serde_json::to_string_pretty(&self.snapshot()?).expect("snapshot serializes");
        std::fs::write(path, text).map_err(|source| SessionError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Loads a saved session onto the mock kernel.
    pub fn load(path: &Path) -> Result<Session, SessionError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| SessionError::Io {
            path: p.clone(),
            source,
        })?;
        let snapshot: SessionSnapshot = serde_json::from_str(&text).map_err(|e| SessionError::Schema {
            path: p.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Session::restore(snapshot, Box::new(MockKernel::new())).map_err(|e| match e {
            SessionError::Schema { line, message, .. } => SessionError::Schema { path: p, line, message },
            other => other,
        })
    }
}
