//! JSON frames of the session message API.
//!
//! Client to server:
//!
//! ```text
//! {"seq": 1, "command": {"op": "pull_out", "cell": "c02"}, "t": 1200}
//! {"seq": 2, "query": "hash"}
//! ```
//!
//! Server to client, a reply per request and a subscription frame per event:
//!
//! ```text
//! {"seq": 1, "ok": true, "events": [{"t": 1200, "kind": "PullOut", ...}]}
//! {"seq": 1, "ok": false, "error": {"code": "WrongCellKind", "message": "..."}, "events": []}
//! {"event": {"t": 1200, "kind": "PullOut", ...}}
//! ```

use serde::{Deserialize, Serialize};

use crate::workspace::{Command, EngineError, ProvenanceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientFrame {
    pub seq: u64,
    #[serde(flatten)]
    pub body: ClientBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClientBody {
    Command {
        command: Command,
        /// Event time in ms since session start; the server clock if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<u64>,
    },
    Query {
        query: Query,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    /// Full persistence snapshot.
    Snapshot,
    /// State hash only.
    Hash,
    /// Workspace state only.
    State,
    /// Event log so far.
    Log,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorBody {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<&EngineError> for ErrorBody {
    fn from(e: &EngineError) -> Self {
        ErrorBody::new(e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    /// Echo of the request's `seq`; absent when the frame was unreadable.
    pub seq: Option<u64>,
    pub ok: bool,
    pub events: Vec<ProvenanceEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
}

impl Reply {
    pub fn ok(seq: u64, events: Vec<ProvenanceEvent>) -> Self {
        Reply {
            seq: Some(seq),
            ok: true,
            events,
            error: None,
            result: None,
        }
    }

    pub fn result(seq: u64, result: serde_json::Value) -> Self {
        Reply {
            result: Some(result),
            ..Reply::ok(seq, Vec::new())
        }
    }

    pub fn error(seq: Option<u64>, error: ErrorBody) -> Self {
        Reply {
            seq,
            ok: false,
            events: Vec::new(),
            error: Some(error),
            result: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerFrame {
    Reply(Reply),
    Event { event: ProvenanceEvent },
}

/// Parses a client frame, producing the error reply to send if it is
/// malformed.
#[allow(clippy::result_large_err)]
pub fn parse_client_frame(text: &str) -> Result<ClientFrame, Reply> {
    serde_json::from_str(text).map_err(|e| {
        let seq = serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|v| v.get("seq").and_then(serde_json::Value::as_u64));
        Reply::error(seq, ErrorBody::new("BadFrame", e.to_string()))
    })
}
