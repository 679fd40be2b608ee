//! Runs a [`Session`] on its own thread behind an ordered command queue.
//!
//! Every client request goes through one channel, so commands are totally
//! ordered and at most one kernel execution is ever in flight. Events are
//! fanned out to subscribers in log order before the requester's reply is
//! sent.

use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::{self, JoinHandle};

use super::protocol::{ClientBody, ClientFrame, ErrorBody, Query, Reply};
use super::Session;
use crate::workspace::ProvenanceEvent;

enum Msg {
    Frame(ClientFrame, Sender<Reply>),
    Subscribe(Sender<ProvenanceEvent>),
    Shutdown,
}

pub struct SessionHost {
    handle: HostHandle,
    thread: Option<JoinHandle<Session>>,
}

/// Cheap, cloneable access to a running host.
#[derive(Clone)]
pub struct HostHandle {
    tx: Sender<Msg>,
}

impl SessionHost {
    pub fn spawn(session: Session) -> SessionHost {
        let (tx, rx) = mpsc::channel();
        let thread = thread::Builder::new()
            .name("icon-session".into())
            .spawn(move || run(session, rx))
            .expect("spawn session thread");
        SessionHost {
            handle: HostHandle { tx },
            thread: Some(thread),
        }
    }

    pub fn handle(&self) -> HostHandle {
        self.handle.clone()
    }

    /// Stops the queue after pending requests and returns the session.
    pub fn shutdown(mut self) -> Session {
        let _ = self.handle.tx.send(Msg::Shutdown);
        self.thread
            .take()
            .expect("joined once")
            .join()
            .expect("session thread panicked")
    }
}

impl HostHandle {
    /// Sends a request and waits for its reply.
    pub fn request(&self, frame: ClientFrame) -> Reply {
        let seq = frame.seq;
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Msg::Frame(frame, tx)).is_err() {
            return Reply::error(Some(seq), ErrorBody::new("SessionClosed", "session is shut down"));
        }
        rx.recv()
            .unwrap_or_else(|_| Reply::error(Some(seq), ErrorBody::new("SessionClosed", "session is shut down")))
    }

    /// Receives every event logged from now on, in order.
    pub fn subscribe(&self) -> Receiver<ProvenanceEvent> {
        let (tx, rx) = mpsc::channel();
        let _ = self.tx.send(Msg::Subscribe(tx));
        rx
    }
}

fn run(mut session: Session, rx: Receiver<Msg>) -> Session {
    let mut subscribers: Vec<Sender<ProvenanceEvent>> = Vec::new();
    while let Ok(msg) = rx.recv() {
        match msg {
            Msg::Subscribe(tx) => subscribers.push(tx),
            Msg::Shutdown => break,
            Msg::Frame(frame, reply_to) => {
                let reply = handle(&mut session, frame);
                for event in &reply.events {
                    subscribers.retain(|s| s.send(event.clone()).is_ok());
                }
                let _ = reply_to.send(reply);
            }
        }
    }
    session
}

fn handle(session: &mut Session, frame: ClientFrame) -> Reply {
    let seq = frame.seq;
    match frame.body {
        ClientBody::Command { command, t } => {
            let result = match t {
                Some(t) => session.dispatch(&command, t),
                None => session.dispatch_now(&command),
            };
            match result {
                Ok(events) => Reply::ok(seq, events),
                Err(e) => Reply::error(Some(seq), ErrorBody::from(&e)),
            }
        }
        ClientBody::Query { query } => {
            let value = match query {
                Query::Hash => Ok(serde_json::Value::String(session.state_hash())),
                Query::State => serde_json::to_value(session.state()).map_err(|e| e.to_string()),
                Query::Log => serde_json::to_value(session.log()).map_err(|e| e.to_string()),
                Query::Snapshot => session
                    .snapshot()
                    .map_err(|e| e.to_string())
                    .and_then(|s| serde_json::to_value(s).map_err(|e| e.to_string())),
            };
            match value {
                Ok(v) => Reply::result(seq, v),
                Err(message) => Reply::error(Some(seq), ErrorBody::new("QueryFailed", message)),
            }
        }
    }
}
