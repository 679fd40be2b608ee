//! Event-log replay, interaction metrics and the scripted study tasks.

pub mod tasks;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::notebook::Notebook;
use crate::session::Session;
use crate::workspace::{CrossDirection, EngineConfig, EventKind, Mode, ProvenanceEvent};

/// How long after a workspace change a manipulation still counts as an
/// interactive transition.
pub const INTERACTION_WINDOW_MS: u64 = 5_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("log has no TaskComplete event")]
    NoCompletionMarker,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
}

fn corrupt(line: usize, reason: impl Into<String>) -> ReplayError {
    ReplayError::CorruptLog {
        line,
        reason: reason.into(),
    }
}

/// Parses a JSON-lines event log. Blank lines are skipped but counted.
pub fn parse_log(text: &str) -> Result<Vec<ProvenanceEvent>, ReplayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| corrupt(i + 1, e.to_string())))
        .collect()
}

pub fn write_log(events: &[ProvenanceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Rebuilds a session by re-issuing every logged event as a command on a
/// fresh mock-kernel session, checking that each produces exactly the
/// logged event. Line numbers in errors are 1-based event positions.
pub fn replay(log: &[ProvenanceEvent], initial: &Notebook) -> Result<Session, ReplayError> {
    let (mode, config, rest, offset) = match log.first() {
        Some(ProvenanceEvent {
            kind: EventKind::SessionStart { mode, dwell_ms },
            ..
        }) => (
            *mode,
            EngineConfig {
                dwell_ms: *dwell_ms,
                ..EngineConfig::default()
            },
            &log[1..],
            2,
        ),
        _ => (Mode::Unified, EngineConfig::default(), log, 1),
    };
    let mut session = Session::open(initial.clone(), mode, config);
    replay_onto(&mut session, rest, offset)?;
    Ok(session)
}

/// Applies logged events to an existing session (for example one restored
/// from a snapshot). `first_line` numbers the first event in errors.
pub fn replay_onto(session: &mut Session, events: &[ProvenanceEvent], first_line: usize) -> Result<(), ReplayError> {
    for (i, event) in events.iter().enumerate() {
        let line = first_line + i;
        if event.t < session.last_t() {
            return Err(corrupt(line, format!("timestamp {} precedes {}", event.t, session.last_t())));
        }
        let command = event
            .kind
            .to_command()
            .ok_or_else(|| corrupt(line, "SessionStart in the middle of a log"))?;
        let produced = session
            .dispatch(&command, event.t)
            .map_err(|e| corrupt(line, format!("command rejected: {e}")))?;
        if produced.len() != 1 || produced[0] != *event {
            return Err(corrupt(line, format!("replay produced {produced:?}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub completion_time_s: f64,
    pub nav_transitions: u64,
    pub interactive_transitions: u64,
    /// Rounded to 3 decimals.
    pub nav_transitions_per_min: f64,
    /// Rounded to 3 decimals.
    pub interactive_transitions_per_min: f64,
    pub portal_crosses: u64,
    pub deletes: u64,
    pub artifacts_left: u64,
    pub error_score: u64,
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

impl MetricsReport {
    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let rows: [(&str, String); 9] = [
            ("completion_time_s", format!("{:.3}", self.completion_time_s)),
            ("nav_transitions", self.nav_transitions.to_string()),
            ("nav_transitions_per_min", format!("{:.3}", self.nav_transitions_per_min)),
            ("interactive_transitions", self.interactive_transitions.to_string()),
            (
                "interactive_transitions_per_min",
                format!("{:.3}", self.interactive_transitions_per_min),
            ),
            ("portal_crosses", self.portal_crosses.to_string()),
            ("deletes", self.deletes.to_string()),
            ("artifacts_left", self.artifacts_left.to_string()),
            ("error_score", self.error_score.to_string()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let vwidth = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>vwidth$}");
        }
        out
    }
}

/// Events that always count as an interactive transition: each changes
/// the representation of a data artifact.
fn is_representation_change(kind: &EventKind) -> bool {
    matches!(
        kind,
        EventKind::PullOut { .. }
            | EventKind::PutInCreate { .. }
            | EventKind::PutInUpdate { .. }
            | EventKind::MergeVis { .. }
            | EventKind::AddAxis { .. }
            | EventKind::RemoveAxis { .. }
            | EventKind::PortalCross {
                direction: CrossDirection::Enter,
                artifact: Some(_),
                ..
            }
    )
}

/// Code or data manipulations, counted only when they come first after a
/// workspace change.
fn is_manipulation(kind: &EventKind) -> bool {
    matches!(
        kind,
        EventKind::Edit { .. }
            | EventKind::Execute { .. }
            | EventKind::Sort { .. }
            | EventKind::Filter { .. }
            | EventKind::RemoveFilter { .. }
            | EventKind::SelectColumn { .. }
            | EventKind::RemovePoint { .. }
            | EventKind::ApplyVisToTable { .. }
    )
}

/// Compares answers, treating numbers as equal within a relative 1e-9.
pub fn answers_match(given: &serde_json::Value, truth: &serde_json::Value) -> bool {
    use serde_json::Value;
    match (given, truth) {
        (Value::Number(a), Value::Number(b)) => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0),
            _ => a == b,
        },
        (Value::Array(a), Value::Array(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| answers_match(x, y))
        }
        (Value::Object(a), Value::Object(b)) => {
            a.len() == b.len()
                && a
                    .iter()
                    .all(|(k, v)| b.get(k).is_some_and(|w| answers_match(v, w)))
        }
        _ => given == truth,
    }
}

/// Computes the study measures over everything up to the last
/// `TaskComplete`.
pub fn compute_metrics(
    log: &[ProvenanceEvent],
    ground_truth: &BTreeMap<String, serde_json::Value>,
) -> Result<MetricsReport, MetricsError> {
    let end = log
        .iter()
        .rposition(|e| e.kind == EventKind::TaskComplete)
        .ok_or(MetricsError::NoCompletionMarker)?;
    let completion_ms = log[end].t;
    let mut nav = 0u64;
    let mut interactive = 0u64;
    let mut portal = 0u64;
    let mut deletes = 0u64;
    let mut live: i64 = 0;
    let mut errors = 0u64;
    let mut window_opened: Option<u64> = None;
    for e in &log[..=end] {
        let open = window_opened.filter(|&t0| e.t.saturating_sub(t0) <= INTERACTION_WINDOW_MS);
        if is_representation_change(&e.kind) {
            interactive += 1;
            window_opened = None;
        } else if is_manipulation(&e.kind) {
            if open.is_some() {
                interactive += 1;
            }
            window_opened = None;
        }
        match &e.kind {
            EventKind::FocusChange { .. } => {
                nav += 1;
                window_opened = Some(e.t);
            }
            EventKind::PortalCross {
                holding, artifact, ..
            } => {
                portal += 1;
                if !holding {
                    nav += 1;
                }
                if artifact.is_some() {
                    live += 1;
                }
                window_opened = Some(e.t);
            }
            EventKind::PullOut { .. } | EventKind::MergeVis { .. } => live += 1,
            EventKind::PutInCreate { .. } | EventKind::PutInUpdate { .. } => live -= 1,
            EventKind::Delete { .. } => {
                live -= 1;
                deletes += 1;
            }
            EventKind::AnswerReported { question, answer } => {
                if let Some(truth) = ground_truth.get(question) {
                    if !answers_match(answer, truth) {
                        errors += 1;
                    }
                }
            }
            _ => {}
        }
    }
    let minutes = completion_ms as f64 / 60_000.0;
    let rate = |count: u64| if minutes > 0.0 { round3(count as f64 / minutes) } else { 0.0 };
    Ok(MetricsReport {
        completion_time_s: completion_ms as f64 / 1000.0,
        nav_transitions: nav,
        interactive_transitions: interactive,
        nav_transitions_per_min: rate(nav),
        interactive_transitions_per_min: rate(interactive),
        portal_crosses: portal,
        deletes,
        artifacts_left: live.max(0) as u64,
        error_score: errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::ArtifactId;
    use crate::notebook::{CellId, WindowId};
    use crate::workspace::RegionId;

    fn ev(t: u64, kind: EventKind) -> ProvenanceEvent {
        ProvenanceEvent { t, kind }
    }

    fn focus(t: u64) -> ProvenanceEvent {
        ev(
            t,
            EventKind::FocusChange {
                from: None,
                region: RegionId::Window(WindowId("w1".into())),
                dwell_ms: 600,
            },
        )
    }

    #[test]
    fn needs_completion_marker() {
        assert_eq!(
            compute_metrics(&[focus(10)], &BTreeMap::new()),
            Err(MetricsError::NoCompletionMarker)
        );
    }

    #[test]
    fn window_counts_first_manipulation_only() {
        let edit = |t| {
            ev(
                t,
                EventKind::Edit {
                    cell: CellId::new("c1"),
                    source: String::new(),
                },
            )
        };
        let log = vec![
            focus(1_000),
            edit(2_000),
            edit(3_000),
            focus(10_000),
            edit(16_000),
            ev(60_000, EventKind::TaskComplete),
        ];
        let r = compute_metrics(&log, &BTreeMap::new()).unwrap();
        assert_eq!((r.nav_transitions, r.interactive_transitions), (2, 1));
        assert_eq!(r.nav_transitions_per_min, 2.0);
    }

    #[test]
    fn artifacts_and_answers() {
        let a = ArtifactId(1);
        let log = vec![
            ev(
                0,
                EventKind::PullOut {
                    cell: CellId::new("c1"),
                    artifact: a,
                    pose: Default::default(),
                },
            ),
            ev(
                1,
                EventKind::PullOut {
                    cell: CellId::new("c1"),
                    artifact: ArtifactId(2),
                    pose: Default::default(),
                },
            ),
            ev(2, EventKind::Delete { artifact: a }),
            ev(
                3,
                EventKind::AnswerReported {
                    question: "q".into(),
                    answer: serde_json::json!([178, 13]),
                },
            ),
            ev(
                4,
                EventKind::AnswerReported {
                    question: "r".into(),
                    answer: serde_json::json!(1.5),
                },
            ),
            ev(30_000, EventKind::TaskComplete),
        ];
        let truth = BTreeMap::from([
            ("q".to_string(), serde_json::json!([178.0, 13.0])),
            ("r".to_string(), serde_json::json!(2.5)),
        ]);
        let r = compute_metrics(&log, &truth).unwrap();
        assert_eq!((r.deletes, r.artifacts_left, r.error_score), (1, 1, 1));
        assert_eq!(r.interactive_transitions, 2);
        assert!(r.to_text().contains("completion_time_s"));
    }

    #[test]
    fn log_text_round_trip() {
        let log = vec![focus(5), ev(9, EventKind::TaskComplete)];
        let text = write_log(&log);
        assert!(text.starts_with("{\"t\":5,\"kind\":\"FocusChange\""));
        assert_eq!(parse_log(&text).unwrap(), log);
        assert!(matches!(
            parse_log("{\"t\":1,\"kind\":\"TaskComplete\"}\n\nbad"),
            Err(ReplayError::CorruptLog { line: 3, .. })
        ));
    }
}
