use serde::{Deserialize, Serialize};

use super::{Command, Hand, HeldItem, Mode, RegionId};
use crate::artifact::{ArtifactId, SortDirection};
use crate::notebook::{CellId, Pose};
use crate::value::{Comparator, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossDirection {
    Enter,
    Exit,
}

/// One line of the event log: `{"t": <ms>, "kind": "PullOut", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEvent {
    /// Milliseconds since session start.
    pub t: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    SessionStart {
        mode: Mode,
        dwell_ms: u64,
    },
    Edit {
        cell: CellId,
        source: String,
    },
    Execute {
        cell: CellId,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    PullOut {
        cell: CellId,
        artifact: ArtifactId,
        pose: Pose,
    },
    PutInCreate {
        artifact: ArtifactId,
        cell: CellId,
        variable: String,
        source: String,
    },
    PutInUpdate {
        artifact: ArtifactId,
        cell: CellId,
        variable: String,
        source: String,
    },
    Grab {
        hand: Hand,
        item: HeldItem,
    },
    Release {
        hand: Hand,
        item: HeldItem,
    },
    MoveArtifact {
        artifact: ArtifactId,
        pose: Pose,
    },
    Move {
        pose: Pose,
    },
    PortalCross {
        direction: CrossDirection,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cell: Option<CellId>,
        /// Artifact spawned by entering a cell.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        artifact: Option<ArtifactId>,
        holding: bool,
    },
    FocusChange {
        #[serde(default)]
        from: Option<RegionId>,
        region: RegionId,
        dwell_ms: u64,
    },
    Sort {
        table: ArtifactId,
        column: String,
        direction: SortDirection,
    },
    Filter {
        table: ArtifactId,
        column: String,
        cmp: Comparator,
        threshold: Scalar,
    },
    RemoveFilter {
        table: ArtifactId,
        index: usize,
    },
    SelectColumn {
        table: ArtifactId,
        column: String,
        selected: bool,
    },
    MergeVis {
        table: ArtifactId,
        vis: ArtifactId,
        columns: (String, String),
        pose: Pose,
    },
    AddAxis {
        vis: ArtifactId,
        table: ArtifactId,
        column: String,
    },
    RemoveAxis {
        vis: ArtifactId,
        index: usize,
        column: String,
    },
    RemovePoint {
        vis: ArtifactId,
        index: usize,
    },
    ApplyVisToTable {
        vis: ArtifactId,
        table: ArtifactId,
        rows_removed: usize,
    },
    Delete {
        artifact: ArtifactId,
    },
    AnswerReported {
        question: String,
        answer: serde_json::Value,
    },
    TaskComplete,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStart { .. } => "SessionStart",
            EventKind::Edit { .. } => "Edit",
            EventKind::Execute { .. } => "Execute",
            EventKind::PullOut { .. } => "PullOut",
            EventKind::PutInCreate { .. } => "PutInCreate",
            EventKind::PutInUpdate { .. } => "PutInUpdate",
            EventKind::Grab { .. } => "Grab",
            EventKind::Release { .. } => "Release",
            EventKind::MoveArtifact { .. } => "MoveArtifact",
            EventKind::Move { .. } => "Move",
            EventKind::PortalCross { .. } => "PortalCross",
            EventKind::FocusChange { .. } => "FocusChange",
            EventKind::Sort { .. } => "Sort",
            EventKind::Filter { .. } => "Filter",
            EventKind::RemoveFilter { .. } => "RemoveFilter",
            EventKind::SelectColumn { .. } => "SelectColumn",
            EventKind::MergeVis { .. } => "MergeVis",
            EventKind::AddAxis { .. } => "AddAxis",
            EventKind::RemoveAxis { .. } => "RemoveAxis",
            EventKind::RemovePoint { .. } => "RemovePoint",
            EventKind::ApplyVisToTable { .. } => "ApplyVisToTable",
            EventKind::Delete { .. } => "Delete",
            EventKind::AnswerReported { .. } => "AnswerReported",
            EventKind::TaskComplete => "TaskComplete",
        }
    }

    /// The command that reproduces this event on the state it was recorded
    /// against. `SessionStart` has none: it configures the session instead.
    pub fn to_command(&self) -> Option<Command> {
        Some(match self.clone() {
            EventKind::SessionStart { .. } => return None,
            EventKind::Edit { cell, source } => Command::Edit { cell, source },
            EventKind::Execute { cell, .. } => Command::Execute { cell },
            EventKind::PullOut { cell, pose, .. } => Command::PullOut { cell, pose: Some(pose) },
            EventKind::PutInCreate { artifact, cell, .. } | EventKind::PutInUpdate { artifact, cell, .. } => {
                Command::PutIn { artifact, cell }
            }
            EventKind::Grab { hand, item } => Command::Grab { hand, item },
            EventKind::Release { hand, .. } => Command::Release { hand },
            EventKind::MoveArtifact { artifact, pose } => Command::MoveArtifact { artifact, pose },
            EventKind::Move { pose } => Command::MoveUser { pose },
            EventKind::PortalCross { direction, cell, .. } => match (direction, cell) {
                (CrossDirection::Enter, Some(cell)) => Command::EnterCell { cell },
                _ => Command::ExitPortal,
            },
            EventKind::FocusChange { region, dwell_ms, .. } => Command::SetFocus { region, dwell_ms },
            EventKind::Sort {
                table,
                column,
                direction,
            } => Command::Sort {
                table,
                column,
                direction,
            },
            EventKind::Filter {
                table,
                column,
                cmp,
                threshold,
            } => Command::Filter {
                table,
                column,
                cmp,
                threshold,
            },
            EventKind::RemoveFilter { table, index } => Command::RemoveFilter { table, index },
            EventKind::SelectColumn { table, column, .. } => Command::SelectColumn { table, column },
            EventKind::MergeVis {
                table, columns, pose, ..
            } => Command::Merge {
                table,
                columns,
                pose: Some(pose),
            },
            EventKind::AddAxis { vis, table, column } => Command::AddAxis { vis, table, column },
            EventKind::RemoveAxis { vis, index, .. } => Command::RemoveAxis { vis, index },
            EventKind::RemovePoint { vis, index } => Command::RemovePoint { vis, index },
            EventKind::ApplyVisToTable { vis, table, .. } => Command::ApplyVis { vis, table },
            EventKind::Delete { artifact } => Command::Delete { artifact },
            EventKind::AnswerReported { question, answer } => Command::ReportAnswer { question, answer },
            EventKind::TaskComplete => Command::Complete,
        })
    }
}
