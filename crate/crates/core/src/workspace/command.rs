use serde::{Deserialize, Serialize};

use super::{Hand, HeldItem, RegionId};
use crate::artifact::{ArtifactId, SortDirection};
use crate::notebook::{CellId, Pose};
use crate::value::{Comparator, Scalar};

/// One user intent. Serialized as `{"op": "<name>", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Edit {
        cell: CellId,
        source: String,
    },
    Execute {
        cell: CellId,
    },
    /// Unified mode: drag a data or visualization cell out into an artifact.
    PullOut {
        cell: CellId,
        #[serde(default)]
        pose: Option<Pose>,
    },
    PutIn {
        artifact: ArtifactId,
        cell: CellId,
    },
    /// Let go of an artifact at `pose`: a put-in when a cell is within snap
    /// radius, otherwise a move.
    Drop {
        artifact: ArtifactId,
        pose: Pose,
    },
    Grab {
        hand: Hand,
        item: HeldItem,
    },
    Release {
        hand: Hand,
    },
    MoveArtifact {
        artifact: ArtifactId,
        pose: Pose,
    },
    MoveUser {
        pose: Pose,
    },
    /// Separated mode: step into a cell's artifact space.
    EnterCell {
        cell: CellId,
    },
    /// Separated mode: walk back through the portal to the notebook.
    ExitPortal,
    SetFocus {
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
    },
    Merge {
        table: ArtifactId,
        columns: (String, String),
        #[serde(default)]
        pose: Option<Pose>,
    },
    AddAxis {
        vis: ArtifactId,
        table: ArtifactId,
        column: String,
    },
    RemoveAxis {
        vis: ArtifactId,
        index: usize,
    },
    RemovePoint {
        vis: ArtifactId,
        index: usize,
    },
    ApplyVis {
        vis: ArtifactId,
        table: ArtifactId,
    },
    Delete {
        artifact: ArtifactId,
    },
    ReportAnswer {
        question: String,
        answer: serde_json::Value,
    },
    Complete,
}

impl Command {
    /// Whether the command may run the kernel (and so needs a kernel
    /// snapshot for rollback).
    pub fn touches_kernel(&self) -> bool {
        matches!(
            self,
            Command::Execute { .. } | Command::PullOut { .. } | Command::EnterCell { .. }
        )
    }
}
