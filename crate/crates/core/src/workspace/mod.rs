//! The workspace state machine.
//!
//! A [`WorkspaceState`] holds the notebook, the artifacts pulled out of it,
//! the links between them, what each hand holds and where the user is and
//! looks. [`apply`] runs one [`Command`] against the state and a kernel and
//! returns the provenance events it produced. Commands are atomic: on error
//! the state (and kernel, when it supports snapshots) is left untouched.

mod command;
mod engine;
mod event;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use command::Command;
pub use engine::apply;
pub use event::{CrossDirection, EventKind, ProvenanceEvent};

use crate::artifact::{Artifact, ArtifactError, ArtifactId, Link, Space};
use crate::codegen::CodegenError;
use crate::kernel::KernelError;
use crate::notebook::{CellId, CellKind, Notebook, Pose, WindowId};

pub const DEFAULT_DWELL_MS: u64 = 500;
pub const DWELL_ENV_VAR: &str = "ICON_DWELL_MS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Unified,
    Separated,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unified" => Ok(Mode::Unified),
            "separated" => Ok(Mode::Separated),
            other => Err(format!("unknown mode `{other}` (expected unified or separated)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hand {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hand::Left => "L",
            Hand::Right => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HeldItem {
    Artifact { id: ArtifactId },
    Column { table: ArtifactId, column: String },
}

impl HeldItem {
    /// The artifact this item belongs to.
    pub fn artifact(&self) -> ArtifactId {
        match self {
            HeldItem::Artifact { id } => *id,
            HeldItem::Column { table, .. } => *table,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Hands {
    pub left: Option<HeldItem>,
    pub right: Option<HeldItem>,
}

impl Hands {
    pub fn get(&self, hand: Hand) -> Option<&HeldItem> {
        match hand {
            Hand::Left => self.left.as_ref(),
            Hand::Right => self.right.as_ref(),
        }
    }

    pub fn slot(&mut self, hand: Hand) -> &mut Option<HeldItem> {
        match hand {
            Hand::Left => &mut self.left,
            Hand::Right => &mut self.right,
        }
    }

    pub fn items(&self) -> impl Iterator<Item = &HeldItem> {
        self.left.iter().chain(self.right.iter())
    }

    pub fn count(&self) -> usize {
        self.items().count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn holds_artifact(&self, id: ArtifactId) -> bool {
        self.items().any(|i| i.artifact() == id)
    }

    /// Empties every hand touching `id`.
    pub fn release_artifact(&mut self, id: ArtifactId) {
        for slot in [&mut self.left, &mut self.right] {
            if slot.as_ref().is_some_and(|i| i.artifact() == id) {
                *slot = None;
            }
        }
    }
}

/// Something the user can look at.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionId {
    Window(WindowId),
    Artifact(ArtifactId),
    Portal,
    Desk,
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionId::Window(w) => write!(f, "window {w}"),
            RegionId::Artifact(a) => write!(f, "artifact {a}"),
            RegionId::Portal => f.write_str("portal"),
            RegionId::Desk => f.write_str("desk"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Minimum dwell before a gaze shift counts as a focus change.
    pub dwell_ms: u64,
    /// Maximum distance between a dropped artifact and a cell for put-in.
    pub snap_radius: f64,
    /// How far ahead of the user an entered cell's artifact appears.
    pub spawn_distance: f64,
    /// How far behind the spawn point the portal stands.
    pub portal_distance: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dwell_ms: DEFAULT_DWELL_MS,
            snap_radius: 0.3,
            spawn_distance: 1.0,
            portal_distance: 1.5,
        }
    }
}

impl EngineConfig {
    /// Defaults, with the dwell threshold taken from `ICON_DWELL_MS` if set.
    pub fn from_env() -> Result<Self, String> {
        let mut config = EngineConfig::default();
        if let Ok(raw) = std::env::var(DWELL_ENV_VAR) {
            config.dwell_ms = raw
                .trim()
                .parse()
                .map_err(|_| format!("{DWELL_ENV_VAR} must be a non-negative integer, got `{raw}`"))?;
        }
        Ok(config)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown cell `{0}`")]
    UnknownCell(CellId),
    #[error("unknown artifact {0}")]
    UnknownArtifact(ArtifactId),
    #[error("cell `{cell}` is {kind:?}; expected a data or visualization cell")]
    WrongCellKind { cell: CellId, kind: CellKind },
    #[error("command needs {0:?} mode")]
    WrongMode(Mode),
    #[error("command needs the {0:?}")]
    WrongSpace(Space),
    #[error("{0} is in the hidden space")]
    NotVisible(String),
    #[error("{0} is not visible")]
    RegionNotVisible(RegionId),
    #[error("cell `{0}` is neither empty nor the artifact's origin")]
    InvalidTarget(CellId),
    #[error("hand {0} is already holding something")]
    HandOccupied(Hand),
    #[error("hand {0} is empty")]
    HandEmpty(Hand),
    #[error("item is already held")]
    AlreadyHeld,
    #[error("artifact {0} must be held to cross into the notebook")]
    NotHeld(ArtifactId),
    #[error("pose is outside the arena")]
    OutOfArena,
    #[error("no cell within snap radius")]
    NoSnapTarget,
    #[error("cell `{0}` defines no table")]
    NoTable(CellId),
    #[error("executing `{cell}` failed: {message}")]
    ExecutionFailed { cell: CellId, message: String },
    #[error("timestamp {t} precedes {last}")]
    TimeWentBackwards { last: u64, t: u64 },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl EngineError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::UnknownCell(_) => "UnknownCell",
            EngineError::UnknownArtifact(_) => "UnknownArtifact",
            EngineError::WrongCellKind { .. } => "WrongCellKind",
            EngineError::WrongMode(_) => "WrongMode",
            EngineError::WrongSpace(_) => "WrongSpace",
            EngineError::NotVisible(_) => "NotVisible",
            EngineError::RegionNotVisible(_) => "RegionNotVisible",
            EngineError::InvalidTarget(_) => "InvalidTarget",
            EngineError::HandOccupied(_) => "HandOccupied",
            EngineError::HandEmpty(_) => "HandEmpty",
            EngineError::AlreadyHeld => "AlreadyHeld",
            EngineError::NotHeld(_) => "NotHeld",
            EngineError::OutOfArena => "OutOfArena",
            EngineError::NoSnapTarget => "NoSnapTarget",
            EngineError::NoTable(_) => "NoTable",
            EngineError::ExecutionFailed { .. } => "ExecutionFailed",
            EngineError::TimeWentBackwards { .. } => "TimeWentBackwards",
            EngineError::Artifact(e) => match e {
                ArtifactError::UnknownColumn(_) => "UnknownColumn",
                ArtifactError::TypeMismatch { .. } => "TypeMismatch",
                ArtifactError::ColumnsNotSelected => "ColumnsNotSelected",
                ArtifactError::NonNumeric(_) => "NonNumeric",
                ArtifactError::SameColumn => "SameColumn",
                ArtifactError::ArityMismatch(_) => "ArityMismatch",
                ArtifactError::DuplicateAxis(_) => "DuplicateAxis",
                ArtifactError::NotThreeD => "NotThreeD",
                ArtifactError::BadIndex(_) => "BadIndex",
                ArtifactError::OriginMismatch => "OriginMismatch",
                ArtifactError::UnknownArtifact(_) => "UnknownArtifact",
                ArtifactError::NotATable(_) => "NotATable",
                ArtifactError::NotAVis(_) => "NotAVis",
            },
            EngineError::Codegen(e) => match e {
                CodegenError::TargetNotEmpty(_) => "TargetNotEmpty",
                CodegenError::OriginMismatch(_) => "OriginMismatch",
                CodegenError::AmbiguousVariable { .. } => "AmbiguousVariable",
                CodegenError::InconsistentAxis(_) => "InconsistentAxis",
            },
            EngineError::Kernel(e) => match e {
                KernelError::UnknownVariable(_) => "UnknownVariable",
                KernelError::NotTabular(_) => "NotTabular",
                KernelError::NotVisualizationCell(_) => "NotVisualizationCell",
                KernelError::NotExecuted(_) => "NotExecuted",
                KernelError::Unsupported(_) => "Unsupported",
                KernelError::Protocol(_) => "KernelProtocol",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceState {
    pub mode: Mode,
    /// Which space is shown; always `None` in Unified mode.
    pub active_space: Option<Space>,
    pub notebook: Notebook,
    pub artifacts: BTreeMap<ArtifactId, Artifact>,
    pub links: Vec<Link>,
    pub held: Hands,
    pub focus: Option<RegionId>,
    pub user_pose: Pose,
    /// Portal back to the notebook while in the artifact space.
    pub portal: Option<Pose>,
    pub next_artifact: u64,
}

impl WorkspaceState {
    pub fn new(notebook: Notebook, mode: Mode) -> Self {
        WorkspaceState {
            mode,
            active_space: match mode {
                Mode::Unified => None,
                Mode::Separated => Some(Space::NotebookSpace),
            },
            notebook,
            artifacts: BTreeMap::new(),
            links: Vec::new(),
            held: Hands::default(),
            focus: None,
            user_pose: Pose::default(),
            portal: None,
            next_artifact: 1,
        }
    }

    pub fn artifact(&self, id: ArtifactId) -> Result<&Artifact, EngineError> {
        self.artifacts.get(&id).ok_or(EngineError::UnknownArtifact(id))
    }

    /// Whether notebook windows and cells can be seen and touched.
    pub fn cells_visible(&self) -> bool {
        self.active_space != Some(Space::ArtifactSpace)
    }

    pub fn artifact_visible(&self, artifact: &Artifact) -> bool {
        match self.active_space {
            None => true,
            Some(space) => artifact.space() == Some(space) || self.held.holds_artifact(artifact.id()),
        }
    }

    pub fn region_visible(&self, region: &RegionId) -> Result<bool, EngineError> {
        Ok(match region {
            RegionId::Window(w) => {
                if self.notebook.window(w).is_none() {
                    return Err(EngineError::RegionNotVisible(region.clone()));
                }
                self.cells_visible()
            }
            RegionId::Artifact(a) => self.artifact_visible(self.artifact(*a)?),
            RegionId::Portal => self.portal.is_some() && self.active_space == Some(Space::ArtifactSpace),
            RegionId::Desk => true,
        })
    }

    /// Links implied by the artifacts: one per artifact with an origin cell.
    pub fn expected_links(&self) -> Vec<Link> {
        let mut links: Vec<Link> = self
            .artifacts
            .values()
            .filter_map(|a| {
                a.origin_cell().map(|c| Link {
                    cell_id: c.clone(),
                    artifact_id: a.id(),
                })
            })
            .collect();
        links.sort();
        links
    }

    /// Structural invariants that must hold between commands.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut links = self.links.clone();
        links.sort();
        if links != self.expected_links() {
            return Err(format!("links {:?} do not match artifacts", self.links));
        }
        if let Some(l) = self.links.iter().find(|l| self.notebook.cell(&l.cell_id).is_none()) {
            return Err(format!("link to unknown cell `{}`", l.cell_id));
        }
        match (self.mode, self.active_space) {
            (Mode::Unified, None) | (Mode::Separated, Some(_)) => {}
            (m, s) => return Err(format!("mode {m:?} with active space {s:?}")),
        }
        for item in self.held.items() {
            let a = self
                .artifacts
                .get(&item.artifact())
                .ok_or_else(|| format!("held item references missing {}", item.artifact()))?;
            if let HeldItem::Column { column, .. } = item {
                let t = a.as_table().ok_or("held column of a non-table")?;
                if t.extract.column_index(column).is_none() {
                    return Err(format!("held column `{column}` does not exist"));
                }
            }
        }
        if let (Some(l), Some(r)) = (&self.held.left, &self.held.right) {
            if l == r {
                return Err("same item in both hands".into());
            }
        }
        for (id, a) in &self.artifacts {
            if *id != a.id() || id.0 >= self.next_artifact {
                return Err(format!("artifact key {id} is inconsistent"));
            }
            if (self.mode == Mode::Separated) != a.space().is_some() {
                return Err(format!("artifact {id} space does not match mode"));
            }
            match a {
                Artifact::Table(t) => {
                    if let Some(c) = t.selected_columns.iter().find(|c| t.extract.column_index(c).is_none()) {
                        return Err(format!("table {id} selects unknown column `{c}`"));
                    }
                }
                Artifact::Vis(v) => {
                    v.extract.validate().map_err(|e| format!("vis {id}: {e}"))?;
                    if v.row_ids.len() != v.extract.points.len() {
                        return Err(format!("vis {id}: row ids out of step with points"));
                    }
                    if let Some(t) = v.origin_table {
                        if !matches!(self.artifacts.get(&t), Some(Artifact::Table(_))) {
                            return Err(format!("vis {id} tethered to missing table {t}"));
                        }
                    }
                }
            }
        }
        if let Some(RegionId::Artifact(a)) = &self.focus {
            if !self.artifacts.contains_key(a) {
                return Err(format!("focus on missing artifact {a}"));
            }
        }
        Ok(())
    }
}
