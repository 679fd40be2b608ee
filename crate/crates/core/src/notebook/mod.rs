//! The notebook document: windows posed in the room, cells in execution
//! order, and cell classification.

pub mod grammar;

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{parse_source, render, CellAst, Statement};

use crate::kernel::PlotKind;

/// Half-width of the walkable arena in meters (a 5 m x 5 m room).
pub const ARENA_HALF_EXTENT: f64 = 2.5;

/// Vertical spacing between stacked cells inside a window.
pub const CELL_SPACING: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NotebookError {
    #[error("unknown cell `{0}`")]
    UnknownCell(CellId),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("notebook has no windows")]
    NoWindows,
    #[error("{location}:{line}: {message}")]
    Schema {
        location: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Self {
        CellId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowId(pub String);

impl fmt::Display for WindowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Position in meters plus heading. Yaw 0 faces +z; positive yaw turns
/// toward +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Pose { x, y, z, yaw }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.yaw.is_finite()
    }

    pub fn in_arena(&self) -> bool {
        self.is_finite() && self.x.abs() <= ARENA_HALF_EXTENT && self.z.abs() <= ARENA_HALF_EXTENT
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Pose `distance` meters along the heading, same yaw.
    pub fn ahead(&self, distance: f64) -> Pose {
        Pose {
            x: self.x + distance * self.yaw.sin(),
            z: self.z + distance * self.yaw.cos(),
            ..*self
        }
    }

    /// Clamped into the arena.
    pub fn clamped(&self) -> Pose {
        Pose {
            x: self.x.clamp(-ARENA_HALF_EXTENT, ARENA_HALF_EXTENT),
            z: self.z.clamp(-ARENA_HALF_EXTENT, ARENA_HALF_EXTENT),
            ..*self
        }
    }

    pub fn distance_to(&self, p: [f64; 3]) -> f64 {
        let d = [self.x - p[0], self.y - p[1], self.z - p[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Empty,
    Code,
    Data,
    Visualization,
}

/// Summary of what a cell's last execution produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "output", rename_all = "snake_case")]
pub enum Output {
    Display {
        kind: PlotKind,
        axis_names: Vec<String>,
        points: usize,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    source: String,
    kind: CellKind,
    pub outputs: Vec<Output>,
    /// Edited (or never run) since the last successful execution.
    pub dirty: bool,
}

impl Cell {
    pub fn new(id: impl Into<String>, source: impl Into<String>) -> Self {
        let source = source.into();
        Cell {
            id: CellId(id.into()),
            kind: classify_cell(&source),
            source,
            outputs: Vec::new(),
            dirty: true,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn ast(&self) -> CellAst {
        parse_source(&self.source)
    }

    /// Replaces the source, re-derives the kind and marks the cell dirty.
    pub fn set_source(&mut self, source: impl Into<String>) {
        self.source = source.into();
        self.kind = classify_cell(&self.source);
        self.dirty = true;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub id: WindowId,
    pub pose: Pose,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notebook {
    pub id: String,
    pub dialect: String,
    pub windows: Vec<Window>,
}

/// Classifies cell source. Whitespace-only is `Empty`; any plot statement
/// makes it `Visualization`; otherwise any table-producing statement makes
/// it `Data`; everything else is `Code`.
pub fn classify_cell(source: &str) -> CellKind {
    if source.trim().is_empty() {
        return CellKind::Empty;
    }
    classify_ast(&parse_source(source))
}

pub fn classify_ast(ast: &CellAst) -> CellKind {
    let stmts = &ast.statements;
    if stmts.iter().all(|s| matches!(s, Statement::Opaque { text } if text.trim().is_empty())) {
        CellKind::Empty
    } else if stmts.iter().any(Statement::is_display) {
        CellKind::Visualization
    } else if stmts.iter().any(Statement::is_table_statement) {
        CellKind::Data
    } else {
        CellKind::Code
    }
}

impl Notebook {
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.windows.iter().flat_map(|w| w.cells.iter())
    }

    pub fn cell_count(&self) -> usize {
        self.windows.iter().map(|w| w.cells.len()).sum()
    }

    pub fn cell(&self, id: &CellId) -> Option<&Cell> {
        self.cells().find(|c| &c.id == id)
    }

    pub fn cell_mut(&mut self, id: &CellId) -> Option<&mut Cell> {
        self.windows
            .iter_mut()
            .flat_map(|w| w.cells.iter_mut())
            .find(|c| &c.id == id)
    }

    /// Position in global execution order.
    pub fn cell_index(&self, id: &CellId) -> Option<usize> {
        self.cells().position(|c| &c.id == id)
    }

    pub fn window(&self, id: &WindowId) -> Option<&Window> {
        self.windows.iter().find(|w| &w.id == id)
    }

    /// World position of a cell: stacked downward from its window's pose.
    pub fn cell_position(&self, id: &CellId) -> Option<[f64; 3]> {
        self.windows.iter().find_map(|w| {
            w.cells.iter().position(|c| &c.id == id).map(|i| {
                [
                    w.pose.x,
                    w.pose.y - CELL_SPACING * i as f64,
                    w.pose.z,
                ]
            })
        })
    }

    pub fn edit_cell(&mut self, id: &CellId, new_source: &str) -> Result<Cell, NotebookError> {
        let cell = self
            .cell_mut(id)
            .ok_or_else(|| NotebookError::UnknownCell(id.clone()))?;
        cell.set_source(new_source);
        Ok(cell.clone())
    }

    /// Every identifier bound or read anywhere in the notebook.
    pub fn variable_names(&self) -> HashSet<String> {
        self.cells()
            .flat_map(|c| {
                c.ast()
                    .statements
                    .iter()
                    .flat_map(|s| s.names().into_iter().map(str::to_string))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut windows = HashSet::new();
        let mut cells = HashSet::new();
        for (wi, w) in self.windows.iter().enumerate() {
            if !windows.insert(&w.id) {
                return Err(format!("windows[{wi}]: duplicate window id `{}`", w.id));
            }
            if !w.pose.is_finite() {
                return Err(format!("windows[{wi}].pose: non-finite component"));
            }
            if !w.pose.in_arena() {
                return Err(format!("windows[{wi}].pose: outside the {ARENA_HALF_EXTENT} m arena"));
            }
            for (ci, c) in w.cells.iter().enumerate() {
                if !cells.insert(&c.id) {
                    return Err(format!("windows[{wi}].cells[{ci}]: duplicate cell id `{}`", c.id));
                }
            }
        }
        Ok(())
    }

    /// Parses the notebook file format. `location` only labels errors.
    pub fn from_json(text: &str, location: &str) -> Result<Notebook, NotebookError> {
        let file: NotebookFile = serde_json::from_str(text).map_err(|e| NotebookError::Schema {
            location: location.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let nb = Notebook {
            id: file.id,
            dialect: file.dialect,
            windows: file
                .windows
                .into_iter()
                .map(|w| Window {
                    id: WindowId(w.id),
                    pose: w.pose,
                    cells: w.cells.into_iter().map(|c| Cell::new(c.id, c.source)).collect(),
                })
                .collect(),
        };
        nb.validate().map_err(|message| NotebookError::Schema {
            location: location.to_string(),
            line: 0,
            message,
        })?;
        Ok(nb)
    }

    pub fn load(path: &Path) -> Result<Notebook, NotebookError> {
        let location = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| NotebookError::Schema {
            location: location.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        Notebook::from_json(&text, &location)
    }

    /// Serializes to the notebook file format, including derived kinds.
    pub fn to_json(&self) -> String {
        let file = NotebookFile {
            id: self.id.clone(),
            dialect: self.dialect.clone(),
            windows: self
                .windows
                .iter()
                .map(|w| WindowFile {
                    id: w.id.0.clone(),
                    pose: w.pose,
                    cells: w
                        .cells
                        .iter()
                        .map(|c| CellFile {
                            id: c.id.0.clone(),
                            source: c.source.clone(),
                            kind: Some(c.kind),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("notebook serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NotebookFile {
    id: String,
    dialect: String,
    windows: Vec<WindowFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    id: String,
    pose: Pose,
    cells: Vec<CellFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellFile {
    id: String,
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<CellKind>,
}

/// Angular offsets (radians) of `n` windows spread over a half circle,
/// endpoints included; a single window sits at the midpoint.
pub fn semicircle_angles(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = PI / (n - 1) as f64;
            (0..n).map(|i| -FRAC_PI_2 + step * i as f64).collect()
        }
    }
}

/// Places every window on a half circle of `radius` around `center`,
/// each turned to face the center.
pub fn layout_semicircle(
    notebook: &Notebook,
    radius: f64,
    center: Pose,
) -> Result<Vec<Pose>, NotebookError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(NotebookError::NonPositiveRadius(radius));
    }
    if notebook.windows.is_empty() {
        return Err(NotebookError::NoWindows);
    }
    Ok(semicircle_angles(notebook.windows.len())
        .into_iter()
        .map(|a| {
            let heading = center.yaw + a;
            let facing = heading + PI;
            Pose {
                x: center.x + radius * heading.sin(),
                y: center.y,
                z: center.z + radius * heading.cos(),
                yaw: facing.sin().atan2(facing.cos()),
            }
        })
        .collect())
}

/// Applies [`layout_semicircle`] to the notebook's windows in place.
pub fn apply_semicircle_layout(
    notebook: &mut Notebook,
    radius: f64,
    center: Pose,
) -> Result<(), NotebookError> {
    let poses = layout_semicircle(notebook, radius, center)?;
    for (w, p) in notebook.windows.iter_mut().zip(poses) {
        w.pose = p;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn notebook_with_windows(n: usize) -> Notebook {
        Notebook {
            id: "nb".into(),
            dialect: "python".into(),
            windows: (0..n)
                .map(|i| Window {
                    id: WindowId(format!("w{i}")),
                    pose: Pose::default(),
                    cells: vec![Cell::new(format!("c{i}"), "")],
                })
                .collect(),
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_cell("df = load_dataset(\"iris\")"), CellKind::Data);
        assert_eq!(classify_cell("   "), CellKind::Empty);
        assert_eq!(
            classify_cell("df2 = df[df['hue'] <= 3.0]\nplt.scatter(df2['a'], df2['b'])"),
            CellKind::Visualization
        );
        assert_eq!(classify_cell("k = 3"), CellKind::Code);
        assert_eq!(classify_cell("# just words"), CellKind::Code);
        assert_eq!(classify_cell("labels = kmeans(df, k=2)"), CellKind::Code);
        assert_eq!(
            classify_cell("knn_graph(df, ['a', 'b', 'c'], k=2)"),
            CellKind::Visualization
        );
        assert_eq!(classify_cell("\n\t\n"), CellKind::Empty);
    }

    #[test]
    fn edit_rederives_kind_and_sets_dirty() {
        let mut nb = notebook_with_windows(1);
        let id = CellId::new("c0");
        nb.cell_mut(&id).unwrap().dirty = false;
        let cell = nb.edit_cell(&id, "df = load_dataset(\"wine\")").unwrap();
        assert_eq!(cell.kind(), CellKind::Data);
        assert!(cell.dirty);

        nb.cell_mut(&id).unwrap().dirty = false;
        let same = nb.edit_cell(&id, "df = load_dataset(\"wine\")").unwrap();
        assert!(same.dirty, "identical text still marks dirty");

        nb.edit_cell(&id, "k = 3").unwrap();
        assert_eq!(nb.edit_cell(&id, "k = 5").unwrap().kind(), CellKind::Code);

        assert_eq!(
            nb.edit_cell(&CellId::new("nope"), "x"),
            Err(NotebookError::UnknownCell(CellId::new("nope")))
        );
    }

    #[test]
    fn layout_single_window_sits_at_midpoint() {
        let poses = layout_semicircle(&notebook_with_windows(1), 2.0, Pose::default()).unwrap();
        assert_eq!(poses.len(), 1);
        assert!(poses[0].x.abs() < 1e-12);
        assert!((poses[0].z - 2.0).abs() < 1e-12);
    }

    #[test]
    fn layout_three_windows_span_half_circle() {
        let angles = semicircle_angles(3);
        let deg: Vec<f64> = angles.iter().map(|a| a.to_degrees()).collect();
        assert!((deg[0] + 90.0).abs() < 1e-9 && deg[1].abs() < 1e-9 && (deg[2] - 90.0).abs() < 1e-9);
        let poses = layout_semicircle(&notebook_with_windows(3), 2.0, Pose::default()).unwrap();
        for p in &poses {
            assert!((p.x.hypot(p.z) - 2.0).abs() < 1e-12);
            // facing the center
            let back = p.ahead(2.0);
            assert!(back.x.abs() < 1e-9 && back.z.abs() < 1e-9);
        }
    }

    #[test]
    fn layout_fourteen_windows_even_gap() {
        let nb = notebook_with_windows(14);
        let poses = layout_semicircle(&nb, 2.0, Pose::default()).unwrap();
        assert_eq!(poses.len(), 14);
        let gap = 180.0 / 13.0;
        for w in poses.windows(2) {
            let a0 = w[0].x.atan2(w[0].z).to_degrees();
            let a1 = w[1].x.atan2(w[1].z).to_degrees();
            assert!((a1 - a0 - gap).abs() < 1e-9);
        }
        let again = layout_semicircle(&nb, 2.0, Pose::default()).unwrap();
        assert!(poses
            .iter()
            .zip(&again)
            .all(|(a, b)| a.x.to_bits() == b.x.to_bits() && a.z.to_bits() == b.z.to_bits()));
    }

    #[test]
    fn layout_rejects_bad_radius() {
        let nb = notebook_with_windows(2);
        assert_eq!(
            layout_semicircle(&nb, 0.0, Pose::default()),
            Err(NotebookError::NonPositiveRadius(0.0))
        );
        assert!(layout_semicircle(&nb, f64::NAN, Pose::default()).is_err());
        assert_eq!(
            layout_semicircle(&notebook_with_windows(0), 1.0, Pose::default()),
            Err(NotebookError::NoWindows)
        );
    }

    #[test]
    fn file_format_recomputes_kind() {
        let text = r#"{"id":"n","dialect":"python","windows":[{"id":"w","pose":{"x":0,"y":1,"z":2,"yaw":0},
            "cells":[{"id":"a","source":"df = load_dataset(\"wine\")","kind":"Code"},{"id":"b","source":""}]}]}"#;
        let nb = Notebook::from_json(text, "mem").unwrap();
        assert_eq!(nb.cell(&CellId::new("a")).unwrap().kind(), CellKind::Data);
        assert_eq!(nb.cell(&CellId::new("b")).unwrap().kind(), CellKind::Empty);
        let again = Notebook::from_json(&nb.to_json(), "mem").unwrap();
        assert_eq!(again, nb);
    }

    #[test]
    fn file_format_errors_carry_line() {
        let err = Notebook::from_json("{\n\"id\": \"n\",\n\"dialect\": 3}", "bad.json").unwrap_err();
        match err {
            NotebookError::Schema { location, line, .. } => {
                assert_eq!(location, "bad.json");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
        let dup = r#"{"id":"n","dialect":"p","windows":[{"id":"w","pose":{"x":0,"y":0,"z":0,"yaw":0},
            "cells":[{"id":"a","source":""},{"id":"a","source":""}]}]}"#;
        assert!(matches!(Notebook::from_json(dup, "d"), Err(NotebookError::Schema { .. })));
        let far = r#"{"id":"n","dialect":"p","windows":[{"id":"w","pose":{"x":9,"y":0,"z":0,"yaw":0},"cells":[]}]}"#;
        assert!(matches!(Notebook::from_json(far, "d"), Err(NotebookError::Schema { .. })));
    }

    #[test]
    fn cell_positions_stack_downward() {
        let mut nb = notebook_with_windows(1);
        nb.windows[0].cells.push(Cell::new("c1b", "x = 1"));
        nb.windows[0].pose = Pose::new(1.0, 1.5, 0.5, 0.0);
        assert_eq!(nb.cell_position(&CellId::new("c0")), Some([1.0, 1.5, 0.5]));
        assert_eq!(nb.cell_position(&CellId::new("c1b")), Some([1.0, 1.25, 0.5]));
    }
}
