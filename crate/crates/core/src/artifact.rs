//! Embodied artifacts: tables and visualizations pulled out of cells.
//!
//! Table edits are non-destructive. The base extract never changes; the
//! displayed rows are recomputed from exclusions, filters and the sort state
//! every time they are read. Rows are identified by their index in the base
//! extract, which is what lets a point removed from a derived visualization
//! map back to a table row.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Column, PlotExtract, PlotKind, TableExtract};
use crate::notebook::{CellId, Pose};
use crate::value::{Comparator, DType, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArtifactError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("comparator `{cmp}` cannot compare column `{column}` with {threshold}")]
    TypeMismatch {
        column: String,
        cmp: Comparator,
        threshold: Scalar,
    },
    #[error("columns must be selected before merging")]
    ColumnsNotSelected,
    #[error("column `{0}` is not numeric")]
    NonNumeric(String),
    #[error("cannot merge a column with itself")]
    SameColumn,
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("axis `{0}` is already plotted")]
    DuplicateAxis(String),
    #[error("axis removal needs a 3D scatter plot")]
    NotThreeD,
    #[error("index {0} is out of range")]
    BadIndex(usize),
    #[error("visualization was not derived from this table")]
    OriginMismatch,
    #[error("unknown artifact {0}")]
    UnknownArtifact(ArtifactId),
    #[error("artifact {0} is not a table")]
    NotATable(ArtifactId),
    #[error("artifact {0} is not a visualization")]
    NotAVis(ArtifactId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArtifactId(pub u64);

impl fmt::Display for ArtifactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Which of the two Separated-mode spaces an artifact lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    NotebookSpace,
    ArtifactSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortState {
    pub column: String,
    pub direction: SortDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub cmp: Comparator,
    pub threshold: Scalar,
}

/// A pulled-out cell link, drawn as a line between cell and artifact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub cell_id: CellId,
    pub artifact_id: ArtifactId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableArtifact {
    pub id: ArtifactId,
    pub origin_cell: Option<CellId>,
    pub extract: TableExtract,
    pub sort: Option<SortState>,
    pub filters: Vec<RowFilter>,
    /// Base row ids removed by applying a visualization.
    pub excluded_rows: BTreeSet<usize>,
    pub selected_columns: BTreeSet<String>,
    /// Columns currently feeding a visualization ("marked in blue").
    pub vis_columns: BTreeSet<String>,
    pub pose: Pose,
    pub space: Option<Space>,
}

impl TableArtifact {
    pub fn new(id: ArtifactId, origin_cell: Option<CellId>, extract: TableExtract, pose: Pose) -> Self {
        TableArtifact {
            id,
            origin_cell,
            extract,
            sort: None,
            filters: Vec::new(),
            excluded_rows: BTreeSet::new(),
            selected_columns: BTreeSet::new(),
            vis_columns: BTreeSet::new(),
            pose,
            space: None,
        }
    }

    fn column(&self, name: &str) -> Result<(usize, &Column), ArtifactError> {
        self.extract
            .columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.name == name)
            .ok_or_else(|| ArtifactError::UnknownColumn(name.to_string()))
    }

    /// Base row ids in display order.
    pub fn displayed_row_ids(&self) -> Vec<usize> {
        let filters: Vec<(usize, &RowFilter)> = self
            .filters
            .iter()
            .filter_map(|f| self.extract.column_index(&f.column).map(|i| (i, f)))
            .collect();
        let rows = &self.extract.rows;
        let mut ids: Vec<usize> = (0..rows.len())
            .filter(|r| !self.excluded_rows.contains(r))
            .filter(|&r| {
                filters
                    .iter()
                    .all(|(c, f)| f.cmp.eval(&rows[r][*c], &f.threshold) == Some(true))
            })
            .collect();
        if let Some(sort) = &self.sort {
            if let Some(c) = self.extract.column_index(&sort.column) {
                ids.sort_by(|&a, &b| {
                    let o = rows[a][c].sort_cmp(&rows[b][c]);
                    match sort.direction {
                        SortDirection::Asc => o,
                        SortDirection::Desc => o.reverse(),
                    }
                });
            }
        }
        ids
    }

    /// The table as currently shown.
    pub fn displayed(&self) -> TableExtract {
        TableExtract {
            columns: self.extract.columns.clone(),
            rows: self
                .displayed_row_ids()
                .into_iter()
                .map(|r| self.extract.rows[r].clone())
                .collect(),
        }
    }

    fn numeric_column(&self, name: &str) -> Result<usize, ArtifactError> {
        let (i, col) = self.column(name)?;
        if col.dtype != DType::Number {
            return Err(ArtifactError::NonNumeric(name.to_string()));
        }
        Ok(i)
    }

    fn number_at(&self, row: usize, col: usize) -> f64 {
        self.extract.rows[row][col]
            .as_number()
            .expect("numeric column holds numbers")
    }

    /// Stable sort of the display; replaces any previous sort.
    pub fn sort_by(&mut self, column: &str, direction: SortDirection) -> Result<(), ArtifactError> {
        self.column(column)?;
        self.sort = Some(SortState {
            column: column.to_string(),
            direction,
        });
        Ok(())
    }

    pub fn add_filter(&mut self, column: &str, cmp: Comparator, threshold: Scalar) -> Result<(), ArtifactError> {
        let (_, col) = self.column(column)?;
        if threshold.dtype() != col.dtype || (cmp.is_ordered() && col.dtype != DType::Number) {
            return Err(ArtifactError::TypeMismatch {
                column: column.to_string(),
                cmp,
                threshold,
            });
        }
        if let Scalar::Number(n) = threshold {
            if !n.is_finite() {
                return Err(ArtifactError::TypeMismatch {
                    column: column.to_string(),
                    cmp,
                    threshold,
                });
            }
        }
        self.filters.push(RowFilter {
            column: column.to_string(),
            cmp,
            threshold,
        });
        Ok(())
    }

    pub fn remove_filter(&mut self, index: usize) -> Result<RowFilter, ArtifactError> {
        if index >= self.filters.len() {
            return Err(ArtifactError::BadIndex(index));
        }
        Ok(self.filters.remove(index))
    }

    /// Toggles selection; returns whether the column is now selected.
    pub fn toggle_column(&mut self, column: &str) -> Result<bool, ArtifactError> {
        self.column(column)?;
        if self.selected_columns.remove(column) {
            Ok(false)
        } else {
            self.selected_columns.insert(column.to_string());
            Ok(true)
        }
    }

    /// Builds a 2D scatter from two selected numeric columns over the
    /// displayed rows. Both columns become marked and leave the selection.
    pub fn merge_columns(
        &mut self,
        col_a: &str,
        col_b: &str,
        id: ArtifactId,
        pose: Pose,
    ) -> Result<VisArtifact, ArtifactError> {
        if col_a == col_b {
            return Err(ArtifactError::SameColumn);
        }
        self.column(col_a)?;
        self.column(col_b)?;
        if !self.selected_columns.contains(col_a) || !self.selected_columns.contains(col_b) {
            return Err(ArtifactError::ColumnsNotSelected);
        }
        let a = self.numeric_column(col_a)?;
        let b = self.numeric_column(col_b)?;
        let row_ids = self.displayed_row_ids();
        let points: Vec<Vec<f64>> = row_ids
            .iter()
            .map(|&r| vec![self.number_at(r, a), self.number_at(r, b)])
            .collect();
        for c in [col_a, col_b] {
            self.selected_columns.remove(c);
            self.vis_columns.insert(c.to_string());
        }
        Ok(VisArtifact {
            id,
            origin_cell: None,
            origin_table: Some(self.id),
            extract: PlotExtract {
                kind: PlotKind::Scatter2D,
                axis_names: vec![col_a.to_string(), col_b.to_string()],
                colors: vec![0; points.len()],
                points,
                edges: Vec::new(),
            },
            row_ids,
            source_rows: self.extract.rows.len(),
            dropped_rows: BTreeSet::new(),
            pose,
            space: self.space,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisArtifact {
    pub id: ArtifactId,
    pub origin_cell: Option<CellId>,
    /// Table this visualization was merged from, while still tethered.
    pub origin_table: Option<ArtifactId>,
    pub extract: PlotExtract,
    /// Source row id of each point.
    pub row_ids: Vec<usize>,
    /// Row count of the source the points were drawn from.
    pub source_rows: usize,
    /// Row ids whose points were removed.
    pub dropped_rows: BTreeSet<usize>,
    pub pose: Pose,
    pub space: Option<Space>,
}

impl VisArtifact {
    /// A visualization pulled from a cell; point `i` is source row `i`.
    pub fn from_cell(id: ArtifactId, cell: CellId, extract: PlotExtract, pose: Pose) -> Self {
        let n = extract.points.len();
        VisArtifact {
            id,
            origin_cell: Some(cell),
            origin_table: None,
            extract,
            row_ids: (0..n).collect(),
            source_rows: n,
            dropped_rows: BTreeSet::new(),
            pose,
            space: None,
        }
    }

    pub fn kind(&self) -> PlotKind {
        self.extract.kind
    }

    /// Turns a 2D scatter into a 3D scatter using `column` of `table`,
    /// matching points to table rows by row id.
    pub fn add_axis(&mut self, table: &TableArtifact, column: &str) -> Result<(), ArtifactError> {
        if self.extract.kind != PlotKind::Scatter2D {
            return Err(ArtifactError::ArityMismatch(format!(
                "{:?} already has {} axes",
                self.extract.kind,
                self.extract.kind.axis_count()
            )));
        }
        let col = table.numeric_column(column)?;
        if self.extract.axis_names.iter().any(|a| a == column) {
            return Err(ArtifactError::DuplicateAxis(column.to_string()));
        }
        let base_rows = table.extract.rows.len();
        if self.origin_table != Some(table.id) && self.source_rows != base_rows {
            return Err(ArtifactError::ArityMismatch(format!(
                "visualization covers {} rows, table has {base_rows}",
                self.source_rows
            )));
        }
        if self.row_ids.iter().any(|&r| r >= base_rows) {
            return Err(ArtifactError::ArityMismatch("point without a matching row".into()));
        }
        for (p, &r) in self.extract.points.iter_mut().zip(&self.row_ids) {
            p.push(table.number_at(r, col));
        }
        self.extract.axis_names.push(column.to_string());
        self.extract.kind = PlotKind::Scatter3D;
        Ok(())
    }

    pub fn remove_axis(&mut self, index: usize) -> Result<String, ArtifactError> {
        if self.extract.kind != PlotKind::Scatter3D {
            return Err(ArtifactError::NotThreeD);
        }
        if index >= self.extract.axis_names.len() {
            return Err(ArtifactError::BadIndex(index));
        }
        for p in &mut self.extract.points {
            p.remove(index);
        }
        self.extract.kind = PlotKind::Scatter2D;
        Ok(self.extract.axis_names.remove(index))
    }

    /// Removes a point, its color and every edge touching it.
    pub fn remove_point(&mut self, index: usize) -> Result<(), ArtifactError> {
        if index >= self.extract.points.len() {
            return Err(ArtifactError::BadIndex(index));
        }
        self.extract.points.remove(index);
        self.extract.colors.remove(index);
        let row = self.row_ids.remove(index);
        self.dropped_rows.insert(row);
        let shift = |v: usize| if v > index { v - 1 } else { v };
        self.extract.edges = self
            .extract
            .edges
            .iter()
            .filter(|(a, b)| *a != index && *b != index)
            .map(|&(a, b)| (shift(a), shift(b)))
            .collect();
        Ok(())
    }

    /// Hides the rows whose points were removed and cuts the tether.
    pub fn apply_to_table(&mut self, table: &mut TableArtifact) -> Result<usize, ArtifactError> {
        if self.origin_table != Some(table.id) {
            return Err(ArtifactError::OriginMismatch);
        }
        let before = table.excluded_rows.len();
        table.excluded_rows.extend(self.dropped_rows.iter().copied());
        self.origin_table = None;
        Ok(table.excluded_rows.len() - before)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Artifact {
    Table(TableArtifact),
    Vis(VisArtifact),
}

impl Artifact {
    pub fn id(&self) -> ArtifactId {
        match self {
            Artifact::Table(t) => t.id,
            Artifact::Vis(v) => v.id,
        }
    }

    pub fn origin_cell(&self) -> Option<&CellId> {
        match self {
            Artifact::Table(t) => t.origin_cell.as_ref(),
            Artifact::Vis(v) => v.origin_cell.as_ref(),
        }
    }

    pub fn clear_origin_cell(&mut self) {
        match self {
            Artifact::Table(t) => t.origin_cell = None,
            Artifact::Vis(v) => v.origin_cell = None,
        }
    }

    pub fn pose(&self) -> Pose {
        match self {
            Artifact::Table(t) => t.pose,
            Artifact::Vis(v) => v.pose,
        }
    }

    pub fn set_pose(&mut self, pose: Pose) {
        match self {
            Artifact::Table(t) => t.pose = pose,
            Artifact::Vis(v) => v.pose = pose,
        }
    }

    pub fn space(&self) -> Option<Space> {
        match self {
            Artifact::Table(t) => t.space,
            Artifact::Vis(v) => v.space,
        }
    }

    pub fn set_space(&mut self, space: Option<Space>) {
        match self {
            Artifact::Table(t) => t.space = space,
            Artifact::Vis(v) => v.space = space,
        }
    }

    pub fn as_table(&self) -> Option<&TableArtifact> {
        match self {
            Artifact::Table(t) => Some(t),
            Artifact::Vis(_) => None,
        }
    }

    pub fn as_vis(&self) -> Option<&VisArtifact> {
        match self {
            Artifact::Vis(v) => Some(v),
            Artifact::Table(_) => None,
        }
    }
}
