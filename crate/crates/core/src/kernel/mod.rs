//! Cell execution and artifact extraction.
//!
//! A [`KernelBackend`] runs cell source and hands back the data needed to
//! build artifacts: tables as rows and columns, plots as points, axis names
//! and cluster colors. [`MockKernel`] is the default, fully deterministic
//! backend; [`wire`] speaks the newline-delimited JSON protocol used by
//! external backends.

pub mod cluster;
pub mod datasets;
pub mod mock;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{KernelValue, MockKernel};

use crate::notebook::CellId;
use crate::value::{DType, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail")]
pub enum KernelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is not a table")]
    NotTabular(String),
    #[error("cell `{0}` has no visualization output")]
    NotVisualizationCell(CellId),
    #[error("cell `{0}` has not been executed")]
    NotExecuted(CellId),
    #[error("backend does not support {0}")]
    Unsupported(String),
    #[error("kernel protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub dtype: DType,
}

impl Column {
    pub fn new(name: impl Into<String>, dtype: DType) -> Self {
        Column {
            name: name.into(),
            dtype,
        }
    }
}

/// Rows and columns of a tabular value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TableExtract {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Scalar>>,
}

impl TableExtract {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    /// Checks row arity and per-column dtype consistency.
    pub fn validate(&self) -> Result<(), String> {
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(format!(
                    "row {r} has {} values for {} columns",
                    row.len(),
                    self.columns.len()
                ));
            }
            for (v, col) in row.iter().zip(&self.columns) {
                if v.dtype() != col.dtype {
                    return Err(format!("row {r}: column `{}` expects {:?}", col.name, col.dtype));
                }
                if let Scalar::Number(n) = v {
                    if !n.is_finite() {
                        return Err(format!("row {r}: non-finite value in `{}`", col.name));
                    }
                }
            }
        }
        Ok(())
    }

    /// Structural equality with bitwise number comparison.
    pub fn identical(&self, other: &TableExtract) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.identical(y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlotKind {
    Scatter2D,
    Scatter3D,
    NodeLink3D,
}

impl PlotKind {
    pub fn axis_count(self) -> usize {
        match self {
            PlotKind::Scatter2D => 2,
            PlotKind::Scatter3D | PlotKind::NodeLink3D => 3,
        }
    }
}

/// Points, axis names, cluster colors and (for node-link plots) edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotExtract {
    pub kind: PlotKind,
    pub axis_names: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub colors: Vec<u32>,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

impl PlotExtract {
    pub fn validate(&self) -> Result<(), String> {
        let arity = self.kind.axis_count();
        if self.axis_names.len() != arity {
            return Err(format!("{:?} needs {arity} axes, has {}", self.kind, self.axis_names.len()));
        }
        if self.points.len() != self.colors.len() {
            return Err(format!(
                "{} points but {} colors",
                self.points.len(),
                self.colors.len()
            ));
        }
        if let Some(p) = self.points.iter().position(|p| p.len() != arity) {
            return Err(format!("point {p} has wrong arity"));
        }
        if self.kind != PlotKind::NodeLink3D && !self.edges.is_empty() {
            return Err("edges on a scatter plot".into());
        }
        if let Some(e) = self
            .edges
            .iter()
            .find(|(a, b)| *a >= self.points.len() || *b >= self.points.len())
        {
            return Err(format!("edge {e:?} references a missing point"));
        }
        Ok(())
    }

    pub fn identical(&self, other: &PlotExtract) -> bool {
        self.kind == other.kind
            && self.axis_names == other.axis_names
            && self.colors == other.colors
            && self.edges == other.edges
            && self.points.len() == other.points.len()
            && self.points.iter().zip(&other.points).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    pub fn summary(&self) -> DisplaySummary {
        DisplaySummary {
            kind: self.kind,
            axis_names: self.axis_names.clone(),
            points: self.points.len(),
        }
    }
}

/// Static render descriptor for a cell's display output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplaySummary {
    pub kind: PlotKind,
    pub axis_names: Vec<String>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub cell_id: CellId,
    pub status: ExecStatus,
    pub defined_vars: Vec<String>,
    pub display: Option<DisplaySummary>,
}

impl ExecResult {
    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }

    pub fn failed(cell_id: CellId, message: impl Into<String>) -> Self {
        ExecResult {
            cell_id,
            status: ExecStatus::Error(message.into()),
            defined_vars: Vec::new(),
            display: None,
        }
    }
}

/// Full kernel state, for atomic rollback and session persistence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelSnapshot {
    pub env: BTreeMap<String, KernelValue>,
    /// Every successfully executed cell, with its display if it produced one.
    pub displays: BTreeMap<CellId, Option<PlotExtract>>,
}

/// An execution backend. Driven from one thread at a time.
pub trait KernelBackend: Send {
    /// Runs `source` as cell `cell`. Failures are reported in the result and
    /// leave the variable environment untouched.
    fn execute(&mut self, cell: &CellId, source: &str) -> ExecResult;

    fn extract_table(&mut self, var: &str) -> Result<TableExtract, KernelError>;

    /// Display produced by the cell's last successful execution.
    fn extract_plot(&mut self, cell: &CellId) -> Result<PlotExtract, KernelError>;

    fn reset(&mut self);

    fn snapshot(&self) -> Result<KernelSnapshot, KernelError> {
        Err(KernelError::Unsupported("snapshot".into()))
    }

    fn restore(&mut self, _snapshot: &KernelSnapshot) -> Result<(), KernelError> {
        Err(KernelError::Unsupported("restore".into()))
    }
}
