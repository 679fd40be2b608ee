//! Turns artifact state back into cell source.
//!
//! Tables become a literal `pd.DataFrame` over the displayed rows; plots
//! become a literal of their axis columns followed by the plot statement.
//! Re-executing the generated source and extracting again yields exactly the
//! artifact's displayed state, because numbers are written in shortest
//! round-trip form.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::Artifact;
use crate::kernel::{PlotExtract, PlotKind, TableExtract};
use crate::notebook::grammar::{
    render, CellAst, ColorSource, Neighbors, Statement, TableExpr, TableLiteral,
};
use crate::notebook::{Cell, CellId, CellKind, Notebook};
use crate::value::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodegenError {
    #[error("cell `{0}` is not empty")]
    TargetNotEmpty(CellId),
    #[error("artifact did not come from cell `{0}`")]
    OriginMismatch(CellId),
    #[error("cell `{cell}` defines {count} variables; cannot pick one to update")]
    AmbiguousVariable { cell: CellId, count: usize },
    #[error("axis `{0}` has inconsistent values")]
    InconsistentAxis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodegenMode {
    Create,
    Update,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodegenResult {
    pub cell_id: CellId,
    pub new_source: String,
    pub mode: CodegenMode,
    pub variable: String,
}

/// Lowest `dfN` (N >= 1) not in `taken`.
pub fn fresh_name(taken: &HashSet<String>) -> String {
    (1..)
        .map(|n| format!("df{n}"))
        .find(|name| !taken.contains(name))
        .expect("unbounded range")
}

/// Lowest `dfN` not used anywhere in the notebook.
pub fn name_fresh_variable(notebook: &Notebook) -> String {
    fresh_name(&notebook.variable_names())
}

/// Column-major literal of a table. Declared dtypes are only written when
/// there are no rows to infer them from.
pub fn table_literal(table: &TableExtract) -> TableLiteral {
    TableLiteral {
        columns: table
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), table.rows.iter().map(|r| r[i].clone()).collect()))
            .collect(),
        dtypes: table.rows.is_empty().then(|| {
            table
                .columns
                .iter()
                .map(|c| (c.name.clone(), c.dtype))
                .collect()
        }),
    }
}

/// Literal holding each distinct axis column of the plot.
fn plot_literal(plot: &PlotExtract) -> Result<TableLiteral, CodegenError> {
    let mut columns: Vec<(String, Vec<Scalar>)> = Vec::new();
    for (i, name) in plot.axis_names.iter().enumerate() {
        let values: Vec<Scalar> = plot.points.iter().map(|p| Scalar::Number(p[i])).collect();
        match columns.iter().find(|(n, _)| n == name) {
            Some((_, existing)) => {
                if existing.iter().zip(&values).any(|(a, b)| !a.identical(b)) {
                    return Err(CodegenError::InconsistentAxis(name.clone()));
                }
            }
            None => columns.push((name.clone(), values)),
        }
    }
    let dtypes = plot.points.is_empty().then(|| {
        columns
            .iter()
            .map(|(n, _)| (n.clone(), crate::value::DType::Number))
            .collect()
    });
    Ok(TableLiteral { columns, dtypes })
}

fn plot_statement(plot: &PlotExtract, source: &str) -> Statement {
    let color = if plot.colors.iter().any(|&c| c != 0) {
        ColorSource::Labels(plot.colors.clone())
    } else {
        ColorSource::None
    };
    match plot.kind {
        PlotKind::Scatter2D | PlotKind::Scatter3D => Statement::PlotScatter {
            source: source.to_string(),
            axes: plot.axis_names.clone(),
            color,
        },
        PlotKind::NodeLink3D => Statement::KnnGraph {
            source: source.to_string(),
            axes: plot.axis_names.clone(),
            neighbors: Neighbors::Edges(plot.edges.clone()),
            color,
        },
    }
}

/// Statements that rebuild the artifact's displayed state under `variable`.
pub fn artifact_statements(artifact: &Artifact, variable: &str) -> Result<Vec<Statement>, CodegenError> {
    Ok(match artifact {
        Artifact::Table(t) => vec![Statement::Assign {
            target: variable.to_string(),
            value: TableExpr::Literal(table_literal(&t.displayed())),
        }],
        Artifact::Vis(v) => vec![
            Statement::Assign {
                target: variable.to_string(),
                value: TableExpr::Literal(plot_literal(&v.extract)?),
            },
            plot_statement(&v.extract, variable),
        ],
    })
}

fn render_statements(stmts: Vec<Statement>) -> String {
    render(&CellAst { statements: stmts })
}

/// Source for putting `artifact` into the empty cell `target`.
pub fn generate_create(
    artifact: &Artifact,
    notebook: &Notebook,
    target: &Cell,
) -> Result<CodegenResult, CodegenError> {
    if target.kind() != CellKind::Empty {
        return Err(CodegenError::TargetNotEmpty(target.id.clone()));
    }
    let variable = name_fresh_variable(notebook);
    Ok(CodegenResult {
        cell_id: target.id.clone(),
        new_source: render_statements(artifact_statements(artifact, &variable)?),
        mode: CodegenMode::Create,
        variable,
    })
}

/// Source for putting `artifact` back into its origin cell: the cell's
/// unrecognized lines are kept, followed by a literal reassignment of the
/// variable the cell defines. A plot cell that defines no variable gets a
/// fresh one.
pub fn generate_update(
    artifact: &Artifact,
    notebook: &Notebook,
    origin: &Cell,
) -> Result<CodegenResult, CodegenError> {
    if artifact.origin_cell() != Some(&origin.id) {
        return Err(CodegenError::OriginMismatch(origin.id.clone()));
    }
    let ast = origin.ast();
    let vars = ast.defined_vars();
    let variable = match (vars.as_slice(), artifact) {
        ([single], _) => single.clone(),
        ([], Artifact::Vis(_)) => name_fresh_variable(notebook),
        _ => {
            return Err(CodegenError::AmbiguousVariable {
                cell: origin.id.clone(),
                count: vars.len(),
            })
        }
    };
    let mut stmts: Vec<Statement> = ast
        .statements
        .into_iter()
        .filter(|s| matches!(s, Statement::Opaque { text } if !text.trim().is_empty()))
        .collect();
    stmts.extend(artifact_statements(artifact, &variable)?);
    Ok(CodegenResult {
        cell_id: origin.id.clone(),
        new_source: render_statements(stmts),
        mode: CodegenMode::Update,
        variable,
    })
}
