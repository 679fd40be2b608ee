//! In-process interpreter for the cell grammar.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cluster::{self, ClusterError};
use super::{
    datasets, Column, ExecResult, ExecStatus, KernelBackend, KernelError, KernelSnapshot,
    PlotExtract, PlotKind, TableExtract,
};
use crate::notebook::grammar::{
    parse_source, ColorSource, IntArg, Neighbors, Statement, TableExpr, TableLiteral,
};
use crate::notebook::CellId;
use crate::value::{DType, Scalar};

/// Upper bound on Lloyd iterations for the `kmeans` builtin.
pub const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum KernelValue {
    Table(TableExtract),
    Labels(Vec<u32>),
    Int(i64),
}

#[derive(Debug, Clone, Default)]
pub struct MockKernel {
    state: KernelSnapshot,
}

type Env = BTreeMap<String, KernelValue>;

impl MockKernel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn env(&self) -> &BTreeMap<String, KernelValue> {
        &self.state.env
    }
}

fn lookup<'a>(env: &'a Env, name: &str) -> Result<&'a KernelValue, String> {
    env.get(name)
        .ok_or_else(|| format!("undefined variable `{name}`"))
}

fn table<'a>(env: &'a Env, name: &str) -> Result<&'a TableExtract, String> {
    match lookup(env, name)? {
        KernelValue::Table(t) => Ok(t),
        _ => Err(format!("`{name}` is not a table")),
    }
}

fn column_index(t: &TableExtract, var: &str, col: &str) -> Result<usize, String> {
    t.column_index(col)
        .ok_or_else(|| format!("`{var}` has no column `{col}`"))
}

fn numeric_column(t: &TableExtract, var: &str, col: &str) -> Result<Vec<f64>, String> {
    let i = column_index(t, var, col)?;
    if t.columns[i].dtype != DType::Number {
        return Err(format!("column `{col}` is not numeric"));
    }
    Ok(t.rows.iter().map(|r| r[i].as_number().unwrap_or(f64::NAN)).collect())
}

fn resolve_int(env: &Env, arg: &IntArg) -> Result<i64, String> {
    match arg {
        IntArg::Literal(v) => Ok(*v),
        IntArg::Var(name) => match lookup(env, name)? {
            KernelValue::Int(v) => Ok(*v),
            _ => Err(format!("`{name}` is not an integer")),
        },
    }
}

fn resolve_colors(env: &Env, color: &ColorSource, n: usize) -> Result<Vec<u32>, String> {
    let labels = match color {
        ColorSource::None => return Ok(vec![0; n]),
        ColorSource::Var(name) => match lookup(env, name)? {
            KernelValue::Labels(l) => l.clone(),
            _ => return Err(format!("`{name}` is not a label vector")),
        },
        ColorSource::Labels(l) => l.clone(),
    };
    if labels.len() != n {
        return Err(format!("{} colors for {n} points", labels.len()));
    }
    Ok(labels)
}

fn cluster_err(e: ClusterError) -> String {
    e.to_string()
}

pub(crate) fn eval_literal(lit: &TableLiteral) -> Result<TableExtract, String> {
    let n = lit.columns.first().map_or(0, |(_, v)| v.len());
    let mut columns = Vec::with_capacity(lit.columns.len());
    for (i, (name, values)) in lit.columns.iter().enumerate() {
        if lit.columns[..i].iter().any(|(other, _)| other == name) {
            return Err(format!("duplicate column `{name}`"));
        }
        if values.len() != n {
            return Err("columns have different lengths".into());
        }
        let declared = lit
            .dtypes
            .as_ref()
            .and_then(|d| d.iter().find(|(c, _)| c == name).map(|(_, t)| *t));
        let dtype = declared
            .or_else(|| values.first().map(Scalar::dtype))
            .unwrap_or(DType::Number);
        if values.iter().any(|v| v.dtype() != dtype) {
            return Err(format!("column `{name}` mixes value types"));
        }
        columns.push(Column::new(name.clone(), dtype));
    }
    if let Some(d) = &lit.dtypes {
        if let Some((bad, _)) = d.iter().find(|(c, _)| !lit.columns.iter().any(|(n, _)| n == c)) {
            return Err(format!("astype names unknown column `{bad}`"));
        }
    }
    let rows = (0..n)
        .map(|r| lit.columns.iter().map(|(_, v)| v[r].clone()).collect())
        .collect();
    Ok(TableExtract { columns, rows })
}

/// Runs one statement against `env`, returning any display it produces.
fn run_statement(env: &mut Env, stmt: &Statement) -> Result<Option<PlotExtract>, String> {
    match stmt {
        Statement::LoadDataset { target, dataset } => {
            let t = datasets::load(dataset).ok_or_else(|| format!("unknown dataset `{dataset}`"))?;
            env.insert(target.clone(), KernelValue::Table(t));
        }
        Statement::Assign { target, value } => {
            let v = match value {
                TableExpr::Var(src) => lookup(env, src)?.clone(),
                TableExpr::Literal(lit) => KernelValue::Table(eval_literal(lit)?),
            };
            env.insert(target.clone(), v);
        }
        Statement::Filter {
            target,
            source,
            column,
            cmp,
            threshold,
        } => {
            let t = table(env, source)?;
            let c = column_index(t, source, column)?;
            if t.columns[c].dtype != threshold.dtype() || (cmp.is_ordered() && threshold.dtype() == DType::Text) {
                return Err(format!("cannot compare column `{column}` with {threshold:?} using {cmp}"));
            }
            let rows = t
                .rows
                .iter()
                .filter(|r| cmp.eval(&r[c], threshold) == Some(true))
                .cloned()
                .collect();
            let out = TableExtract {
                columns: t.columns.clone(),
                rows,
            };
            env.insert(target.clone(), KernelValue::Table(out));
        }
        Statement::SelectCols {
            target,
            source,
            columns,
        } => {
            let t = table(env, source)?;
            let idx = columns
                .iter()
                .map(|c| column_index(t, source, c))
                .collect::<Result<Vec<_>, _>>()?;
            let out = TableExtract {
                columns: idx.iter().map(|&i| t.columns[i].clone()).collect(),
                rows: t
                    .rows
                    .iter()
                    .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                    .collect(),
            };
            env.insert(target.clone(), KernelValue::Table(out));
        }
        Statement::KMeans { target, source, k } => {
            let t = table(env, source)?;
            let numeric: Vec<usize> = (0..t.columns.len())
                .filter(|&i| t.columns[i].dtype == DType::Number)
                .collect();
            if numeric.is_empty() {
                return Err(format!("`{source}` has no numeric columns"));
            }
            let points: Vec<Vec<f64>> = t
                .rows
                .iter()
                .map(|r| numeric.iter().map(|&i| r[i].as_number().unwrap_or(f64::NAN)).collect())
                .collect();
            let k = resolve_int(env, k)?;
            let k = usize::try_from(k).map_err(|_| format!("k must be positive, got {k}"))?;
            let labels = cluster::kmeans(&points, k, KMEANS_MAX_ITERS).map_err(cluster_err)?;
            env.insert(target.clone(), KernelValue::Labels(labels));
        }
        Statement::ParamDecl { name, value, range } => {
            if let Some((lo, hi)) = range {
                if value < lo || value > hi {
                    return Err(format!("`{name}` = {value} is outside its range {lo}..{hi}"));
                }
            }
            env.insert(name.clone(), KernelValue::Int(*value));
        }
        Statement::PlotScatter {
            source,
            axes,
            color,
        } => {
            let t = table(env, source)?;
            let cols = axes
                .iter()
                .map(|a| numeric_column(t, source, a))
                .collect::<Result<Vec<_>, _>>()?;
            let n = t.rows.len();
            let points = (0..n).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
            let kind = if axes.len() == 3 {
                PlotKind::Scatter3D
            } else {
                PlotKind::Scatter2D
            };
            return Ok(Some(PlotExtract {
                kind,
                axis_names: axes.clone(),
                points,
                colors: resolve_colors(env, color, n)?,
                edges: Vec::new(),
            }));
        }
        Statement::KnnGraph {
            source,
            axes,
            neighbors,
            color,
        } => {
            let t = table(env, source)?;
            let cols = axes
                .iter()
                .map(|a| numeric_column(t, source, a))
                .collect::<Result<Vec<_>, _>>()?;
            let n = t.rows.len();
            let points: Vec<Vec<f64>> = (0..n).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
            let edges = match neighbors {
                Neighbors::K(k) => {
                    let k = resolve_int(env, k)?;
                    let k = usize::try_from(k).map_err(|_| format!("k must be non-negative, got {k}"))?;
                    cluster::knn_graph(&points, k).map_err(cluster_err)?
                }
                Neighbors::Edges(e) => {
                    if let Some(bad) = e.iter().find(|(a, b)| *a >= n || *b >= n) {
                        return Err(format!("edge {bad:?} references a missing point"));
                    }
                    e.clone()
                }
            };
            return Ok(Some(PlotExtract {
                kind: PlotKind::NodeLink3D,
                axis_names: axes.clone(),
                colors: resolve_colors(env, color, n)?,
                points,
                edges,
            }));
        }
        Statement::Opaque { .. } => {}
    }
    Ok(None)
}

impl KernelBackend for MockKernel {
    fn execute(&mut self, cell: &CellId, source: &str) -> ExecResult {
        let ast = parse_source(source);
        let mut env = self.state.env.clone();
        let mut display = None;
        for stmt in &ast.statements {
            match run_statement(&mut env, stmt) {
                Ok(Some(d)) => display = Some(d),
                Ok(None) => {}
                Err(message) => return ExecResult::failed(cell.clone(), message),
            }
        }
        self.state.env = env;
        let summary = display.as_ref().map(PlotExtract::summary);
        self.state.displays.insert(cell.clone(), display);
        ExecResult {
            cell_id: cell.clone(),
            status: ExecStatus::Ok,
            defined_vars: ast.defined_vars(),
            display: summary,
        }
    }

    fn extract_table(&mut self, var: &str) -> Result<TableExtract, KernelError> {
        match self.state.env.get(var) {
            Some(KernelValue::Table(t)) => Ok(t.clone()),
            Some(_) => Err(KernelError::NotTabular(var.to_string())),
            None => Err(KernelError::UnknownVariable(var.to_string())),
        }
    }

    fn extract_plot(&mut self, cell: &CellId) -> Result<PlotExtract, KernelError> {
        match self.state.displays.get(cell) {
            Some(Some(p)) => Ok(p.clone()),
            Some(None) => Err(KernelError::NotVisualizationCell(cell.clone())),
            None => Err(KernelError::NotExecuted(cell.clone())),
        }
    }

    fn reset(&mut self) {
        self.state = KernelSnapshot::default();
    }

    fn snapshot(&self) -> Result<KernelSnapshot, KernelError> {
        Ok(self.state.clone())
    }

    fn restore(&mut self, snapshot: &KernelSnapshot) -> Result<(), KernelError> {
        self.state = snapshot.clone();
        Ok(())
    }
}
