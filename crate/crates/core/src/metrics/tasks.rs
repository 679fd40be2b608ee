//! Headless versions of the two study tasks, run against the bundled
//! 14-window, 30-cell study notebook.
//!
//! Instructed: load the wine table, report its shape and the alcohol
//! minimum and maximum found by sorting, turn the alcohol/color-intensity
//! scatter into a 3D plot by adding the hue column, and sync it into an
//! empty cell.
//!
//! Exploratory: filter sepal-width outliers out of the iris table, put it
//! back into its origin cell, then sweep the declared K-Means and KNN
//! parameter ranges and report the best pair.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{compute_metrics, MetricsReport};
use crate::artifact::{Artifact, ArtifactId, SortDirection};
use crate::kernel::cluster::{kmeans, knn_graph};
use crate::kernel::mock::KMEANS_MAX_ITERS;
use crate::kernel::{datasets, PlotExtract};
use crate::notebook::grammar::{parse_line, Statement};
use crate::notebook::{CellId, Notebook, WindowId};
use crate::session::Session;
use crate::value::{Comparator, Scalar};
use crate::workspace::{
    Command, EngineConfig, EventKind, Hand, HeldItem, Mode, ProvenanceEvent, RegionId, WorkspaceState,
};

pub const STUDY_NOTEBOOK_JSON: &str = include_str!("../../data/study_notebook.json");

/// Simulated time between two scripted actions.
pub const STEP_MS: u64 = 1_500;
const LOOK_DWELL_MS: u64 = 800;

/// Exploratory outlier predicate: rows kept satisfy both bounds.
pub const SEPAL_WIDTH_MIN: f64 = 2.1;
pub const SEPAL_WIDTH_MAX: f64 = 4.0;
/// Columns plotted by the node-link cell.
pub const KNN_AXES: [&str; 3] = ["sepal_length", "petal_length", "petal_width"];

pub fn study_notebook() -> Notebook {
    Notebook::from_json(STUDY_NOTEBOOK_JSON, "study_notebook.json").expect("bundled notebook is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Instructed,
    Exploratory,
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "instructed" => Ok(TaskKind::Instructed),
            "exploratory" => Ok(TaskKind::Exploratory),
            other => Err(format!("unknown task `{other}` (expected instructed or exploratory)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("script step {step} ({action}) failed: {message}")]
    ScriptStepFailed {
        step: usize,
        action: String,
        message: String,
    },
}

/// Score of one point of the exploratory parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k_means: i64,
    pub k_nn: i64,
    pub silhouette: f64,
    /// Every cluster's induced neighbor graph is connected.
    pub clusters_connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub kind: TaskKind,
    pub mode: Mode,
    pub log: Vec<ProvenanceEvent>,
    pub report: MetricsReport,
    pub answers: BTreeMap<String, Value>,
    pub ground_truth: BTreeMap<String, Value>,
    pub final_state: WorkspaceState,
    pub state_hash: String,
    pub sweep: Vec<SweepPoint>,
}

struct Driver {
    session: Session,
    t: u64,
    step: usize,
    answers: BTreeMap<String, Value>,
}

impl Driver {
    fn fail(&self, action: &str, message: impl Into<String>) -> TaskError {
        TaskError::ScriptStepFailed {
            step: self.step,
            action: action.to_string(),
            message: message.into(),
        }
    }

    fn act(&mut self, command: Command) -> Result<Vec<ProvenanceEvent>, TaskError> {
        self.step += 1;
        self.t += STEP_MS;
        let action = serde_json::to_value(&command)
            .ok()
            .and_then(|v| v.get("op").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_default();
        self.session
            .dispatch(&command, self.t)
            .map_err(|e| self.fail(&action, e.to_string()))
    }

    fn look(&mut self, region: RegionId) -> Result<(), TaskError> {
        let dwell_ms = LOOK_DWELL_MS.max(self.session.config().dwell_ms);
        self.t += dwell_ms;
        self.act(Command::SetFocus { region, dwell_ms })?;
        Ok(())
    }

    fn look_window(&mut self, id: &str) -> Result<(), TaskError> {
        self.look(RegionId::Window(WindowId(id.to_string())))
    }

    fn execute(&mut self, cell: &str) -> Result<(), TaskError> {
        let events = self.act(Command::Execute { cell: CellId::new(cell) })?;
        match events.last().map(|e| &e.kind) {
            Some(EventKind::Execute { ok: true, .. }) => Ok(()),
            Some(EventKind::Execute { error, .. }) => Err(self.fail("execute", error.clone().unwrap_or_default())),
            _ => Err(self.fail("execute", "no Execute event")),
        }
    }

    fn edit(&mut self, cell: &str, source: &str) -> Result<(), TaskError> {
        self.act(Command::Edit {
            cell: CellId::new(cell),
            source: source.to_string(),
        })?;
        Ok(())
    }

    /// Pulls out (Unified) or enters (Separated) a cell; returns the new
    /// artifact.
    fn open_cell(&mut self, cell: &str) -> Result<ArtifactId, TaskError> {
        let cell = CellId::new(cell);
        let command = match self.session.state().mode {
            Mode::Unified => Command::PullOut { cell, pose: None },
            Mode::Separated => Command::EnterCell { cell },
        };
        let events = self.act(command)?;
        events
            .iter()
            .find_map(|e| match &e.kind {
                EventKind::PullOut { artifact, .. } => Some(*artifact),
                EventKind::PortalCross { artifact, .. } => *artifact,
                _ => None,
            })
            .ok_or_else(|| self.fail("open_cell", "no artifact spawned"))
    }

    /// Separated mode only: walk back through the portal.
    fn leave_artifact_space(&mut self) -> Result<(), TaskError> {
        if self.session.state().mode == Mode::Separated {
            self.act(Command::ExitPortal)?;
        }
        Ok(())
    }

    fn artifact(&self, id: ArtifactId) -> Result<&Artifact, TaskError> {
        self.session
            .state()
            .artifacts
            .get(&id)
            .ok_or_else(|| self.fail("inspect", format!("artifact {id} vanished")))
    }

    fn answer(&mut self, question: &str, answer: Value) -> Result<(), TaskError> {
        self.answers.insert(question.to_string(), answer.clone());
        self.act(Command::ReportAnswer {
            question: question.to_string(),
            answer,
        })?;
        Ok(())
    }

    fn first_value(&self, table: ArtifactId, column: &str) -> Result<f64, TaskError> {
        let t = self
            .artifact(table)?
            .as_table()
            .ok_or_else(|| self.fail("inspect", "not a table"))?;
        let shown = t.displayed();
        let c = shown
            .column_index(column)
            .ok_or_else(|| self.fail("inspect", format!("no column {column}")))?;
        shown
            .rows
            .first()
            .and_then(|r| r[c].as_number())
            .ok_or_else(|| self.fail("inspect", "empty table"))
    }
}

fn wine_ground_truth() -> BTreeMap<String, Value> {
    let wine = datasets::load("wine").expect("bundled");
    let c = wine.column_index("alcohol").expect("alcohol column");
    let values: Vec<f64> = wine.rows.iter().filter_map(|r| r[c].as_number()).collect();
    let (rows, cols) = wine.shape();
    BTreeMap::from([
        ("wine_shape".to_string(), json!([rows, cols])),
        ("alcohol_min".to_string(), json!(values.iter().copied().fold(f64::INFINITY, f64::min))),
        ("alcohol_max".to_string(), json!(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
        ("synced_plot_axes".to_string(), json!(["alcohol", "color_intensity", "hue"])),
    ])
}

fn run_instructed(d: &mut Driver) -> Result<(), TaskError> {
    d.look_window("w01")?;
    let table = d.open_cell("c02")?;
    d.look(RegionId::Artifact(table))?;
    let shape = d.artifact(table)?.as_table().map(|t| t.displayed().shape());
    let (rows, cols) = shape.ok_or_else(|| d.fail("inspect", "c02 did not yield a table"))?;
    d.answer("wine_shape", json!([rows, cols]))?;
    for (direction, question) in [(SortDirection::Asc, "alcohol_min"), (SortDirection::Desc, "alcohol_max")] {
        d.act(Command::Sort {
            table,
            column: "alcohol".into(),
            direction,
        })?;
        let v = d.first_value(table, "alcohol")?;
        d.answer(question, json!(v))?;
    }
    d.leave_artifact_space()?;

    d.look_window("w05")?;
    let note = format!(
        "# answers: shape=({rows}, {cols}) alcohol_min={} alcohol_max={}",
        d.answers["alcohol_min"], d.answers["alcohol_max"]
    );
    d.edit("c10", &note)?;
    d.execute("c10")?;

    d.look_window("w03")?;
    let vis = d.open_cell("c06")?;
    d.look(RegionId::Artifact(vis))?;
    d.act(Command::Grab {
        hand: Hand::Right,
        item: HeldItem::Column {
            table,
            column: "hue".into(),
        },
    })?;
    d.act(Command::AddAxis {
        vis,
        table,
        column: "hue".into(),
    })?;
    d.act(Command::Release { hand: Hand::Right })?;
    let plot3d = d
        .artifact(vis)?
        .as_vis()
        .map(|v| v.extract.clone())
        .ok_or_else(|| d.fail("inspect", "c06 did not yield a plot"))?;
    d.act(Command::Grab {
        hand: Hand::Left,
        item: HeldItem::Artifact { id: vis },
    })?;
    d.leave_artifact_space()?;

    d.look_window("w04")?;
    d.act(Command::PutIn {
        artifact: vis,
        cell: CellId::new("c07"),
    })?;
    d.execute("c07")?;
    let synced = d
        .session
        .kernel_mut()
        .extract_plot(&CellId::new("c07"))
        .map_err(|e| d.fail("verify", e.to_string()))?;
    if !synced.identical(&plot3d) {
        return Err(d.fail("verify", "re-executed cell does not reproduce the 3D plot"));
    }
    d.answer("synced_plot_axes", json!(synced.axis_names))?;
    d.act(Command::Complete)?;
    Ok(())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient; -1 when fewer than two clusters are used.
pub fn silhouette(points: &[Vec<f64>], labels: &[u32]) -> f64 {
    let mut clusters: Vec<u32> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return -1.0;
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let e = sums.entry(labels[j]).or_insert((0.0, 0));
                e.0 += euclid(p, q);
                e.1 += 1;
            }
        }
        let own = sums.get(&labels[i]).copied().unwrap_or((0.0, 0));
        if own.1 == 0 {
            continue;
        }
        let a = own.0 / own.1 as f64;
        let b = sums
            .iter()
            .filter(|(l, _)| **l != labels[i])
            .map(|(_, (s, n))| s / *n as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / points.len() as f64
}

/// Whether every cluster's induced undirected subgraph is connected.
pub fn clusters_connected(n: usize, labels: &[u32], edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if labels[a] == labels[b] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut roots: BTreeMap<u32, usize> = BTreeMap::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        if roots.insert(labels[i], i).is_some() {
            return false;
        }
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    true
}

/// Best (k_means, k_nn): highest silhouette (smallest k on ties), then the
/// smallest neighbor count that connects every cluster, or the largest
/// declared one if none does.
pub fn choose_parameters(sweep: &[SweepPoint]) -> Option<(i64, i64)> {
    let mut best: Option<&SweepPoint> = None;
    for p in sweep {
        if best.is_none_or(|b| p.silhouette > b.silhouette || (p.silhouette == b.silhouette && p.k_means < b.k_means)) {
            best = Some(p);
        }
    }
    let km = best?.k_means;
    let candidates: Vec<&SweepPoint> = sweep.iter().filter(|p| p.k_means == km).collect();
    let kn = candidates
        .iter()
        .filter(|p| p.clusters_connected)
        .map(|p| p.k_nn)
        .min()
        .or_else(|| candidates.iter().map(|p| p.k_nn).max())?;
    Some((km, kn))
}

fn declared_range(source: &str) -> Option<(String, i64, i64)> {
    match parse_line(source.lines().next()?) {
        Statement::ParamDecl {
            name,
            range: Some((lo, hi)),
            ..
        } => Some((name, lo, hi)),
        _ => None,
    }
}

fn score(plot: &PlotExtract, k_means: i64, k_nn: i64) -> SweepPoint {
    SweepPoint {
        k_means,
        k_nn,
        silhouette: silhouette(&plot.points, &plot.colors),
        clusters_connected: clusters_connected(plot.points.len(), &plot.colors, &plot.edges),
    }
}

/// Answers for the exploratory task, computed straight from the dataset.
pub fn exploratory_ground_truth(
    k_means_range: (i64, i64),
    k_nn_range: (i64, i64),
) -> (BTreeMap<String, Value>, Vec<SweepPoint>) {
    let iris = datasets::load("iris").expect("bundled");
    let sw = iris.column_index("sepal_width").expect("sepal_width");
    let kept: Vec<&Vec<Scalar>> = iris
        .rows
        .iter()
        .filter(|r| {
            let v = r[sw].as_number().unwrap_or(f64::NAN);
            (SEPAL_WIDTH_MIN..=SEPAL_WIDTH_MAX).contains(&v)
        })
        .collect();
    let all: Vec<Vec<f64>> = kept
        .iter()
        .map(|r| r.iter().filter_map(Scalar::as_number).collect())
        .collect();
    let axes: Vec<usize> = KNN_AXES
        .iter()
        .map(|a| iris.column_index(a).expect("axis column"))
        .collect();
    let shown: Vec<Vec<f64>> = kept
        .iter()
        .map(|r| axes.iter().map(|&c| r[c].as_number().unwrap_or(f64::NAN)).collect())
        .collect();
    let mut sweep = Vec::new();
    for km in k_means_range.0..=k_means_range.1 {
        let labels = kmeans(&all, km as usize, KMEANS_MAX_ITERS).expect("k fits");
        let sil = silhouette(&shown, &labels);
        for kn in k_nn_range.0..=k_nn_range.1 {
            let edges = knn_graph(&shown, kn as usize).expect("k fits");
            sweep.push(SweepPoint {
                k_means: km,
                k_nn: kn,
                silhouette: sil,
                clusters_connected: clusters_connected(shown.len(), &labels, &edges),
            });
        }
    }
    let (km, kn) = choose_parameters(&sweep).expect("non-empty sweep");
    let truth = BTreeMap::from([
        ("rows_after_filter".to_string(), json!(kept.len())),
        ("k_means".to_string(), json!(km)),
        ("k_nn".to_string(), json!(kn)),
    ]);
    (truth, sweep)
}

/// Inclusive integer range declared by a parameter cell.
type Declared = (i64, i64);

fn run_exploratory(d: &mut Driver) -> Result<(Vec<SweepPoint>, Declared, Declared), TaskError> {
    let nb = &d.session.state().notebook;
    let range_of = |cell: &str| {
        nb.cell(&CellId::new(cell))
            .and_then(|c| declared_range(c.source()))
    };
    let (km_name, km_lo, km_hi) = range_of("c16").ok_or_else(|| d.fail("setup", "c16 declares no range"))?;
    let (kn_name, kn_lo, kn_hi) = range_of("c17").ok_or_else(|| d.fail("setup", "c17 declares no range"))?;

    d.look_window("w02")?;
    d.execute("c03")?;
    d.look_window("w07")?;
    let table = d.open_cell("c14")?;
    d.look(RegionId::Artifact(table))?;
    for (cmp, bound) in [(Comparator::Le, SEPAL_WIDTH_MAX), (Comparator::Ge, SEPAL_WIDTH_MIN)] {
        d.act(Command::Filter {
            table,
            column: "sepal_width".into(),
            cmp,
            threshold: Scalar::Number(bound),
        })?;
    }
    let kept = d
        .artifact(table)?
        .as_table()
        .map(|t| t.displayed().rows.len())
        .unwrap_or(0);
    d.answer("rows_after_filter", json!(kept))?;
    d.act(Command::Grab {
        hand: Hand::Left,
        item: HeldItem::Artifact { id: table },
    })?;
    d.leave_artifact_space()?;
    d.look_window("w07")?;
    d.act(Command::PutIn {
        artifact: table,
        cell: CellId::new("c14"),
    })?;
    d.execute("c14")?;

    let mut sweep = Vec::new();
    for km in km_lo..=km_hi {
        for kn in kn_lo..=kn_hi {
            d.look_window("w08")?;
            d.edit("c16", &format!("{km_name} = {km}  # range: {km_lo}..{km_hi}"))?;
            d.execute("c16")?;
            d.edit("c17", &format!("{kn_name} = {kn}  # range: {kn_lo}..{kn_hi}"))?;
            d.execute("c17")?;
            d.look_window("w09")?;
            d.execute("c18")?;
            d.look_window("w10")?;
            d.execute("c20")?;
            let vis = d.open_cell("c20")?;
            let plot = d
                .artifact(vis)?
                .as_vis()
                .map(|v| v.extract.clone())
                .ok_or_else(|| d.fail("inspect", "c20 did not yield a plot"))?;
            sweep.push(score(&plot, km, kn));
            d.act(Command::Delete { artifact: vis })?;
            d.leave_artifact_space()?;
        }
    }
    let (km, kn) = choose_parameters(&sweep).ok_or_else(|| d.fail("choose", "empty sweep"))?;
    d.look_window("w08")?;
    d.edit("c16", &format!("{km_name} = {km}  # range: {km_lo}..{km_hi}"))?;
    d.execute("c16")?;
    d.edit("c17", &format!("{kn_name} = {kn}  # range: {kn_lo}..{kn_hi}"))?;
    d.execute("c17")?;
    d.execute("c18")?;
    d.execute("c20")?;
    d.answer("k_means", json!(km))?;
    d.answer("k_nn", json!(kn))?;
    d.act(Command::Complete)?;
    Ok((sweep, (km_lo, km_hi), (kn_lo, kn_hi)))
}

/// Runs a task script on a fresh session over the study notebook.
pub fn run_task(kind: TaskKind, mode: Mode, config: EngineConfig) -> Result<TaskOutcome, TaskError> {
    let mut d = Driver {
        session: Session::open(study_notebook(), mode, config),
        t: 0,
        step: 0,
        answers: BTreeMap::new(),
    };
    let (ground_truth, sweep) = match kind {
        TaskKind::Instructed => {
            run_instructed(&mut d)?;
            (wine_ground_truth(), Vec::new())
        }
        TaskKind::Exploratory => {
            let (sweep, km, kn) = run_exploratory(&mut d)?;
            (exploratory_ground_truth(km, kn).0, sweep)
        }
    };
    let log = d.session.log().to_vec();
    let report = compute_metrics(&log, &ground_truth).map_err(|e| d.fail("metrics", e.to_string()))?;
    Ok(TaskOutcome {
        kind,
        mode,
        report,
        answers: d.answers,
        ground_truth,
        final_state: d.session.state().clone(),
        state_hash: d.session.state_hash(),
        sweep,
        log,
    })
}
