//! Shared fixtures: a small notebook and a random command generator that
//! produces mostly-valid sequences against a live session.
#![allow(dead_code)]

pub mod oracles;

use icon_core::artifact::{Artifact, ArtifactId, SortDirection};
use icon_core::notebook::{CellId, Notebook, Pose, WindowId};
use icon_core::session::Session;
use icon_core::value::{Comparator, Scalar};
use icon_core::workspace::{Command, EngineConfig, Hand, HeldItem, Mode, RegionId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const FUZZ_CELLS: [&str; 9] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9"];

pub fn fuzz_notebook() -> Notebook {
    let nb = json!({
        "id": "fuzz",
        "dialect": "python",
        "windows": [
            {"id": "w1", "pose": {"x": -1.0, "y": 1.6, "z": 1.5, "yaw": 0.5}, "cells": [
                {"id": "c1", "source": "df = pd.DataFrame({\"x\": [3, 1, 2, 5, 4], \"y\": [1.5, -2, 0.25, 8, 3], \"z\": [0, 1, 0, 1, 1], \"s\": [\"a\", \"b\", \"c\", \"d\", \"e\"]})"},
                {"id": "c2", "source": "plt.scatter(df['x'], df['y'])"},
                {"id": "c3", "source": ""}
            ]},
            {"id": "w2", "pose": {"x": 1.0, "y": 1.6, "z": 1.5, "yaw": -0.5}, "cells": [
                {"id": "c4", "source": "low = df[df['y'] <= 2]"},
                {"id": "c5", "source": "ax.scatter(df['x'], df['y'], df['z'])"},
                {"id": "c6", "source": ""},
                {"id": "c7", "source": "num = df[['x', 'y', 'z']]\nlabels = kmeans(num, k=2)"},
                {"id": "c8", "source": "knn_graph(num, ['x', 'y', 'z'], k=2, c=labels)"},
                {"id": "c9", "source": "# scratch"}
            ]}
        ]
    });
    Notebook::from_json(&nb.to_string(), "fuzz.json").expect("fuzz notebook is valid")
}

const EDIT_POOL: [&str; 8] = [
    "",
    "# note",
    "df2 = df",
    "plt.scatter(df['y'], df['z'])",
    "df = load_dataset(\"iris\")",
    "broken = df[",
    "plt.scatter(nope['a'], nope['b'])",
    "mid = df[df['x'] > 2]",
];

const SPAWNABLE: [&str; 6] = ["c1", "c1", "c2", "c4", "c5", "c8"];

const COLUMNS: [&str; 6] = ["x", "y", "z", "s", "sepal_length", "ghost"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty")
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let span = if rng.gen_bool(0.9) { 2.4 } else { 3.0 };
    Pose::new(
        rng.gen_range(-span..span),
        rng.gen_range(0.5..2.0),
        rng.gen_range(-span..span),
        rng.gen_range(-3.0..3.0),
    )
}

fn table_columns(a: Option<&Artifact>) -> Vec<String> {
    a.and_then(Artifact::as_table)
        .map(|t| t.extract.columns.iter().map(|c| c.name.clone()).collect())
        .unwrap_or_default()
}

fn column(rng: &mut ChaCha8Rng, known: &[String]) -> String {
    if !known.is_empty() && rng.gen_bool(0.85) {
        pick(rng, known).clone()
    } else {
        pick(rng, &COLUMNS).to_string()
    }
}

/// Draws one command biased toward things that can succeed in the current
/// state, with a steady trickle of invalid references.
pub fn random_command(rng: &mut ChaCha8Rng, session: &Session) -> Command {
    let state = session.state();
    let ids: Vec<ArtifactId> = state.artifacts.keys().copied().collect();
    let tables: Vec<ArtifactId> = state
        .artifacts
        .values()
        .filter(|a| a.as_table().is_some())
        .map(Artifact::id)
        .collect();
    let visuals: Vec<ArtifactId> = state
        .artifacts
        .values()
        .filter(|a| a.as_vis().is_some())
        .map(Artifact::id)
        .collect();
    let any_artifact = |rng: &mut ChaCha8Rng, pool: &[ArtifactId]| {
        if pool.is_empty() || rng.gen_bool(0.05) {
            ArtifactId(rng.gen_range(1..state.next_artifact + 2))
        } else {
            *pick(rng, pool)
        }
    };
    let cell = |rng: &mut ChaCha8Rng| CellId::new(if rng.gen_bool(0.03) { "c99" } else { *pick(rng, &FUZZ_CELLS) });
    let hand = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { Hand::Left } else { Hand::Right };

    let spawn = |rng: &mut ChaCha8Rng| {
        let cell = CellId::new(*pick(rng, &SPAWNABLE));
        match (state.mode, rng.gen_bool(0.9)) {
            (Mode::Unified, true) | (Mode::Separated, false) => Command::PullOut {
                cell,
                pose: rng.gen_bool(0.3).then(|| random_pose(rng)),
            },
            _ => Command::EnterCell { cell },
        }
    };
    if ids.is_empty() && rng.gen_bool(0.6) {
        return spawn(rng);
    }
    if state.portal.is_some() && rng.gen_bool(0.1) {
        return Command::ExitPortal;
    }

    match rng.gen_range(0..28) {
        0 => Command::Edit {
            cell: cell(rng),
            source: pick(rng, &EDIT_POOL).to_string(),
        },
        1 | 2 => Command::Execute { cell: cell(rng) },
        3..=5 => spawn(rng),
        6 => Command::PullOut {
            cell: cell(rng),
            pose: None,
        },
        7 => Command::EnterCell { cell: cell(rng) },
        8 | 9 => Command::ExitPortal,
        10 => Command::PutIn {
            artifact: any_artifact(rng, &ids),
            cell: cell(rng),
        },
        11 => {
            let target = cell(rng);
            let pose = match state.notebook.cell_position(&target) {
                Some([x, y, z]) if rng.gen_bool(0.7) => Pose::new(x + rng.gen_range(-0.1..0.1), y, z, 0.0),
                _ => random_pose(rng),
            };
            Command::Drop {
                artifact: any_artifact(rng, &ids),
                pose,
            }
        }
        12 => {
            let item = if !tables.is_empty() && rng.gen_bool(0.3) {
                let t = *pick(rng, &tables);
                HeldItem::Column {
                    table: t,
                    column: column(rng, &table_columns(state.artifacts.get(&t))),
                }
            } else {
                HeldItem::Artifact {
                    id: any_artifact(rng, &ids),
                }
            };
            Command::Grab { hand: hand(rng), item }
        }
        13 => Command::Release { hand: hand(rng) },
        14 => Command::MoveArtifact {
            artifact: any_artifact(rng, &ids),
            pose: random_pose(rng),
        },
        15 => Command::MoveUser {
            pose: if rng.gen_bool(0.05) {
                Pose::new(50.0, 1.6, 0.0, 0.0)
            } else {
                random_pose(rng)
            },
        },
        16 => {
            let region = match rng.gen_range(0..4) {
                0 => RegionId::Window(WindowId(if rng.gen_bool(0.5) { "w1" } else { "w2" }.into())),
                1 => RegionId::Artifact(any_artifact(rng, &ids)),
                2 => RegionId::Portal,
                _ => RegionId::Desk,
            };
            Command::SetFocus {
                region,
                dwell_ms: rng.gen_range(0..1200),
            }
        }
        17 => {
            let t = any_artifact(rng, &tables);
            Command::Sort {
                table: t,
                column: column(rng, &table_columns(state.artifacts.get(&t))),
                direction: if rng.gen_bool(0.5) { SortDirection::Asc } else { SortDirection::Desc },
            }
        }
        18 => {
            let t = any_artifact(rng, &tables);
            let cmp = *pick(
                rng,
                &[Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge, Comparator::Eq, Comparator::Ne],
            );
            let threshold = if rng.gen_bool(0.9) {
                Scalar::Number(rng.gen_range(-3i32..9) as f64 / 2.0)
            } else {
                Scalar::Text("c".into())
            };
            Command::Filter {
                table: t,
                column: column(rng, &table_columns(state.artifacts.get(&t))),
                cmp,
                threshold,
            }
        }
        19 => Command::RemoveFilter {
            table: any_artifact(rng, &tables),
            index: rng.gen_range(0..3),
        },
        20 | 21 => {
            let t = any_artifact(rng, &tables);
            let cols = table_columns(state.artifacts.get(&t));
            let selected: Vec<String> = state
                .artifacts
                .get(&t)
                .and_then(Artifact::as_table)
                .map(|t| t.selected_columns.iter().cloned().collect())
                .unwrap_or_default();
            let unselected: Vec<String> = ["x", "y", "z"]
                .iter()
                .map(|c| c.to_string())
                .filter(|c| cols.contains(c) && !selected.contains(c))
                .collect();
            if selected.len() < 2 && !unselected.is_empty() && rng.gen_bool(0.8) {
                return Command::SelectColumn {
                    table: t,
                    column: pick(rng, &unselected).clone(),
                };
            }
            let columns = if selected.len() >= 2 && rng.gen_bool(0.8) {
                (selected[0].clone(), selected[1].clone())
            } else {
                (column(rng, &cols), column(rng, &cols))
            };
            Command::Merge {
                table: t,
                columns,
                pose: rng.gen_bool(0.5).then(|| random_pose(rng)),
            }
        }
        22 => {
            let t = any_artifact(rng, &tables);
            Command::AddAxis {
                vis: any_artifact(rng, &visuals),
                table: t,
                column: column(rng, &table_columns(state.artifacts.get(&t))),
            }
        }
        23 => {
            if rng.gen_bool(0.5) {
                Command::RemoveAxis {
                    vis: any_artifact(rng, &visuals),
                    index: rng.gen_range(0..4),
                }
            } else {
                Command::RemovePoint {
                    vis: any_artifact(rng, &visuals),
                    index: rng.gen_range(0..6),
                }
            }
        }
        24 => {
            let tethered: Vec<(ArtifactId, ArtifactId)> = state
                .artifacts
                .values()
                .filter_map(|a| a.as_vis())
                .filter_map(|v| v.origin_table.map(|t| (v.id, t)))
                .collect();
            match tethered.choose(rng) {
                Some(&(vis, table)) if rng.gen_bool(0.8) => Command::ApplyVis { vis, table },
                _ => Command::ApplyVis {
                    vis: any_artifact(rng, &visuals),
                    table: any_artifact(rng, &tables),
                },
            }
        }
        26 => {
            let t = any_artifact(rng, &tables);
            Command::SelectColumn {
                table: t,
                column: column(rng, &table_columns(state.artifacts.get(&t))),
            }
        }
        _ => Command::Delete {
            artifact: any_artifact(rng, &ids),
        },
    }
}

pub fn mode_for(seed: u64) -> Mode {
    if seed.is_multiple_of(2) {
        Mode::Unified
    } else {
        Mode::Separated
    }
}

/// A fresh session with the setup cells already run.
pub fn open_fuzz_session(seed: u64) -> Session {
    let mut s = Session::open(fuzz_notebook(), mode_for(seed), EngineConfig::default());
    for cell in ["c1", "c7"] {
        s.dispatch(&Command::Execute { cell: CellId::new(cell) }, 0)
            .expect("setup cell runs");
    }
    s
}

/// Drives `steps` random commands; returns how many were accepted.
pub fn drive(session: &mut Session, rng: &mut ChaCha8Rng, steps: usize, t: &mut u64) -> usize {
    let mut accepted = 0;
    for _ in 0..steps {
        let cmd = random_command(rng, session);
        *t += rng.gen_range(0..3000);
        if session.dispatch(&cmd, *t).is_ok() {
            accepted += 1;
        }
    }
    accepted
}

// ---------------------------------------------------------------------------
// Artifact fuzzing for code generation round trips.

use icon_core::artifact::{TableArtifact, VisArtifact};
use icon_core::codegen::generate_create;
use icon_core::kernel::{Column, KernelBackend, MockKernel, PlotExtract, PlotKind, TableExtract};
use icon_core::notebook::Cell;
use icon_core::value::DType;

fn random_number(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..6) {
        0 => rng.gen_range(-10i32..10) as f64,
        1 => rng.gen_range(-1e6..1e6),
        2 => f64::from_bits(rng.gen::<u64>() & !(0x7ff << 52) | ((rng.gen_range(1u64..2046)) << 52)),
        3 => rng.gen_range(-1.0..1.0) * 1e-300,
        4 => *pick(rng, &[0.1, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, 5e-324, f64::MAX, 2.5e15]),
        _ => rng.gen_range(0.0..100.0),
    }
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 10] = ["a", "Z", " ", "\"", "'", "\\", "\n", "é", "😀", "x1"];
    (0..rng.gen_range(0..6)).map(|_| *pick(rng, &PIECES)).collect()
}

pub fn random_table(rng: &mut ChaCha8Rng) -> TableExtract {
    let ncols = rng.gen_range(1..=8);
    let nrows = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=50) };
    let mut columns = Vec::new();
    for i in 0..ncols {
        let dtype = if rng.gen_bool(0.75) { DType::Number } else { DType::Text };
        let name = if rng.gen_bool(0.8) { format!("col{i}") } else { format!("{}{i}", random_text(rng)) };
        columns.push(Column::new(name, dtype));
    }
    let rows = (0..nrows)
        .map(|_| {
            columns
                .iter()
                .map(|c| match c.dtype {
                    DType::Number => Scalar::Number(random_number(rng)),
                    DType::Text => Scalar::Text(random_text(rng)),
                })
                .collect()
        })
        .collect();
    TableExtract { columns, rows }
}

/// A table artifact with a random sort and up to two random filters.
pub fn random_table_artifact(rng: &mut ChaCha8Rng) -> TableArtifact {
    let extract = random_table(rng);
    let mut t = TableArtifact::new(ArtifactId(1), None, extract, Pose::default());
    let names: Vec<(String, DType)> = t.extract.columns.iter().map(|c| (c.name.clone(), c.dtype)).collect();
    if rng.gen_bool(0.6) {
        let (name, _) = pick(rng, &names).clone();
        let dir = if rng.gen_bool(0.5) { SortDirection::Asc } else { SortDirection::Desc };
        t.sort_by(&name, dir).expect("column exists");
    }
    for _ in 0..rng.gen_range(0..3) {
        let (name, dtype) = pick(rng, &names).clone();
        let c = t.extract.column_index(&name).unwrap();
        let threshold = match t.extract.rows.choose(rng) {
            Some(r) => r[c].clone(),
            None if dtype == DType::Number => Scalar::Number(0.0),
            None => Scalar::Text(String::new()),
        };
        let cmp = if dtype == DType::Number {
            *pick(rng, &[Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge, Comparator::Ne])
        } else {
            *pick(rng, &[Comparator::Eq, Comparator::Ne])
        };
        t.add_filter(&name, cmp, threshold).expect("well-typed filter");
    }
    t
}

pub fn random_vis_artifact(rng: &mut ChaCha8Rng) -> VisArtifact {
    let three = rng.gen_bool(0.5);
    let kind = match (three, rng.gen_bool(0.3)) {
        (false, _) => PlotKind::Scatter2D,
        (true, false) => PlotKind::Scatter3D,
        (true, true) => PlotKind::NodeLink3D,
    };
    let dims = kind.axis_count();
    let n = rng.gen_range(0..=50);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| random_number(rng)).collect()).collect();
    let colors: Vec<u32> = if rng.gen_bool(0.5) {
        vec![0; n]
    } else {
        (0..n).map(|_| rng.gen_range(0..4)).collect()
    };
    let edges = if kind == PlotKind::NodeLink3D && n > 1 {
        (0..rng.gen_range(0..2 * n)).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect()
    } else {
        Vec::new()
    };
    let axis_names = ["x", "y", "z"][..dims].iter().map(|s| s.to_string()).collect();
    let extract = PlotExtract {
        kind,
        axis_names,
        points,
        colors,
        edges,
    };
    let mut v = VisArtifact::from_cell(ArtifactId(1), CellId::new("c1"), extract, Pose::default());
    v.origin_cell = None;
    for _ in 0..rng.gen_range(0..3) {
        if !v.extract.points.is_empty() {
            let i = rng.gen_range(0..v.extract.points.len());
            v.remove_point(i).unwrap();
        }
    }
    v
}

pub fn random_artifact(rng: &mut ChaCha8Rng) -> Artifact {
    if rng.gen_bool(0.5) {
        Artifact::Table(random_table_artifact(rng))
    } else {
        Artifact::Vis(random_vis_artifact(rng))
    }
}

/// Generates code for `artifact` into an empty cell, runs it on a fresh
/// mock kernel and compares the re-extracted state with the artifact.
pub fn codegen_round_trip(artifact: &Artifact) -> Result<(), String> {
    let nb = fuzz_notebook();
    let target = Cell::new("c3", "");
    let generated = generate_create(artifact, &nb, &target).map_err(|e| e.to_string())?;
    let mut kernel = MockKernel::new();
    let cell = CellId::new("c3");
    let r = kernel.execute(&cell, &generated.new_source);
    if !r.is_ok() {
        return Err(format!("generated code failed: {:?}\n{}", r.status, generated.new_source));
    }
    match artifact {
        Artifact::Table(t) => {
            let got = kernel.extract_table(&generated.variable).map_err(|e| e.to_string())?;
            let want = t.displayed();
            if !got.identical(&want) {
                return Err(format!("table differs\n{}", generated.new_source));
            }
        }
        Artifact::Vis(v) => {
            let got = kernel.extract_plot(&cell).map_err(|e| e.to_string())?;
            if !got.identical(&v.extract) {
                return Err(format!("plot differs: {got:?} vs {:?}\n{}", v.extract, generated.new_source));
            }
        }
    }
    Ok(())
}
