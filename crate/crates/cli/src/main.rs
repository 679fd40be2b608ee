//! `icon`: validate notebooks, run scripted tasks, replay logs and serve
//! sessions over WebSocket.

mod serve;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use icon_core::kernel::wire::serve as serve_kernel;
use icon_core::kernel::MockKernel;
use icon_core::metrics::tasks::{run_task, TaskKind};
use icon_core::metrics::{compute_metrics, parse_log, replay, write_log, MetricsReport};
use icon_core::notebook::{CellKind, Notebook};
use icon_core::workspace::{EngineConfig, Mode};

#[derive(Parser)]
#[command(name = "icon", version, about = "Immersive computational notebook engine")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve a session over WebSocket at /ws (health check at /health).
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long)]
        notebook: PathBuf,
        #[arg(long, default_value = "unified")]
        mode: Mode,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// External kernel command, e.g. "python3 adapter.py". Falls back to
        /// the built-in kernel if it exits.
        #[arg(long)]
        kernel_adapter: Option<String>,
        /// Write the event log here on shutdown.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Check a notebook file and print its cell classification.
    Validate { file: PathBuf },
    /// Replay an event log, verify it, and compute metrics.
    Replay {
        log: PathBuf,
        #[arg(long)]
        notebook: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        /// JSON object mapping question ids to expected answers.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Serve the built-in kernel over the stdio wire protocol.
    #[command(hide = true)]
    MockKernel,
    /// Scripted study tasks.
    Task {
        #[command(subcommand)]
        action: TaskCmd,
    },
}

#[derive(Subcommand)]
enum TaskCmd {
    /// Run a task script on the bundled study notebook.
    Run {
        kind: TaskKind,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Also write the task's expected answers.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icon: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = EngineConfig::from_env().map_err(anyhow::Error::msg)?;
    match cli.command {
        Cmd::Serve {
            port,
            notebook,
            mode,
            host,
            kernel_adapter,
            log,
        } => serve::run(serve::Options {
            addr: format!("{host}:{port}"),
            notebook: Notebook::load(&notebook)?,
            mode,
            config,
            kernel_adapter,
            log,
        }),
        Cmd::Validate { file } => validate(&file),
        Cmd::MockKernel => {
            let stdin = std::io::stdin().lock();
            serve_kernel(&mut MockKernel::new(), stdin, std::io::stdout().lock())?;
            Ok(())
        }
        Cmd::Replay {
            log,
            notebook,
            metrics,
            ground_truth,
        } => replay_log(&log, &notebook, &metrics, ground_truth.as_deref()),
        Cmd::Task {
            action:
                TaskCmd::Run {
                    kind,
                    mode,
                    out,
                    metrics,
                    ground_truth,
                },
        } => {
            let outcome = run_task(kind, mode, config)?;
            write(&out, &write_log(&outcome.log))?;
            if let Some(path) = metrics {
                write_json(&path, &outcome.report)?;
            }
            if let Some(path) = ground_truth {
                write_json(&path, &outcome.ground_truth)?;
            }
            print!("{}", outcome.report.to_text());
            println!("state_hash  {}", outcome.state_hash);
            Ok(())
        }
    }
}

fn validate(file: &Path) -> Result<()> {
    let nb = Notebook::load(file)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for w in &nb.windows {
        for c in &w.cells {
            let kind = c.kind();
            println!("{}  {}  {:?}", w.id.0, c.id, kind);
            *counts.entry(format!("{kind:?}").to_lowercase()).or_default() += 1;
        }
    }
    let summary: Vec<String> = [CellKind::Data, CellKind::Visualization, CellKind::Code, CellKind::Empty]
        .iter()
        .map(|k| {
            let name = format!("{k:?}").to_lowercase();
            format!("{} {name}", counts.get(&name).copied().unwrap_or(0))
        })
        .collect();
    println!(
        "{}: ok, {} windows, {} cells ({})",
        file.display(),
        nb.windows.len(),
        nb.cell_count(),
        summary.join(", ")
    );
    Ok(())
}

fn replay_log(log: &Path, notebook: &Path, metrics: &Path, ground_truth: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
    let events = parse_log(&text).with_context(|| log.display().to_string())?;
    let nb = Notebook::load(notebook)?;
    let session = replay(&events, &nb).with_context(|| log.display().to_string())?;
    let truth: BTreeMap<String, serde_json::Value> = match ground_truth {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let report: MetricsReport = compute_metrics(&events, &truth)?;
    write_json(metrics, &report)?;
    print!("{}", report.to_text());
    println!("state_hash  {}", session.state_hash());
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}
