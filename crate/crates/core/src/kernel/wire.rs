//! Newline-delimited JSON kernel protocol.
//!
//! Requests: `{"id": 1, "op": "execute", "cell": "c1", "source": "..."}`,
//! `{"id": 2, "op": "extract_table", "var": "df"}`,
//! `{"id": 3, "op": "extract_plot", "cell": "c2"}`, `{"id": 4, "op": "reset"}`.
//!
//! Responses carry the same id and `"ok"`, plus one of `result`, `table`,
//! `plot`, or `error` (`{"code": ..., "detail": ...}` with a `message`).
//! Numbers use serde_json's shortest round-trip formatting.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{ExecResult, KernelBackend, KernelError, KernelSnapshot, MockKernel, PlotExtract, TableExtract};
use crate::notebook::CellId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    #[serde(flatten)]
    pub op: WireOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum WireOp {
    Execute { cell: CellId, source: String },
    ExtractTable { var: String },
    ExtractPlot { cell: CellId },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: Option<u64>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ExecResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableExtract>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotExtract>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<KernelError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl WireResponse {
    fn ok(id: u64) -> Self {
        WireResponse {
            id: Some(id),
            ok: true,
            ..Default::default()
        }
    }

    fn err(id: Option<u64>, error: KernelError) -> Self {
        WireResponse {
            id,
            ok: false,
            message: Some(error.to_string()),
            error: Some(error),
            ..Default::default()
        }
    }
}

/// Handles one request against `backend`.
pub fn handle_request(backend: &mut dyn KernelBackend, req: WireRequest) -> WireResponse {
    let id = req.id;
    match req.op {
        WireOp::Execute { cell, source } => WireResponse {
            result: Some(backend.execute(&cell, &source)),
            ..WireResponse::ok(id)
        },
        WireOp::ExtractTable { var } => match backend.extract_table(&var) {
            Ok(t) => WireResponse {
                table: Some(t),
                ..WireResponse::ok(id)
            },
            Err(e) => WireResponse::err(Some(id), e),
        },
        WireOp::ExtractPlot { cell } => match backend.extract_plot(&cell) {
            Ok(p) => WireResponse {
                plot: Some(p),
                ..WireResponse::ok(id)
            },
            Err(e) => WireResponse::err(Some(id), e),
        },
        WireOp::Reset => {
            backend.reset();
            WireResponse::ok(id)
        }
    }
}

/// Serves the protocol until `input` reaches EOF.
pub fn serve(backend: &mut dyn KernelBackend, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<WireRequest>(&line) {
            Ok(req) => handle_request(backend, req),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64));
                WireResponse::err(id, KernelError::Protocol(e.to_string()))
            }
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// A backend that forwards every call over the wire protocol.
pub struct WireKernel {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    next_id: u64,
    alive: bool,
}

impl WireKernel {
    pub fn new(reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        WireKernel {
            reader: Box::new(reader),
            writer: Box::new(writer),
            child: None,
            next_id: 1,
            alive: true,
        }
    }

    /// Launches `program args...` and talks to it over stdio.
    pub fn spawn(program: &str, args: &[String]) -> io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut k = WireKernel::new(BufReader::new(stdout), stdin);
        k.child = Some(child);
        Ok(k)
    }

    /// False once the transport has failed; every later call fails too.
    pub fn is_alive(&self) -> bool {
        self.alive
    }

    fn call(&mut self, op: WireOp) -> Result<WireResponse, KernelError> {
        if !self.alive {
            return Err(KernelError::Protocol("backend is gone".into()));
        }
        let r = self.exchange(op);
        if let Err(KernelError::Protocol(_)) = &r {
            if self.child.as_mut().is_some_and(|c| !matches!(c.try_wait(), Ok(None))) {
                self.alive = false;
            }
        }
        r
    }

    fn exchange(&mut self, op: WireOp) -> Result<WireResponse, KernelError> {
        let id = self.next_id;
        self.next_id += 1;
        let req = WireRequest { id, op };
        let mut line = serde_json::to_string(&req).map_err(|e| KernelError::Protocol(e.to_string()))?;
        line.push('\n');
        let sent = self.writer.write_all(line.as_bytes()).and_then(|_| self.writer.flush());
        let mut buf = String::new();
        let received = sent.and_then(|_| self.reader.read_line(&mut buf));
        match received {
            Ok(0) => {
                self.alive = false;
                return Err(KernelError::Protocol("backend closed the connection".into()));
            }
            Err(e) => {
                self.alive = false;
                return Err(KernelError::Protocol(e.to_string()));
            }
            Ok(_) => {}
        }
        let resp: WireResponse =
            serde_json::from_str(&buf).map_err(|e| KernelError::Protocol(e.to_string()))?;
        if resp.id != Some(id) {
            return Err(KernelError::Protocol(format!(
                "response id {:?} does not match request {id}",
                resp.id
            )));
        }
        if !resp.ok {
            return Err(resp.error.unwrap_or_else(|| {
                KernelError::Protocol(resp.message.unwrap_or_else(|| "unspecified error".into()))
            }));
        }
        Ok(resp)
    }
}

impl Drop for WireKernel {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl KernelBackend for WireKernel {
    fn execute(&mut self, cell: &CellId, source: &str) -> ExecResult {
        let op = WireOp::Execute {
            cell: cell.clone(),
            source: source.to_string(),
        };
        match self.call(op) {
            Ok(WireResponse { result: Some(r), .. }) => r,
            Ok(_) => ExecResult::failed(cell.clone(), "backend returned no result"),
            Err(e) => ExecResult::failed(cell.clone(), e.to_string()),
        }
    }

    fn extract_table(&mut self, var: &str) -> Result<TableExtract, KernelError> {
        self.call(WireOp::ExtractTable { var: var.to_string() })?
            .table
            .ok_or_else(|| KernelError::Protocol("missing table".into()))
    }

    fn extract_plot(&mut self, cell: &CellId) -> Result<PlotExtract, KernelError> {
        self.call(WireOp::ExtractPlot { cell: cell.clone() })?
            .plot
            .ok_or_else(|| KernelError::Protocol("missing plot".into()))
    }

    fn reset(&mut self) {
        let _ = self.call(WireOp::Reset);
    }
}

type WarningHook = Box<dyn Fn(&str) + Send>;

/// Forwards to an external backend and falls back to the built-in kernel
/// if that backend dies. Successful executions are replayed into the
/// fallback so variables survive the switch.
pub struct FallbackKernel {
    remote: Option<WireKernel>,
    local: MockKernel,
    history: Vec<(CellId, String)>,
    warnings: Vec<String>,
    on_warning: Option<WarningHook>,
}

impl FallbackKernel {
    pub fn new(remote: WireKernel) -> Self {
        FallbackKernel {
            remote: Some(remote),
            local: MockKernel::new(),
            history: Vec::new(),
            warnings: Vec::new(),
            on_warning: None,
        }
    }

    /// Calls `hook` with each warning as it is raised.
    pub fn with_warning_hook(mut self, hook: impl Fn(&str) + Send + 'static) -> Self {
        self.on_warning = Some(Box::new(hook));
        self
    }

    pub fn using_fallback(&self) -> bool {
        self.remote.is_none()
    }

    /// Warnings raised by fallbacks, oldest first.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Switches to the built-in kernel if the remote has died.
    fn check(&mut self) {
        if self.remote.as_ref().is_some_and(|r| !r.is_alive()) {
            self.remote = None;
            self.local.reset();
            for (cell, source) in &self.history {
                self.local.execute(cell, source);
            }
            let warning = "kernel adapter exited; continuing on the built-in kernel";
            if let Some(hook) = &self.on_warning {
                hook(warning);
            }
            self.warnings.push(warning.to_string());
        }
    }
}

impl KernelBackend for FallbackKernel {
    fn execute(&mut self, cell: &CellId, source: &str) -> ExecResult {
        if let Some(remote) = &mut self.remote {
            let r = remote.execute(cell, source);
            if remote.is_alive() {
                if r.is_ok() {
                    self.history.push((cell.clone(), source.to_string()));
                }
                return r;
            }
            self.check();
        }
        let r = self.local.execute(cell, source);
        if r.is_ok() {
            self.history.push((cell.clone(), source.to_string()));
        }
        r
    }

    fn extract_table(&mut self, var: &str) -> Result<TableExtract, KernelError> {
        if let Some(remote) = &mut self.remote {
            let r = remote.extract_table(var);
            if remote.is_alive() {
                return r;
            }
            self.check();
        }
        self.local.extract_table(var)
    }

    fn extract_plot(&mut self, cell: &CellId) -> Result<PlotExtract, KernelError> {
        if let Some(remote) = &mut self.remote {
            let r = remote.extract_plot(cell);
            if remote.is_alive() {
                return r;
            }
            self.check();
        }
        self.local.extract_plot(cell)
    }

    fn reset(&mut self) {
        self.history.clear();
        if let Some(remote) = &mut self.remote {
            remote.reset();
            self.check();
        }
        self.local.reset();
    }

    fn snapshot(&self) -> Result<KernelSnapshot, KernelError> {
        match &self.remote {
            Some(_) => Err(KernelError::Unsupported("snapshot of an external kernel".into())),
            None => self.local.snapshot(),
        }
    }

    fn restore(&mut self, snapshot: &KernelSnapshot) -> Result<(), KernelError> {
        match &self.remote {
            Some(_) => Err(KernelError::Unsupported("restore of an external kernel".into())),
            None => self.local.restore(snapshot),
        }
    }
}
