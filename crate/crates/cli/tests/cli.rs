use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

const BIN: &str = env!("CARGO_BIN_EXE_icon");

fn study_notebook() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/study_notebook.json")
}

fn icon(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ICON_DWELL_MS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_reports_counts_and_schema_errors() {
    let o = icon(&["validate", study_notebook().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ok, 14 windows, 30 cells"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"id\": \"x\",\n\"windows\": [\n  {oops}\n]}\n").unwrap();
    let o = icon(&["validate", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.json:3:"), "{}", stderr(&o));

    let missing = icon(&["validate", "/nonexistent/nb.json"]);
    assert!(!missing.status.success());
}

#[test]
fn task_then_replay_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    for (kind, mode) in [("instructed", "unified"), ("instructed", "separated"), ("exploratory", "unified")] {
        let o = icon(&[
            "task", "run", kind, "--mode", mode, "--out", &p("run.log"), "--metrics", &p("live.json"), "--ground-truth", &p("truth.json"),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let live_hash = stdout(&o).lines().last().unwrap().to_string();

        let r = icon(&[
            "replay", &p("run.log"), "--notebook", study_notebook().to_str().unwrap(), "--metrics", &p("replayed.json"), "--ground-truth", &p("truth.json"),
        ]);
        assert!(r.status.success(), "{}", stderr(&r));
        assert_eq!(stdout(&r).lines().last().unwrap(), live_hash);
        let live: Value = serde_json::from_str(&std::fs::read_to_string(p("live.json")).unwrap()).unwrap();
        let replayed: Value = serde_json::from_str(&std::fs::read_to_string(p("replayed.json")).unwrap()).unwrap();
        assert_eq!(live, replayed);
        assert_eq!(live["error_score"], json!(0));
        let crosses = live["portal_crosses"].as_u64().unwrap();
        assert_eq!(crosses == 0, mode == "unified", "{kind} {mode}: {crosses} crossings");
    }
}

#[test]
fn replay_rejects_corrupt_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.log");
    std::fs::write(&log, "{\"t\":0,\"kind\":\"SessionStart\",\"mode\":\"Unified\",\"dwell_ms\":500}\n{\"t\":5,\"kind\":\"Delete\",\"artifact\":4}\n").unwrap();
    let out = dir.path().join("m.json");
    let o = icon(&["replay", log.to_str().unwrap(), "--notebook", study_notebook().to_str().unwrap(), "--metrics", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn dwell_threshold_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.log");
    let run = |value: &str| {
        Command::new(BIN)
            .args(["task", "run", "instructed", "--mode", "unified", "--out", log.to_str().unwrap()])
            .env("ICON_DWELL_MS", value)
            .output()
            .unwrap()
    };
    assert!(run("650").status.success());
    let first = std::fs::read_to_string(&log).unwrap();
    assert!(first.lines().next().unwrap().contains("\"dwell_ms\":650"), "{first}");
    let o = run("-3");
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ICON_DWELL_MS"));
}

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(extra: &[&str]) -> Server {
    let mut child = Command::new(BIN)
        .args(["serve", "--port", "0", "--notebook", study_notebook().to_str().unwrap()])
        .args(extra)
        .env_remove("ICON_DWELL_MS")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
    Server { child, addr }
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap().0
}

async fn next_frame(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("frame in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

/// Reads frames until the reply to `seq`, collecting event frames on the way.
async fn reply_to(ws: &mut Ws, seq: u64, events: &mut Vec<Value>) -> Value {
    loop {
        let f = next_frame(ws).await;
        match f.get("event") {
            Some(e) => events.push(e.clone()),
            None if f["seq"] == json!(seq) => return f,
            None => panic!("unexpected frame {f}"),
        }
    }
}

async fn send(ws: &mut Ws, frame: Value) {
    ws.send(Message::Text(frame.to_string().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn serve_bridges_clients_to_one_session() {
    let server = start_server(&[]);
    let mut a = connect(&server.addr).await;
    let mut b = connect(&server.addr).await;
    // Let both subscriptions register before the first command.
    send(&mut a, json!({"seq": 0, "query": "hash"})).await;
    reply_to(&mut a, 0, &mut Vec::new()).await;
    send(&mut b, json!({"seq": 0, "query": "hash"})).await;
    reply_to(&mut b, 0, &mut Vec::new()).await;

    let mut a_events = Vec::new();
    send(&mut a, json!({"seq": 1, "command": {"op": "pull_out", "cell": "c02"}, "t": 1000})).await;
    let reply = reply_to(&mut a, 1, &mut a_events).await;
    assert_eq!(reply["ok"], json!(true), "{reply}");
    let kinds: Vec<&Value> = reply["events"].as_array().unwrap().iter().map(|e| &e["kind"]).collect();
    // The cell had not run yet, so it is executed first.
    assert_eq!(kinds, [&json!("Execute"), &json!("PullOut")]);

    send(&mut a, json!({"seq": 2, "command": {"op": "pull_out", "cell": "c30"}, "t": 1100})).await;
    let bad = reply_to(&mut a, 2, &mut a_events).await;
    assert_eq!(bad["ok"], json!(false));
    assert_eq!(bad["events"], json!([]));
    assert!(bad["error"]["code"].is_string());

    send(&mut a, json!({"seq": 3, "command": {"op": "fly"}})).await;
    let garbled = reply_to(&mut a, 3, &mut a_events).await;
    assert_eq!(garbled["error"]["code"], json!("BadFrame"));

    // b sees the same event stream; its own query reply marks the end.
    let mut b_events = Vec::new();
    send(&mut b, json!({"seq": 9, "query": "log"})).await;
    let log = reply_to(&mut b, 9, &mut b_events).await;
    while a_events.len() < b_events.len() {
        a_events.push(next_frame(&mut a).await["event"].clone());
    }
    assert_eq!(a_events, b_events);
    assert!(b_events.iter().any(|e| e["kind"] == json!("PullOut")));
    let logged = log["result"].as_array().unwrap();
    assert_eq!(&logged[logged.len() - b_events.len()..], &b_events[..]);

    // Plain HTTP health check.
    let mut tcp = std::net::TcpStream::connect(&server.addr).unwrap();
    write!(tcp, "GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut body = String::new();
    tcp.read_to_string(&mut body).unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("\"status\":\"ok\""));
}

#[tokio::test(flavor = "multi_thread")]
async fn kernel_adapter_and_fallback() {
    // A working adapter: this binary serving its own built-in kernel.
    let adapter = format!("{BIN} mock-kernel");
    let server = start_server(&["--kernel-adapter", &adapter]);
    let mut ws = connect(&server.addr).await;
    send(&mut ws, json!({"seq": 1, "command": {"op": "pull_out", "cell": "c02"}})).await;
    let reply = reply_to(&mut ws, 1, &mut Vec::new()).await;
    assert_eq!(reply["ok"], json!(true), "{reply}");
    drop(server);

    // An adapter that exits at once: the session carries on locally and
    // the switch is reported on stderr.
    let mut server = start_server(&["--kernel-adapter", "true"]);
    let mut ws = connect(&server.addr).await;
    send(&mut ws, json!({"seq": 1, "command": {"op": "pull_out", "cell": "c02"}})).await;
    let reply = reply_to(&mut ws, 1, &mut Vec::new()).await;
    assert_eq!(reply["ok"], json!(true), "{reply}");
    let _ = server.child.kill();
    let mut err = String::new();
    server.child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert!(err.contains("kernel adapter exited"), "{err}");
}
