//! Scripted debug adapter for tests and demos.
//!
//! A script is a JSON array processed in order. Entry forms:
//!
//! - `{"expect": "launch", "arguments": {…}?, "reply": {"success": …, "message": …, "body": …}?}`
//!   reads the next request, checks its command (and that `arguments` is a
//!   subset of the request's), then replies (success with an empty body by default).
//! - `{"event": "stopped", "body": {…}?}` sends an event.
//! - `{"stop": {"reason": "breakpoint", "threadId": 1, "snapshot": {…}, "memoryReferences": true}}`
//!   sends a `stopped` event and then answers `threads`, `stackTrace`,
//!   `scopes` and `variables` from the heap snapshot until the next resume.
//! - `{"raw": "…"}` writes the string verbatim (for malformed-frame tests).
//! - `{"sleepMs": 100}` pauses.
//! - `{"close": true}` closes the connection.
//!
//! Outgoing bytes are buffered and only written when the adapter next waits
//! for input, so replies and events are routinely merged into one write. An
//! optional chunk plan re-splits each write at arbitrary byte boundaries.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use super::framing::{encode_frame, parse_message, FrameDecoder};
use super::protocol::{Event, ProtocolMessage, Request, Response};
use super::transport::Transport;
use crate::heap::{Field, FieldValue};
use crate::snapshot::{load_snapshot, Snapshot, SnapshotError};

const HEAP_COMMANDS: [&str; 4] = ["threads", "stackTrace", "scopes", "variables"];
const RESUME_COMMANDS: [&str; 4] = ["continue", "next", "stepIn", "stepOut"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReply {
    #[serde(default = "yes")]
    success: bool,
    #[serde(default)]
    message: Option<String>,
    #[serde(default)]
    body: Value,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawStop {
    reason: String,
    #[serde(default = "one")]
    thread_id: i64,
    snapshot: Value,
    #[serde(default = "yes")]
    memory_references: bool,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawEntry {
    #[serde(default)]
    expect: Option<String>,
    #[serde(default)]
    arguments: Option<Value>,
    #[serde(default)]
    reply: Option<RawReply>,
    #[serde(default)]
    event: Option<String>,
    #[serde(default)]
    body: Option<Value>,
    #[serde(default)]
    stop: Option<RawStop>,
    #[serde(default)]
    raw: Option<String>,
    #[serde(default)]
    sleep_ms: Option<u64>,
    #[serde(default)]
    close: Option<bool>,
}

#[derive(Debug, Clone)]
pub enum ScriptEntry {
    Expect {
        command: String,
        arguments: Option<Value>,
        success: bool,
        message: Option<String>,
        body: Value,
    },
    Event {
        name: String,
        body: Value,
    },
    Stop {
        reason: String,
        thread_id: i64,
        snapshot: Snapshot,
        memory_references: bool,
    },
    Raw(String),
    Sleep(Duration),
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("script: {0}")]
    Syntax(String),
    #[error("script entry {index}: {message}")]
    Entry { index: usize, message: String },
    #[error("script entry {index}: snapshot: {source}")]
    Snapshot {
        index: usize,
        #[source]
        source: SnapshotError,
    },
}

#[derive(Debug, Clone, Default)]
pub struct MockScript {
    pub entries: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let raw: Vec<RawEntry> =
            serde_json::from_str(text).map_err(|e| ScriptError::Syntax(e.to_string()))?;
        let entries = raw
            .into_iter()
            .enumerate()
            .map(|(index, e)| entry_from_raw(index, e))
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }
}

fn entry_from_raw(index: usize, e: RawEntry) -> Result<ScriptEntry, ScriptError> {
    let kinds = [
        e.expect.is_some(),
        e.event.is_some(),
        e.stop.is_some(),
        e.raw.is_some(),
        e.sleep_ms.is_some(),
        e.close.is_some(),
    ];
    if kinds.iter().filter(|k| **k).count() != 1 {
        return Err(ScriptError::Entry {
            index,
            message: "exactly one of expect/event/stop/raw/sleepMs/close is required".into(),
        });
    }
    if e.expect.is_none() && (e.arguments.is_some() || e.reply.is_some()) {
        return Err(ScriptError::Entry {
            index,
            message: "`arguments` and `reply` belong to `expect` entries".into(),
        });
    }
    if e.event.is_none() && e.body.is_some() {
        return Err(ScriptError::Entry {
            index,
            message: "`body` belongs to `event` entries".into(),
        });
    }
    Ok(if let Some(command) = e.expect {
        let reply = e.reply.unwrap_or(RawReply {
            success: true,
            message: None,
            body: Value::Null,
        });
        ScriptEntry::Expect {
            command,
            arguments: e.arguments,
            success: reply.success,
            message: reply.message,
            body: reply.body,
        }
    } else if let Some(name) = e.event {
        ScriptEntry::Event {
            name,
            body: e.body.unwrap_or(Value::Null),
        }
    } else if let Some(stop) = e.stop {
        let snapshot = load_snapshot(&stop.snapshot.to_string())
            .map_err(|source| ScriptError::Snapshot { index, source })?;
        ScriptEntry::Stop {
            reason: stop.reason,
            thread_id: stop.thread_id,
            snapshot,
            memory_references: stop.memory_references,
        }
    } else if let Some(raw) = e.raw {
        ScriptEntry::Raw(raw)
    } else if let Some(ms) = e.sleep_ms {
        ScriptEntry::Sleep(Duration::from_millis(ms))
    } else {
        ScriptEntry::Close
    })
}

/// What the mock observed, for assertions.
#[derive(Debug, Clone, Default)]
pub struct MockReport {
    pub requests: Vec<Request>,
    pub violations: Vec<String>,
}

impl MockReport {
    pub fn commands(&self) -> Vec<&str> {
        self.requests.iter().map(|r| r.command.as_str()).collect()
    }
}

/// Serves a paused program's heap in Debug Adapter Protocol shape.
struct MockHeap {
    thread_id: i64,
    snapshot: Snapshot,
    memory_references: bool,
    object_refs: BTreeMap<String, i64>,
}

impl MockHeap {
    fn new(thread_id: i64, snapshot: Snapshot, memory_references: bool) -> Self {
        let first = snapshot.frames.len() as i64 + 1;
        let object_refs = snapshot
            .objects
            .keys()
            .enumerate()
            .map(|(i, id)| (id.clone(), first + i as i64))
            .collect();
        Self {
            thread_id,
            snapshot,
            memory_references,
            object_refs,
        }
    }

    fn variable(&self, field: &Field) -> Value {
        match &field.value {
            FieldValue::Primitive { type_name, value } => json!({
                "name": field.name, "value": value, "type": type_name, "variablesReference": 0
            }),
            FieldValue::Null => json!({
                "name": field.name, "value": "null", "type": "null", "variablesReference": 0
            }),
            FieldValue::Reference(id) => {
                let type_name = &self.snapshot.objects[id].type_name;
                let mut v = json!({
                    "name": field.name,
                    "value": format!("{type_name}@{id}"),
                    "type": type_name,
                    "variablesReference": self.object_refs[id],
                });
                if self.memory_references {
                    v["memoryReference"] = json!(id);
                }
                v
            }
        }
    }

    fn answer(&self, request: &Request) -> Result<Value, String> {
        let arg = |name: &str| request.arguments.get(name).and_then(Value::as_i64);
        match request.command.as_str() {
            "threads" => Ok(json!({ "threads": [{ "id": self.thread_id, "name": "main" }] })),
            "stackTrace" => {
                if arg("threadId") != Some(self.thread_id) {
                    return Err(format!("unknown thread {:?}", arg("threadId")));
                }
                let frames: Vec<Value> = self
                    .snapshot
                    .frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| json!({ "id": i + 1, "name": f.name, "line": 0, "column": 0 }))
                    .collect();
                Ok(json!({ "stackFrames": frames, "totalFrames": frames.len() }))
            }
            "scopes" => {
                let frame = arg("frameId").unwrap_or(0);
                if frame < 1 || frame as usize > self.snapshot.frames.len() {
                    return Err(format!("unknown frame {frame}"));
                }
                Ok(json!({ "scopes": [{ "name": "Locals", "variablesReference": frame, "expensive": false }] }))
            }
            "variables" => {
                let reference = arg("variablesReference").unwrap_or(0);
                let fields = if reference >= 1 && reference as usize <= self.snapshot.frames.len() {
                    &self.snapshot.frames[reference as usize - 1].locals
                } else {
                    let id = self
                        .object_refs
                        .iter()
                        .find(|(_, r)| **r == reference)
                        .map(|(id, _)| id)
                        .ok_or_else(|| format!("unknown variablesReference {reference}"))?;
                    &self.snapshot.objects[id].fields
                };
                let variables: Vec<Value> = fields.iter().map(|f| self.variable(f)).collect();
                Ok(json!({ "variables": variables }))
            }
            other => Err(format!("`{other}` is not a heap request")),
        }
    }
}

fn is_subset(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => e
            .iter()
            .all(|(k, v)| a.get(k).is_some_and(|av| is_subset(v, av))),
        _ => expected == actual,
    }
}

pub struct MockAdapter {
    script: MockScript,
    chunk_plan: Vec<usize>,
}

struct Io<R, W> {
    reader: R,
    writer: W,
    decoder: FrameDecoder,
    out: Vec<u8>,
    chunk_plan: Vec<usize>,
    chunk_cursor: usize,
    seq: i64,
}

impl<R: AsyncRead + Unpin, W: AsyncWrite + Unpin> Io<R, W> {
    fn queue(&mut self, message: ProtocolMessage) {
        self.out.extend(encode_frame(&message.to_bytes()));
    }

    fn next_seq(&mut self) -> i64 {
        self.seq += 1;
        self.seq
    }

    fn event(&mut self, name: &str, body: Value) {
        let seq = self.next_seq();
        self.queue(ProtocolMessage::Event(Event {
            seq,
            event: name.to_string(),
            body,
        }));
    }

    fn reply(&mut self, request: &Request, success: bool, message: Option<String>, body: Value) {
        let seq = self.next_seq();
        self.queue(ProtocolMessage::Response(Response {
            seq,
            request_seq: request.seq,
            success,
            command: request.command.clone(),
            message,
            body,
        }));
    }

    async fn flush(&mut self) -> std::io::Result<()> {
        let bytes = std::mem::take(&mut self.out);
        let mut rest = bytes.as_slice();
        while !rest.is_empty() {
            let size = if self.chunk_plan.is_empty() {
                rest.len()
            } else {
                let s = self.chunk_plan[self.chunk_cursor % self.chunk_plan.len()].max(1);
                self.chunk_cursor += 1;
                s.min(rest.len())
            };
            self.writer.write_all(&rest[..size]).await?;
            self.writer.flush().await?;
            rest = &rest[size..];
            if !self.chunk_plan.is_empty() {
                tokio::task::yield_now().await;
            }
        }
        Ok(())
    }

    /// Next request from the client, or `None` at EOF or on garbage input.
    async fn read_request(&mut self) -> Option<Request> {
        if self.flush().await.is_err() {
            return None;
        }
        let mut chunk = [0u8; 4096];
        loop {
            match self.decoder.next_frame() {
                Ok(Some(body)) => match parse_message(&body) {
                    Ok(ProtocolMessage::Request(r)) => return Some(r),
                    _ => return None,
                },
                Ok(None) => {}
                Err(_) => return None,
            }
            match self.reader.read(&mut chunk).await {
                Ok(0) | Err(_) => return None,
                Ok(n) => self.decoder.push(&chunk[..n]),
            }
        }
    }
}

impl MockAdapter {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            chunk_plan: Vec::new(),
        }
    }

    /// Cycle of write sizes used to split outgoing bytes.
    pub fn with_chunk_plan(mut self, plan: Vec<usize>) -> Self {
        self.chunk_plan = plan;
        self
    }

    /// In-memory adapter: returns the client transport and the task running
    /// the script.
    pub fn spawn(self) -> (Transport, tokio::task::JoinHandle<MockReport>) {
        let (client, server) = tokio::io::duplex(64 * 1024);
        let (client_r, client_w) = tokio::io::split(client);
        let (server_r, server_w) = tokio::io::split(server);
        let task = tokio::spawn(self.run(server_r, server_w));
        (Transport::from_streams(client_r, client_w), task)
    }

    pub async fn run<R, W>(self, reader: R, writer: W) -> MockReport
    where
        R: AsyncRead + Unpin,
        W: AsyncWrite + Unpin,
    {
        let mut io = Io {
            reader,
            writer,
            decoder: FrameDecoder::new(),
            out: Vec::new(),
            chunk_plan: self.chunk_plan,
            chunk_cursor: 0,
            seq: 0,
        };
        let mut report = MockReport::default();
        let mut heap: Option<MockHeap> = None;

        for entry in self.script.entries {
            match entry {
                ScriptEntry::Event { name, body } => io.event(&name, body),
                ScriptEntry::Raw(raw) => io.out.extend_from_slice(raw.as_bytes()),
                ScriptEntry::Sleep(d) => {
                    if io.flush().await.is_err() {
                        return report;
                    }
                    tokio::time::sleep(d).await;
                }
                ScriptEntry::Close => {
                    let _ = io.flush().await;
                    let _ = io.writer.shutdown().await;
                    return report;
                }
                ScriptEntry::Stop {
                    reason,
                    thread_id,
                    snapshot,
                    memory_references,
                } => {
                    io.event(
                        "stopped",
                        json!({ "reason": reason, "threadId": thread_id, "allThreadsStopped": true }),
                    );
                    heap = Some(MockHeap::new(thread_id, snapshot, memory_references));
                }
                ScriptEntry::Expect {
                    command,
                    arguments,
                    success,
                    message,
                    body,
                } => {
                    let request = loop {
                        let Some(request) = io.read_request().await else {
                            report
                                .violations
                                .push(format!("connection closed while expecting `{command}`"));
                            return report;
                        };
                        report.requests.push(request.clone());
                        if !serve_heap(&mut io, heap.as_ref(), &request) {
                            break request;
                        }
                    };
                    if request.command != command {
                        report.violations.push(format!(
                            "expected `{command}`, got `{}`",
                            request.command
                        ));
                        io.reply(&request, false, Some("unexpected request".into()), Value::Null);
                        continue;
                    }
                    if let Some(expected) = &arguments {
                        if !is_subset(expected, &request.arguments) {
                            report.violations.push(format!(
                                "`{command}` arguments {} do not include {expected}",
                                request.arguments
                            ));
                        }
                    }
                    let body = if body.is_null() {
                        Value::Object(Map::new())
                    } else {
                        body
                    };
                    io.reply(&request, success, message, body);
                    if RESUME_COMMANDS.contains(&command.as_str()) {
                        heap = None;
                    }
                }
            }
        }

        // Script exhausted: keep serving heap requests until disconnect/EOF.
        while let Some(request) = io.read_request().await {
            report.requests.push(request.clone());
            if serve_heap(&mut io, heap.as_ref(), &request) {
                continue;
            }
            if request.command == "disconnect" {
                io.reply(&request, true, None, json!({}));
                let _ = io.flush().await;
                break;
            }
            report
                .violations
                .push(format!("unscripted request `{}`", request.command));
            io.reply(&request, false, Some("script exhausted".into()), Value::Null);
        }
        let _ = io.flush().await;
        report
    }
}

/// Answers heap requests while stopped. Returns false for other requests.
fn serve_heap<R, W>(io: &mut Io<R, W>, heap: Option<&MockHeap>, request: &Request) -> bool
where
    R: AsyncRead + Unpin,
    W: AsyncWrite + Unpin,
{
    if !HEAP_COMMANDS.contains(&request.command.as_str()) {
        return false;
    }
    match heap.map(|h| h.answer(request)) {
        Some(Ok(body)) => io.reply(request, true, None, body),
        Some(Err(message)) => io.reply(request, false, Some(message), Value::Null),
        None => io.reply(request, false, Some("not stopped".into()), Value::Null),
    }
    true
}
