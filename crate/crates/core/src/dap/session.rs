use std::collections::{HashMap, VecDeque};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use tokio::io::AsyncWriteExt;
use tokio::process::Child;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::Instant;

use super::framing::{encode_frame, pump_frames, FramingError};
use super::heap_view::HeapView;
use super::protocol::{Event, ProtocolMessage, Request, Response, StackTraceBody, StoppedBody};
use super::transport::{BoxedWriter, Transport};
use crate::event::DebugEvent;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DapError {
    #[error("framing: {0}")]
    Framing(#[from] FramingError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("`{command}` failed: {message}")]
    Adapter { command: String, message: String },
    #[error("launch failed: {0}")]
    LaunchFailed(String),
    #[error("timed out waiting for `{0}`")]
    Timeout(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("adapter connection closed")]
    Closed,
    #[error("protocol: {0}")]
    Protocol(String),
}

impl From<std::io::Error> for DapError {
    fn from(e: std::io::Error) -> Self {
        DapError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    #[default]
    Launch,
    Attach,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBreakpoints {
    pub path: String,
    pub lines: Vec<u32>,
}

/// How to start the debuggee once the adapter is initialized.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct LaunchConfig {
    #[serde(default)]
    pub request: RequestKind,
    #[serde(default = "empty_object")]
    pub arguments: Value,
    #[serde(default)]
    pub breakpoints: Vec<SourceBreakpoints>,
    #[serde(default = "default_adapter_id")]
    pub adapter_id: String,
}

fn empty_object() -> Value {
    json!({})
}

fn default_adapter_id() -> String {
    "odbg".to_string()
}

impl Default for LaunchConfig {
    fn default() -> Self {
        Self {
            request: RequestKind::Launch,
            arguments: empty_object(),
            breakpoints: Vec::new(),
            adapter_id: default_adapter_id(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumeKind {
    Continue,
    StepOver,
    StepIn,
    StepOut,
}

impl ResumeKind {
    pub fn command(self) -> &'static str {
        match self {
            ResumeKind::Continue => "continue",
            ResumeKind::StepOver => "next",
            ResumeKind::StepIn => "stepIn",
            ResumeKind::StepOut => "stepOut",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunState {
    Initializing,
    Running,
    Stopped { thread_id: i64, reason: String },
    Terminated,
}

/// Client side of one debug-adapter connection.
///
/// A reader task decodes frames into a queue owned by the session; every
/// other state change happens on the caller's task.
pub struct DapSession {
    writer: BoxedWriter,
    incoming: mpsc::UnboundedReceiver<Result<ProtocolMessage, FramingError>>,
    reader_task: JoinHandle<()>,
    child: Option<Child>,
    next_seq: i64,
    pending: HashMap<i64, String>,
    completed: HashMap<i64, Response>,
    events: VecDeque<Event>,
    capabilities: Value,
    state: RunState,
    stop_epoch: u64,
    timeout: Duration,
    failed: Option<DapError>,
}

impl Drop for DapSession {
    fn drop(&mut self) {
        self.reader_task.abort();
    }
}

impl DapSession {
    pub fn new(transport: Transport, timeout: Duration) -> Self {
        let (tx, incoming) = mpsc::unbounded_channel();
        let reader_task = tokio::spawn(pump_frames(transport.reader, tx));
        Self {
            writer: transport.writer,
            incoming,
            reader_task,
            child: transport.child,
            next_seq: 1,
            pending: HashMap::new(),
            completed: HashMap::new(),
            events: VecDeque::new(),
            capabilities: Value::Null,
            state: RunState::Initializing,
            stop_epoch: 0,
            timeout,
            failed: None,
        }
    }

    /// Runs the initialize / launch-or-attach / configurationDone handshake.
    pub async fn connect_and_initialize(
        transport: Transport,
        config: &LaunchConfig,
        timeout: Duration,
    ) -> Result<Self, DapError> {
        let mut session = Self::new(transport, timeout);
        session.capabilities = session
            .request(
                "initialize",
                json!({
                    "clientID": "odbg",
                    "clientName": "odbg",
                    "adapterID": config.adapter_id,
                    "linesStartAt1": true,
                    "columnsStartAt1": true,
                    "pathFormat": "path",
                    "supportsVariableType": true,
                }),
            )
            .await?;

        let command = match config.request {
            RequestKind::Launch => "launch",
            RequestKind::Attach => "attach",
        };
        let launch_seq = session.send_request(command, config.arguments.clone()).await?;

        // Adapters may answer the launch before or after `initialized`.
        let deadline = Instant::now() + session.timeout;
        loop {
            if let Some(response) = session.completed.get(&launch_seq) {
                if !response.success {
                    return Err(DapError::LaunchFailed(failure_message(response)));
                }
            }
            if session.take_event("initialized").is_some() {
                break;
            }
            session.pump_until(deadline, "initialized").await?;
        }

        for bp in &config.breakpoints {
            let lines: Vec<Value> = bp.lines.iter().map(|l| json!({ "line": l })).collect();
            session
                .request(
                    "setBreakpoints",
                    json!({ "source": { "path": bp.path }, "breakpoints": lines }),
                )
                .await?;
        }
        session.request("configurationDone", Value::Null).await?;

        let response = session.wait_response(launch_seq, command).await?;
        if !response.success {
            return Err(DapError::LaunchFailed(failure_message(&response)));
        }
        session.state = RunState::Running;
        Ok(session)
    }

    pub fn capabilities(&self) -> &Value {
        &self.capabilities
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub(crate) fn stop_epoch(&self) -> u64 {
        self.stop_epoch
    }

    pub(crate) fn is_stopped(&self) -> bool {
        matches!(self.state, RunState::Stopped { .. })
    }

    /// Next adapter event that matters to the visualizer. A closed transport
    /// reads as `Terminated`.
    pub async fn await_event(&mut self) -> Result<DebugEvent, DapError> {
        loop {
            while let Some(event) = self.events.pop_front() {
                if let Some(translated) = self.translate(event) {
                    return Ok(translated);
                }
            }
            if matches!(self.state, RunState::Terminated) && self.failed.is_none() {
                return Ok(DebugEvent::Terminated);
            }
            match self.pump().await {
                Ok(()) => {}
                Err(DapError::Closed) => {
                    self.state = RunState::Terminated;
                    self.stop_epoch += 1;
                    return Ok(DebugEvent::Terminated);
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn translate(&mut self, event: Event) -> Option<DebugEvent> {
        match event.event.as_str() {
            "stopped" => {
                let body: StoppedBody = serde_json::from_value(event.body).unwrap_or(StoppedBody {
                    reason: "unknown".into(),
                    thread_id: None,
                });
                let thread_id = body.thread_id.unwrap_or(1);
                self.stop_epoch += 1;
                self.state = RunState::Stopped {
                    thread_id,
                    reason: body.reason.clone(),
                };
                Some(DebugEvent::Stopped {
                    reason: body.reason,
                    thread_id: Some(thread_id),
                })
            }
            "continued" => {
                self.stop_epoch += 1;
                self.state = RunState::Running;
                Some(DebugEvent::Continued)
            }
            "terminated" => {
                self.stop_epoch += 1;
                self.state = RunState::Terminated;
                Some(DebugEvent::Terminated)
            }
            "exited" | "initialized" => None,
            other => {
                tracing::debug!(event = other, "ignoring adapter event");
                None
            }
        }
    }

    pub async fn resume(&mut self, kind: ResumeKind) -> Result<(), DapError> {
        let RunState::Stopped { thread_id, .. } = self.state else {
            return Err(DapError::InvalidState(format!(
                "`{}` requires a stopped program",
                kind.command()
            )));
        };
        self.request(kind.command(), json!({ "threadId": thread_id })).await?;
        self.stop_epoch += 1;
        self.state = RunState::Running;
        Ok(())
    }

    /// Heap view of the top stack frame of `thread_id`. Valid until the next
    /// resume or stop.
    pub async fn frame_heap_view(&mut self, thread_id: i64) -> Result<HeapView, DapError> {
        if !self.is_stopped() {
            return Err(DapError::InvalidState("no stopped thread to inspect".into()));
        }
        let body = self
            .request(
                "stackTrace",
                json!({ "threadId": thread_id, "startFrame": 0, "levels": 1 }),
            )
            .await?;
        let trace: StackTraceBody =
            serde_json::from_value(body).map_err(|e| DapError::Protocol(e.to_string()))?;
        let top = trace
            .stack_frames
            .first()
            .ok_or_else(|| DapError::Protocol(format!("thread {thread_id} has no stack frames")))?;
        Ok(HeapView::new(self.stop_epoch, top.id))
    }

    /// Best-effort shutdown: sends `disconnect` and reaps a spawned adapter.
    pub async fn disconnect(mut self) -> Result<(), DapError> {
        let result = if self.failed.is_none() && !matches!(self.state, RunState::Terminated) {
            self.request("disconnect", json!({ "terminateDebuggee": true }))
                .await
                .map(|_| ())
        } else {
            Ok(())
        };
        let _ = self.writer.shutdown().await;
        if let Some(mut child) = self.child.take() {
            let _ = child.kill().await;
        }
        match result {
            Err(DapError::Closed) => Ok(()),
            other => other,
        }
    }

    /// Sends a request and waits for its response body; a `success: false`
    /// response becomes [`DapError::Adapter`].
    pub async fn request(&mut self, command: &str, arguments: Value) -> Result<Value, DapError> {
        let seq = self.send_request(command, arguments).await?;
        let response = self.wait_response(seq, command).await?;
        if !response.success {
            return Err(DapError::Adapter {
                command: command.to_string(),
                message: failure_message(&response),
            });
        }
        Ok(response.body)
    }

    pub async fn send_request(&mut self, command: &str, arguments: Value) -> Result<i64, DapError> {
        self.check_failed()?;
        let seq = self.next_seq;
        self.next_seq += 1;
        let message = ProtocolMessage::Request(Request {
            seq,
            command: command.to_string(),
            arguments,
        });
        self.writer.write_all(&encode_frame(&message.to_bytes())).await?;
        self.writer.flush().await?;
        self.pending.insert(seq, command.to_string());
        Ok(seq)
    }

    async fn wait_response(&mut self, seq: i64, command: &str) -> Result<Response, DapError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            if let Some(response) = self.completed.remove(&seq) {
                return Ok(response);
            }
            self.pump_until(deadline, command).await?;
        }
    }

    async fn pump_until(&mut self, deadline: Instant, waiting_for: &str) -> Result<(), DapError> {
        match tokio::time::timeout_at(deadline, self.pump()).await {
            Ok(result) => result,
            Err(_) => Err(DapError::Timeout(waiting_for.to_string())),
        }
    }

    /// Receives one message: responses are matched to their pending request,
    /// events are queued in arrival order.
    async fn pump(&mut self) -> Result<(), DapError> {
        self.check_failed()?;
        match self.incoming.recv().await {
            None => {
                self.failed = Some(DapError::Closed);
                Err(DapError::Closed)
            }
            Some(Err(e)) => {
                let e = DapError::Framing(e);
                self.failed = Some(e.clone());
                Err(e)
            }
            Some(Ok(ProtocolMessage::Response(response))) => {
                if self.pending.remove(&response.request_seq).is_some() {
                    self.completed.insert(response.request_seq, response);
                } else {
                    tracing::warn!(request_seq = response.request_seq, "response to unknown request");
                }
                Ok(())
            }
            Some(Ok(ProtocolMessage::Event(event))) => {
                self.events.push_back(event);
                Ok(())
            }
            Some(Ok(ProtocolMessage::Request(request))) => {
                // reverse requests (runInTerminal, startDebugging) are not supported
                tracing::warn!(command = %request.command, "ignoring reverse request");
                Ok(())
            }
        }
    }

    fn check_failed(&self) -> Result<(), DapError> {
        match &self.failed {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    fn take_event(&mut self, name: &str) -> Option<Event> {
        let index = self.events.iter().position(|e| e.event == name)?;
        self.events.remove(index)
    }

    pub fn pending_requests(&self) -> usize {
        self.pending.len()
    }
}

fn failure_message(response: &Response) -> String {
    response
        .body
        .pointer("/error/format")
        .and_then(Value::as_str)
        .map(str::to_string)
        .or_else(|| response.message.clone())
        .unwrap_or_else(|| "no message".to_string())
}
