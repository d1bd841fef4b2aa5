//! The session event loop: the only owner of the debug backend and the
//! exploration state. Debug events and client commands are handled one at a
//! time, in arrival order.

use std::collections::BTreeMap;

use odbg_core::dap::{DapError, DapSession, HeapView, ResumeKind};
use odbg_core::export::encode_diagram_frame;
use odbg_core::snapshot::{SnapshotHeap, TraceEventKind, TracePlayer};
use odbg_core::{build_diagram, expand_object, layout, DebugEvent, ExplorationState};
use tokio::sync::mpsc;

use crate::protocol::{ClientCommand, StatusFrame, StepKind};

pub type ClientId = u64;

#[derive(Debug)]
pub enum LoopInput {
    Join {
        id: ClientId,
        outbox: mpsc::UnboundedSender<String>,
    },
    Leave {
        id: ClientId,
    },
    Command {
        id: ClientId,
        text: String,
    },
    /// A client sent something other than a text frame.
    NotText {
        id: ClientId,
    },
}

pub enum Backend {
    Snapshot(SnapshotHeap),
    Trace(TracePlayer),
    Dap(Box<DapSession>),
}

/// Heap of the current stop, kept for expansion and depth changes.
enum StopHeap {
    Snapshot(SnapshotHeap),
    Dap(HeapView),
}

struct Stop {
    heap: StopHeap,
    frame_id: String,
    state: ExplorationState,
}

enum Next {
    Input(Option<LoopInput>),
    Debug(Result<DebugEvent, DapError>),
}

pub struct Session {
    backend: Backend,
    depth: usize,
    version: u64,
    clients: BTreeMap<ClientId, mpsc::UnboundedSender<String>>,
    stop: Option<Stop>,
    last_diagram: Option<String>,
    terminated: Option<String>,
}

impl Session {
    pub fn new(backend: Backend, depth: usize) -> Self {
        Self {
            backend,
            depth,
            version: 0,
            clients: BTreeMap::new(),
            stop: None,
            last_diagram: None,
            terminated: None,
        }
    }

    pub async fn run(mut self, mut inputs: mpsc::UnboundedReceiver<LoopInput>) {
        match &mut self.backend {
            Backend::Snapshot(heap) => {
                let heap = heap.clone();
                self.show_snapshot(heap).await;
            }
            Backend::Trace(_) => self.advance_trace(false).await,
            Backend::Dap(_) => {}
        }

        loop {
            let next = match &mut self.backend {
                Backend::Dap(dap) if self.terminated.is_none() => {
                    tokio::select! {
                        input = inputs.recv() => Next::Input(input),
                        event = dap.await_event() => Next::Debug(event),
                    }
                }
                _ => Next::Input(inputs.recv().await),
            };
            match next {
                Next::Input(Some(input)) => self.on_input(input).await,
                Next::Input(None) => break,
                Next::Debug(Ok(event)) => self.on_debug_event(event).await,
                Next::Debug(Err(e)) => self.terminate(format!("debug adapter failed: {e}")),
            }
        }

        if let Backend::Dap(dap) = self.backend {
            if let Err(e) = dap.disconnect().await {
                tracing::debug!("disconnect: {e}");
            }
        }
    }

    async fn on_input(&mut self, input: LoopInput) {
        match input {
            LoopInput::Join { id, outbox } => {
                if let Some(frame) = &self.last_diagram {
                    let _ = outbox.send(frame.clone());
                }
                if let Some(message) = &self.terminated {
                    let _ = outbox.send(StatusFrame::terminated(message.clone(), self.version).to_text());
                }
                self.clients.insert(id, outbox);
            }
            LoopInput::Leave { id } => {
                self.clients.remove(&id);
            }
            LoopInput::NotText { id } => {
                self.reply_error(id, "only text frames are accepted");
            }
            LoopInput::Command { id, text } => match ClientCommand::parse(&text) {
                Ok(command) => {
                    if let Err(message) = self.on_command(command).await {
                        self.reply_error(id, message);
                    }
                }
                Err(message) => self.reply_error(id, message),
            },
        }
    }

    async fn on_command(&mut self, command: ClientCommand) -> Result<(), String> {
        match command {
            ClientCommand::LoadChildren { object_id } => self.load_children(&object_id).await,
            ClientCommand::SetDepth { depth } => {
                self.depth = depth;
                if self.stop.is_some() {
                    self.rebuild().await?;
                }
                Ok(())
            }
            ClientCommand::Step { kind } => {
                let kind = match kind {
                    StepKind::Over => ResumeKind::StepOver,
                    StepKind::In => ResumeKind::StepIn,
                    StepKind::Out => ResumeKind::StepOut,
                };
                self.resume(kind).await
            }
            ClientCommand::Continue {} => self.resume(ResumeKind::Continue).await,
        }
    }

    async fn resume(&mut self, kind: ResumeKind) -> Result<(), String> {
        if self.terminated.is_some() {
            return Err("the debug session has terminated".into());
        }
        match &mut self.backend {
            Backend::Snapshot(_) => Err(format!(
                "`{}` is not supported for a snapshot source",
                kind.command()
            )),
            Backend::Trace(_) => {
                self.advance_trace(kind == ResumeKind::Continue).await;
                Ok(())
            }
            Backend::Dap(dap) => dap.resume(kind).await.map_err(|e| e.to_string()),
        }
    }

    async fn on_debug_event(&mut self, event: DebugEvent) {
        match event {
            DebugEvent::Stopped { thread_id, .. } => {
                self.stop = None;
                let Backend::Dap(dap) = &mut self.backend else { return };
                let thread_id = thread_id.unwrap_or(1);
                match dap.frame_heap_view(thread_id).await {
                    Ok(view) => {
                        let frame_id = view.frame_id();
                        let result = self.show(StopHeap::Dap(view), frame_id).await;
                        if let Err(message) = result {
                            self.broadcast_error(message);
                        }
                    }
                    Err(e) => self.broadcast_error(format!("reading the stopped frame: {e}")),
                }
            }
            DebugEvent::Continued => self.stop = None,
            DebugEvent::Terminated => self.terminate("the debugged program terminated".into()),
        }
    }

    /// Moves to the next trace entry; `to_breakpoint` skips step entries.
    async fn advance_trace(&mut self, to_breakpoint: bool) {
        let Backend::Trace(player) = &mut self.backend else { return };
        let next = if to_breakpoint {
            player.find(|stop| {
                matches!(&stop.event, DebugEvent::Stopped { reason, .. }
                    if reason == TraceEventKind::Breakpoint.as_str())
            })
        } else {
            player.next()
        };
        match next {
            Some(stop) => self.show_snapshot(stop.heap).await,
            None => self.terminate("end of trace".into()),
        }
    }

    async fn show_snapshot(&mut self, heap: SnapshotHeap) {
        let Some(frame_id) = heap.top_frame_id().map(str::to_string) else {
            self.broadcast_error("snapshot has no frames");
            return;
        };
        if let Err(message) = self.show(StopHeap::Snapshot(heap), frame_id).await {
            self.broadcast_error(message);
        }
    }

    async fn show(&mut self, mut heap: StopHeap, frame_id: String) -> Result<(), String> {
        let state = self.extract(&mut heap, &frame_id).await?;
        self.stop = Some(Stop {
            heap,
            frame_id,
            state,
        });
        self.broadcast_current()
    }

    async fn extract(&mut self, heap: &mut StopHeap, frame_id: &str) -> Result<ExplorationState, String> {
        let result = match (heap, &mut self.backend) {
            (StopHeap::Snapshot(h), _) => build_diagram(h, frame_id, self.depth).await,
            (StopHeap::Dap(view), Backend::Dap(dap)) => {
                build_diagram(&mut view.bind(dap), frame_id, self.depth).await
            }
            (StopHeap::Dap(_), _) => unreachable!("adapter views only exist with an adapter backend"),
        };
        result.map_err(|e| format!("extraction failed: {e}"))
    }

    async fn rebuild(&mut self) -> Result<(), String> {
        let Some(mut stop) = self.stop.take() else {
            return Ok(());
        };
        let result = self.extract(&mut stop.heap, &stop.frame_id).await;
        match result {
            Ok(state) => {
                stop.state = state;
                self.stop = Some(stop);
                self.broadcast_current()
            }
            Err(e) => {
                self.stop = Some(stop);
                Err(e)
            }
        }
    }

    async fn load_children(&mut self, object_id: &str) -> Result<(), String> {
        let Some(stop) = &mut self.stop else {
            return Err("no diagram to expand".into());
        };
        if !stop.state.diagram.contains_object(object_id) {
            return Err(format!("unknown object `{object_id}`"));
        }
        let result = match (&mut stop.heap, &mut self.backend) {
            (StopHeap::Snapshot(h), _) => expand_object(&stop.state, h, object_id).await,
            (StopHeap::Dap(view), Backend::Dap(dap)) => {
                expand_object(&stop.state, &mut view.bind(dap), object_id).await
            }
            (StopHeap::Dap(_), _) => unreachable!("adapter views only exist with an adapter backend"),
        };
        stop.state = result.map_err(|e| format!("expansion failed: {e}"))?;
        self.broadcast_current()
    }

    fn broadcast_current(&mut self) -> Result<(), String> {
        let stop = self.stop.as_ref().expect("a stop is current");
        let positioned = layout(&stop.state.diagram, &stop.state.frame_node_id)
            .map_err(|e| format!("layout failed: {e}"))?;
        let frame = encode_diagram_frame(&positioned, self.version + 1)
            .map_err(|e| format!("export failed: {e}"))?;
        self.version += 1;
        self.broadcast(&frame);
        self.last_diagram = Some(frame);
        Ok(())
    }

    fn terminate(&mut self, message: String) {
        if self.terminated.is_some() {
            return;
        }
        self.broadcast(&StatusFrame::terminated(message.clone(), self.version).to_text());
        self.terminated = Some(message);
    }

    fn broadcast_error(&mut self, message: impl Into<String>) {
        self.broadcast(&StatusFrame::error(message, self.version).to_text());
    }

    fn broadcast(&mut self, text: &str) {
        self.clients
            .retain(|_, outbox| outbox.send(text.to_string()).is_ok());
    }

    fn reply_error(&mut self, id: ClientId, message: impl Into<String>) {
        if let Some(outbox) = self.clients.get(&id) {
            let _ = outbox.send(StatusFrame::error(message, self.version).to_text());
        }
    }
}
