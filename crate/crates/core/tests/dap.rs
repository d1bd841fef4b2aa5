mod common;

use std::time::Duration;

use common::*;
use odbg_core::dap::mock::{MockAdapter, MockReport, MockScript};
use odbg_core::dap::{DapError, DapSession, FramingError, LaunchConfig, ResumeKind, RunState};
use odbg_core::snapshot::{load_snapshot, Snapshot, SnapshotHeap};
use odbg_core::{build_diagram, to_xml, DebugEvent, ExtractError, ObjectDiagram, SourceError};
use proptest::prelude::*;
use serde_json::{json, Value};

const TIMEOUT: Duration = Duration::from_secs(5);

fn snapshot_value(s: &Snapshot) -> Value {
    serde_json::from_str(&s.to_json()).unwrap()
}

fn parts_list() -> Snapshot {
    load_snapshot(&read_fixture("parts-list.heap.json")).unwrap()
}

fn handshake() -> Vec<Value> {
    vec![
        json!({"expect": "initialize"}),
        json!({"expect": "launch"}),
        json!({"event": "initialized"}),
        json!({"expect": "configurationDone"}),
    ]
}

fn script(entries: Vec<Value>) -> MockScript {
    MockScript::parse(&Value::Array(entries).to_string()).unwrap()
}

async fn connect(entries: Vec<Value>) -> (DapSession, tokio::task::JoinHandle<MockReport>) {
    let (transport, task) = MockAdapter::new(script(entries)).spawn();
    let session = DapSession::connect_and_initialize(transport, &LaunchConfig::default(), TIMEOUT)
        .await
        .unwrap();
    (session, task)
}

/// Diagram of the current stop, with the adapter's frame node renamed to the
/// snapshot frame's so the two can be compared.
async fn stop_diagram(session: &mut DapSession, depth: usize) -> Result<ObjectDiagram, ExtractError> {
    let RunState::Stopped { thread_id, .. } = *session.state() else {
        panic!("not stopped: {:?}", session.state());
    };
    let mut view = session.frame_heap_view(thread_id).await.unwrap();
    let frame = view.frame_id();
    let state = build_diagram(&mut view.bind(session), &frame, depth).await?;
    let xml = to_xml(&state.diagram)
        .unwrap()
        .replace(&format!("\"frame:{frame}\""), "\"frame:0\"");
    Ok(odbg_core::from_xml(&xml).unwrap())
}

fn snapshot_diagram(s: &Snapshot, depth: usize) -> ObjectDiagram {
    let frame = s.frames[0].id.clone();
    futures::executor::block_on(build_diagram(&mut SnapshotHeap::new(s.clone()), &frame, depth))
        .unwrap()
        .diagram
}

#[tokio::test]
async fn parts_list_script_runs_end_to_end() {
    let (transport, task) =
        MockAdapter::new(MockScript::parse(&read_fixture("parts-list.mock.json")).unwrap()).spawn();
    let config: LaunchConfig =
        serde_json::from_value(json!({"arguments": {"program": "PartsListTest"}})).unwrap();
    let mut session = DapSession::connect_and_initialize(transport, &config, TIMEOUT)
        .await
        .unwrap();

    let mut diagrams = Vec::new();
    loop {
        match session.await_event().await.unwrap() {
            DebugEvent::Stopped { .. } => {
                diagrams.push(stop_diagram(&mut session, 2).await.unwrap());
                let kind = if diagrams.len() == 1 { ResumeKind::StepOver } else { ResumeKind::Continue };
                session.resume(kind).await.unwrap();
            }
            DebugEvent::Continued => {}
            DebugEvent::Terminated => break,
        }
    }
    session.disconnect().await.unwrap();
    let report = task.await.unwrap();
    assert!(report.violations.is_empty(), "{:?}", report.violations);

    assert_eq!(diagrams.len(), 2);
    let cost = |d: &ObjectDiagram| d.object("frame:0").unwrap().attribute("actualCost").unwrap().value.clone();
    assert_eq!(cost(&diagrams[0]), "0");
    assert_eq!(cost(&diagrams[1]), "75");
    assert_eq!(diagrams[1], snapshot_diagram(&parts_list(), 2));

    let commands = report.commands();
    assert_eq!(&commands[..3], ["initialize", "launch", "configurationDone"]);
    assert!(commands.contains(&"next"));
    assert!(commands.contains(&"continue"));
}

#[tokio::test]
async fn launch_failure_is_reported() {
    let (transport, _task) = MockAdapter::new(script(vec![
        json!({"expect": "initialize"}),
        json!({"expect": "launch", "reply": {"success": false, "message": "program not found"}}),
    ]))
    .spawn();
    let err = DapSession::connect_and_initialize(transport, &LaunchConfig::default(), TIMEOUT)
        .await
        .err()
        .unwrap();
    match err {
        DapError::LaunchFailed(message) => assert!(message.contains("program not found")),
        other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn missing_content_length_is_a_framing_error() {
    let (transport, _task) = MockAdapter::new(script(vec![
        json!({"expect": "initialize", "reply": {"body": {}}}),
        json!({"raw": "Content-Type: application/json\r\n\r\n{}"}),
        json!({"sleepMs": 1000}),
    ]))
    .spawn();
    let err = DapSession::connect_and_initialize(transport, &LaunchConfig::default(), TIMEOUT)
        .await
        .err()
        .unwrap();
    assert_eq!(err, DapError::Framing(FramingError::MissingContentLength));
}

#[tokio::test]
async fn closed_connection_reads_as_terminated() {
    let mut entries = handshake();
    entries.push(json!({"close": true}));
    let (mut session, _task) = connect(entries).await;
    assert_eq!(session.await_event().await.unwrap(), DebugEvent::Terminated);
    assert_eq!(session.state(), &RunState::Terminated);
}

#[tokio::test]
async fn step_over_sends_next_and_running_rejects_resume() {
    let snap = snapshot_value(&parts_list());
    let mut entries = handshake();
    entries.extend([
        json!({"stop": {"reason": "breakpoint", "snapshot": snap}}),
        json!({"expect": "next", "arguments": {"threadId": 1}}),
        json!({"stop": {"reason": "step", "snapshot": snap}}),
    ]);
    let (mut session, task) = connect(entries).await;

    assert!(matches!(
        session.resume(ResumeKind::Continue).await,
        Err(DapError::InvalidState(_))
    ));
    assert!(session.await_event().await.unwrap().is_stopped());
    session.resume(ResumeKind::StepOver).await.unwrap();
    assert!(matches!(
        session.resume(ResumeKind::Continue).await,
        Err(DapError::InvalidState(_))
    ));
    assert_eq!(
        session.await_event().await.unwrap(),
        DebugEvent::Stopped { reason: "step".into(), thread_id: Some(1) }
    );
    session.disconnect().await.unwrap();
    let report = task.await.unwrap();
    assert!(report.violations.is_empty(), "{:?}", report.violations);
    assert_eq!(session_resumes(&report), ["next"]);
}

fn session_resumes(report: &MockReport) -> Vec<&str> {
    report
        .commands()
        .into_iter()
        .filter(|c| ["continue", "next", "stepIn", "stepOut"].contains(c))
        .collect()
}

#[tokio::test]
async fn views_go_stale_after_resume() {
    let snap = snapshot_value(&parts_list());
    let mut entries = handshake();
    entries.extend([
        json!({"stop": {"reason": "breakpoint", "snapshot": snap}}),
        json!({"expect": "continue"}),
    ]);
    let (mut session, _task) = connect(entries).await;
    session.await_event().await.unwrap();
    let mut view = session.frame_heap_view(1).await.unwrap();
    let frame = view.frame_id();
    build_diagram(&mut view.bind(&mut session), &frame, 0).await.unwrap();
    session.resume(ResumeKind::Continue).await.unwrap();
    let err = build_diagram(&mut view.bind(&mut session), &frame, 1).await.unwrap_err();
    assert!(matches!(
        err,
        ExtractError::Roots { source: SourceError::StaleView, .. }
    ));
}

#[tokio::test]
async fn repeated_reads_are_memoized() {
    let snap = snapshot_value(&parts_list());
    let mut entries = handshake();
    entries.push(json!({"stop": {"reason": "breakpoint", "snapshot": snap}}));
    let (mut session, _task) = connect(entries).await;
    session.await_event().await.unwrap();
    let mut view = session.frame_heap_view(1).await.unwrap();
    let frame = view.frame_id();
    let first = build_diagram(&mut view.bind(&mut session), &frame, 3).await.unwrap();
    let requests = view.variables_requests();
    let second = build_diagram(&mut view.bind(&mut session), &frame, 3).await.unwrap();
    assert_eq!(first, second);
    assert_eq!(view.variables_requests(), requests);
}

#[tokio::test]
async fn path_ids_without_memory_references() {
    let snap = snapshot_value(&parts_list());
    let mut entries = handshake();
    entries.push(json!({"stop": {"reason": "breakpoint", "snapshot": snap, "memoryReferences": false}}));
    let (mut session, _task) = connect(entries).await;
    session.await_event().await.unwrap();
    let d = stop_diagram(&mut session, 1).await.unwrap();
    let ids = d.object_ids();
    for id in [
        "root/table",
        "root/table/components",
        "root/table/components[1]",
        "root/table/components[2]",
    ] {
        assert!(ids.contains(id), "{id} missing from {ids:?}");
    }
    // same shape as the snapshot diagram
    let expected = snapshot_diagram(&parts_list(), 1);
    assert_eq!(d.objects.len(), expected.objects.len());
    assert_eq!(d.links.len(), expected.links.len());
}

#[tokio::test]
async fn events_interleaved_with_responses_keep_pairing() {
    let snap = snapshot_value(&parts_list());
    let entries = vec![
        json!({"event": "output", "body": {"output": "booting"}}),
        json!({"expect": "initialize"}),
        json!({"event": "output", "body": {"output": "x"}}),
        json!({"expect": "launch"}),
        json!({"event": "initialized"}),
        json!({"event": "output", "body": {"output": "y"}}),
        json!({"expect": "configurationDone"}),
        json!({"stop": {"reason": "breakpoint", "snapshot": snap}}),
        json!({"event": "output", "body": {"output": "z"}}),
    ];
    let (mut session, _task) = connect(entries).await;
    assert!(session.await_event().await.unwrap().is_stopped());
    let d = stop_diagram(&mut session, 2).await.unwrap();
    assert_eq!(d, snapshot_diagram(&parts_list(), 2));
    assert_eq!(session.pending_requests(), 0);
}

/// Runs a two-stop session with every adapter write split per `plan`.
fn run_chunked(plan: Vec<usize>, s: &Snapshot, depth: usize) -> Vec<ObjectDiagram> {
    let snap = snapshot_value(s);
    let mut entries = handshake();
    entries.extend([
        json!({"stop": {"reason": "breakpoint", "snapshot": snap}}),
        json!({"expect": "next"}),
        json!({"event": "continued"}),
        json!({"stop": {"reason": "step", "snapshot": snap}}),
        json!({"expect": "continue"}),
        json!({"event": "terminated"}),
    ]);
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap();
    rt.block_on(async move {
        let (transport, task) = MockAdapter::new(script(entries)).with_chunk_plan(plan).spawn();
        let mut session = DapSession::connect_and_initialize(transport, &LaunchConfig::default(), TIMEOUT)
            .await
            .unwrap();
        let mut out = Vec::new();
        loop {
            match session.await_event().await.unwrap() {
                DebugEvent::Stopped { .. } => {
                    out.push(stop_diagram(&mut session, depth).await.unwrap());
                    let kind = if out.len() == 1 { ResumeKind::StepOver } else { ResumeKind::Continue };
                    session.resume(kind).await.unwrap();
                }
                DebugEvent::Continued => {}
                DebugEvent::Terminated => break,
            }
        }
        session.disconnect().await.unwrap();
        let report = task.await.unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chunked_framing_never_corrupts_pairing(
        plan in prop::collection::vec(1usize..64, 1..8),
        s in snapshot_strategy(12),
        depth in 0usize..4,
    ) {
        let expected = snapshot_diagram(&s, depth);
        let got = run_chunked(plan, &s, depth);
        prop_assert_eq!(got.len(), 2);
        prop_assert_eq!(&got[0], &expected);
        prop_assert_eq!(&got[1], &expected);
    }
}

#[tokio::test]
async fn roots_and_objects_convert_by_variables_reference() {
    let snap = json!({
        "frames": [{"id": "0", "name": "main", "locals": [
            {"name": "x", "kind": "primitive", "type": "int", "value": "3"},
            {"name": "p", "ref": "obj"}
        ]}],
        "objects": {
            "obj": {"type": "Pair", "fields": [
                {"name": "left", "kind": "primitive", "type": "int", "value": "1"},
                {"name": "right", "kind": "primitive", "type": "int", "value": "2"},
                {"name": "inner", "ref": "leaf"}
            ]},
            "leaf": {"type": "Leaf", "fields": []}
        }
    });
    let mut entries = handshake();
    entries.push(json!({"stop": {"reason": "breakpoint", "snapshot": snap}}));
    let (mut session, _task) = connect(entries).await;
    session.await_event().await.unwrap();
    let mut view = session.frame_heap_view(1).await.unwrap();
    let frame = view.frame_id();
    let mut bound = view.bind(&mut session);

    use odbg_core::heap::{FieldValue, HeapSource};
    let roots = bound.list_roots(&frame).await.unwrap();
    assert_eq!(roots.len(), 2);
    assert_eq!(roots[0].value, FieldValue::primitive("int", "3"));
    assert_eq!(roots[1].value, FieldValue::reference("obj"));

    let record = bound.read_object("obj").await.unwrap();
    assert_eq!(record.type_name, "Pair");
    let primitives = record
        .fields
        .iter()
        .filter(|f| matches!(f.value, FieldValue::Primitive { .. }))
        .count();
    assert_eq!(primitives, 2);
    assert_eq!(record.references().collect::<Vec<_>>(), [("inner", "leaf")]);
}

#[tokio::test]
async fn step_in_then_stop_is_delivered() {
    let snap = snapshot_value(&parts_list());
    let mut entries = handshake();
    entries.extend([
        json!({"stop": {"reason": "breakpoint", "snapshot": snap}}),
        json!({"expect": "stepIn", "arguments": {"threadId": 1}}),
        json!({"stop": {"reason": "step", "snapshot": snap}}),
    ]);
    let (mut session, task) = connect(entries).await;
    assert!(session.await_event().await.unwrap().is_stopped());
    session.resume(ResumeKind::StepIn).await.unwrap();
    assert_eq!(session.state(), &RunState::Running);
    assert!(session.await_event().await.unwrap().is_stopped());
    session.disconnect().await.unwrap();
    assert!(task.await.unwrap().violations.is_empty());
}
