//! File-backed heap snapshots (`.heap.json`) and replayable session traces
//! (`.trace.json`).
//!
//! ```json
//! {
//!   "frames": [{"id": "main", "name": "test", "locals": [
//!     {"name": "p", "ref": "o1"},
//!     {"name": "n", "kind": "primitive", "type": "int", "value": "3"}
//!   ]}],
//!   "objects": {
//!     "o1": {"type": "Product", "fields": [{"name": "next", "kind": "null"}]}
//!   }
//! }
//! ```
//!
//! A trace is an array of `{"event": "breakpoint" | "step", "label": …, "snapshot": …}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::event::DebugEvent;
use crate::heap::{name_clashes, Field, FieldValue, HeapSource, ObjectRecord, RootVariable, SourceError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub id: String,
    pub name: String,
    pub locals: Vec<RootVariable>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Snapshot {
    pub frames: Vec<Frame>,
    pub objects: BTreeMap<String, ObjectRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEventKind {
    Breakpoint,
    Step,
}

impl TraceEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEventKind::Breakpoint => "breakpoint",
            TraceEventKind::Step => "step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub event: TraceEventKind,
    pub label: String,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTrace {
    pub entries: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{context}: {message}")]
    Shape { context: String, message: String },
    #[error("duplicate object id `{0}`")]
    DuplicateObjectId(String),
    #[error("duplicate frame id `{0}`")]
    DuplicateFrameId(String),
    #[error("{owner}: duplicate field `{name}`")]
    DuplicateField { owner: String, name: String },
    #[error("{owner}: field `{field}` references missing object `{id}`")]
    DanglingReference {
        owner: String,
        field: String,
        id: String,
    },
    #[error("trace has no entries")]
    EmptyTrace,
}

impl From<serde_json::Error> for SnapshotError {
    fn from(e: serde_json::Error) -> Self {
        SnapshotError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

// ---- wire representation -------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    name: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    type_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    id: String,
    name: String,
    locals: Vec<RawSlot>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    #[serde(rename = "type")]
    type_name: String,
    fields: Vec<RawSlot>,
}

/// Object map that keeps duplicate keys so they can be reported.
#[derive(Debug, Clone, Default)]
struct RawObjects(Vec<(String, RawObject)>);

impl<'de> Deserialize<'de> for RawObjects {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RawObjects;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from object id to object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawObjects, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, RawObject>()? {
                    entries.push((k, v));
                }
                Ok(RawObjects(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

impl Serialize for RawObjects {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(k, v)| (k, v)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSnapshot {
    frames: Vec<RawFrame>,
    objects: RawObjects,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraceEntry {
    event: TraceEventKind,
    label: String,
    snapshot: RawSnapshot,
}

fn slot_to_field(owner: &str, slot: RawSlot) -> Result<Field, SnapshotError> {
    let shape = |message: &str| SnapshotError::Shape {
        context: format!("{owner}: field `{}`", slot.name),
        message: message.to_string(),
    };
    if slot.name.is_empty() {
        return Err(SnapshotError::Shape {
            context: owner.to_string(),
            message: "field with empty name".into(),
        });
    }
    let value = match (&slot.reference, slot.kind.as_deref()) {
        (Some(id), None) => {
            if slot.type_name.is_some() || slot.value.is_some() {
                return Err(shape("a reference carries no `type` or `value`"));
            }
            FieldValue::Reference(id.clone())
        }
        (Some(_), Some(_)) => return Err(shape("a reference has no `kind`")),
        (None, Some("primitive")) => match (&slot.type_name, &slot.value) {
            (Some(t), Some(v)) => FieldValue::primitive(t.clone(), v.clone()),
            _ => return Err(shape("a primitive needs both `type` and `value`")),
        },
        (None, Some("null")) => {
            if slot.type_name.is_some() || slot.value.is_some() {
                return Err(shape("a null carries no `type` or `value`"));
            }
            FieldValue::Null
        }
        (None, Some(other)) => return Err(shape(&format!("unknown kind `{other}`"))),
        (None, None) => return Err(shape("expected `ref` or `kind`")),
    };
    Ok(Field {
        name: slot.name,
        value,
    })
}

fn field_to_slot(field: &Field) -> RawSlot {
    let mut slot = RawSlot {
        name: field.name.clone(),
        reference: None,
        kind: None,
        type_name: None,
        value: None,
    };
    match &field.value {
        FieldValue::Reference(id) => slot.reference = Some(id.clone()),
        FieldValue::Primitive { type_name, value } => {
            slot.kind = Some("primitive".into());
            slot.type_name = Some(type_name.clone());
            slot.value = Some(value.clone());
        }
        FieldValue::Null => slot.kind = Some("null".into()),
    }
    slot
}

fn check_field_names(owner: &str, fields: &[Field]) -> Result<(), SnapshotError> {
    for (i, field) in fields.iter().enumerate() {
        if name_clashes(&fields[..i], field) {
            return Err(SnapshotError::DuplicateField {
                owner: owner.to_string(),
                name: field.name.clone(),
            });
        }
    }
    Ok(())
}

impl TryFrom<RawSnapshot> for Snapshot {
    type Error = SnapshotError;

    fn try_from(raw: RawSnapshot) -> Result<Self, SnapshotError> {
        let mut objects = BTreeMap::new();
        for (id, obj) in raw.objects.0 {
            if id.is_empty() {
                return Err(SnapshotError::Shape {
                    context: "objects".into(),
                    message: "empty object id".into(),
                });
            }
            if objects.contains_key(&id) {
                return Err(SnapshotError::DuplicateObjectId(id));
            }
            let owner = format!("object `{id}`");
            let fields = obj
                .fields
                .into_iter()
                .map(|s| slot_to_field(&owner, s))
                .collect::<Result<Vec<_>, _>>()?;
            check_field_names(&owner, &fields)?;
            objects.insert(
                id.clone(),
                ObjectRecord {
                    id,
                    type_name: obj.type_name,
                    fields,
                },
            );
        }

        let mut frames: Vec<Frame> = Vec::new();
        for frame in raw.frames {
            if frames.iter().any(|f| f.id == frame.id) {
                return Err(SnapshotError::DuplicateFrameId(frame.id));
            }
            let owner = format!("frame `{}`", frame.id);
            let locals = frame
                .locals
                .into_iter()
                .map(|s| slot_to_field(&owner, s))
                .collect::<Result<Vec<_>, _>>()?;
            check_field_names(&owner, &locals)?;
            frames.push(Frame {
                id: frame.id,
                name: frame.name,
                locals,
            });
        }

        let snapshot = Snapshot { frames, objects };
        snapshot.check_references()?;
        Ok(snapshot)
    }
}

impl From<&Snapshot> for RawSnapshot {
    fn from(s: &Snapshot) -> Self {
        RawSnapshot {
            frames: s
                .frames
                .iter()
                .map(|f| RawFrame {
                    id: f.id.clone(),
                    name: f.name.clone(),
                    locals: f.locals.iter().map(field_to_slot).collect(),
                })
                .collect(),
            objects: RawObjects(
                s.objects
                    .iter()
                    .map(|(id, o)| {
                        (
                            id.clone(),
                            RawObject {
                                type_name: o.type_name.clone(),
                                fields: o.fields.iter().map(field_to_slot).collect(),
                            },
                        )
                    })
                    .collect(),
            ),
        }
    }
}

// ---- public API ------------------------------------------------------------

pub fn load_snapshot(text: &str) -> Result<Snapshot, SnapshotError> {
    let raw: RawSnapshot = serde_json::from_str(text)?;
    Snapshot::try_from(raw)
}

pub fn load_trace(text: &str) -> Result<SessionTrace, SnapshotError> {
    let raw: Vec<RawTraceEntry> = serde_json::from_str(text)?;
    if raw.is_empty() {
        return Err(SnapshotError::EmptyTrace);
    }
    let entries = raw
        .into_iter()
        .map(|e| {
            Ok(TraceEntry {
                event: e.event,
                label: e.label,
                snapshot: Snapshot::try_from(e.snapshot)?,
            })
        })
        .collect::<Result<Vec<_>, SnapshotError>>()?;
    Ok(SessionTrace { entries })
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&RawSnapshot::from(self))
            .expect("snapshot serialization is infallible");
        text.push('\n');
        text
    }

    pub fn top_frame(&self) -> Option<&Frame> {
        self.frames.first()
    }

    pub fn frame(&self, id: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.id == id)
    }

    fn check_references(&self) -> Result<(), SnapshotError> {
        let dangling = |owner: String, fields: &[Field]| {
            for f in fields {
                if let Some(id) = f.value.as_reference() {
                    if !self.objects.contains_key(id) {
                        return Err(SnapshotError::DanglingReference {
                            owner,
                            field: f.name.clone(),
                            id: id.to_string(),
                        });
                    }
                }
            }
            Ok(())
        };
        for frame in &self.frames {
            dangling(format!("frame `{}`", frame.id), &frame.locals)?;
        }
        for (id, obj) in &self.objects {
            dangling(format!("object `{id}`"), &obj.fields)?;
        }
        Ok(())
    }
}

impl SessionTrace {
    pub fn to_json(&self) -> String {
        let raw: Vec<RawTraceEntry> = self
            .entries
            .iter()
            .map(|e| RawTraceEntry {
                event: e.event,
                label: e.label.clone(),
                snapshot: RawSnapshot::from(&e.snapshot),
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&raw).expect("trace serialization is infallible");
        text.push('\n');
        text
    }

    pub fn single(event: TraceEventKind, label: impl Into<String>, snapshot: Snapshot) -> Self {
        SessionTrace {
            entries: vec![TraceEntry {
                event,
                label: label.into(),
                snapshot,
            }],
        }
    }
}

/// [`HeapSource`] over an immutable snapshot. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct SnapshotHeap {
    snapshot: Arc<Snapshot>,
}

impl SnapshotHeap {
    pub fn new(snapshot: Snapshot) -> Self {
        Self {
            snapshot: Arc::new(snapshot),
        }
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    pub fn top_frame_id(&self) -> Option<&str> {
        self.snapshot.top_frame().map(|f| f.id.as_str())
    }

    pub fn object_count(&self) -> usize {
        self.snapshot.objects.len()
    }
}

impl HeapSource for SnapshotHeap {
    async fn list_roots(&mut self, frame_id: &str) -> Result<Vec<RootVariable>, SourceError> {
        self.snapshot
            .frame(frame_id)
            .map(|f| f.locals.clone())
            .ok_or_else(|| SourceError::FrameNotFound(frame_id.to_string()))
    }

    async fn read_object(&mut self, id: &str) -> Result<ObjectRecord, SourceError> {
        self.snapshot
            .objects
            .get(id)
            .cloned()
            .ok_or_else(|| SourceError::ObjectNotFound(id.to_string()))
    }
}

/// One replayed stop: the event and a heap view of that moment.
#[derive(Debug, Clone)]
pub struct TraceStop {
    pub event: DebugEvent,
    pub label: String,
    pub heap: SnapshotHeap,
}

/// Replays a trace as a sequence of stopped events, in order.
#[derive(Debug, Clone)]
pub struct TracePlayer {
    entries: std::vec::IntoIter<TraceEntry>,
}

pub fn play_trace(trace: SessionTrace) -> TracePlayer {
    TracePlayer {
        entries: trace.entries.into_iter(),
    }
}

impl TracePlayer {
    pub fn remaining(&self) -> usize {
        self.entries.len()
    }
}

impl Iterator for TracePlayer {
    type Item = TraceStop;

    fn next(&mut self) -> Option<TraceStop> {
        let entry = self.entries.next()?;
        Some(TraceStop {
            event: DebugEvent::Stopped {
                reason: entry.event.as_str().to_string(),
                thread_id: None,
            },
            label: entry.label,
            heap: SnapshotHeap::new(entry.snapshot),
        })
    }
}
