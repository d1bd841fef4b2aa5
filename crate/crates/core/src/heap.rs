//! Abstract view of a paused program's heap.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Value held by a local variable or an object field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldValue {
    Primitive { type_name: String, value: String },
    Reference(String),
    Null,
}

impl FieldValue {
    pub fn primitive(type_name: impl Into<String>, value: impl Into<String>) -> Self {
        FieldValue::Primitive {
            type_name: type_name.into(),
            value: value.into(),
        }
    }

    pub fn reference(id: impl Into<String>) -> Self {
        FieldValue::Reference(id.into())
    }

    pub fn as_reference(&self) -> Option<&str> {
        match self {
            FieldValue::Reference(id) => Some(id),
            _ => None,
        }
    }
}

/// A named slot: a local variable of a frame or a field of an object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub value: FieldValue,
}

impl Field {
    pub fn new(name: impl Into<String>, value: FieldValue) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

/// Local variable of a stack frame.
pub type RootVariable = Field;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub type_name: String,
    pub fields: Vec<Field>,
}

impl ObjectRecord {
    pub fn references(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fields
            .iter()
            .filter_map(|f| f.value.as_reference().map(|to| (f.name.as_str(), to)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("frame `{0}` not found")]
    FrameNotFound(String),
    #[error("object `{0}` not found")]
    ObjectNotFound(String),
    #[error("heap view is stale: the program resumed after it was taken")]
    StaleView,
    #[error("{0}")]
    Backend(String),
}

/// Provider of root variables and per-object fields for one paused state.
///
/// Reads are deterministic until the program resumes. Implementations take
/// `&mut self` because live backends are stateful request/response peers.
#[allow(async_fn_in_trait)]
pub trait HeapSource {
    async fn list_roots(&mut self, frame_id: &str) -> Result<Vec<RootVariable>, SourceError>;

    async fn read_object(&mut self, id: &str) -> Result<ObjectRecord, SourceError>;
}

impl<S: HeapSource + ?Sized> HeapSource for &mut S {
    async fn list_roots(&mut self, frame_id: &str) -> Result<Vec<RootVariable>, SourceError> {
        (**self).list_roots(frame_id).await
    }

    async fn read_object(&mut self, id: &str) -> Result<ObjectRecord, SourceError> {
        (**self).read_object(id).await
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Primitive { type_name, value } => write!(f, "{value}: {type_name}"),
            FieldValue::Reference(id) => write!(f, "-> {id}"),
            FieldValue::Null => f.write_str("null"),
        }
    }
}

/// Whether `field` may join `existing` under the naming rule: attribute
/// names are unique and never shared with a reference, while a reference
/// name may repeat once per distinct target (a flattened collection).
pub(crate) fn name_clashes(existing: &[Field], field: &Field) -> bool {
    existing.iter().any(|prev| {
        prev.name == field.name
            && match (prev.value.as_reference(), field.value.as_reference()) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
    })
}

/// Renames fields that break the naming rule to `name#2`, `name#3`, …
pub fn disambiguate_names(fields: &mut [Field]) {
    for i in 1..fields.len() {
        let (before, rest) = fields.split_at_mut(i);
        let field = &mut rest[0];
        if !name_clashes(before, field) {
            continue;
        }
        let base = field.name.clone();
        let mut k = 2;
        loop {
            field.name = format!("{base}#{k}");
            if !name_clashes(before, field) {
                break;
            }
            k += 1;
        }
    }
}
