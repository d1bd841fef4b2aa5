use std::collections::HashMap;

use serde_json::json;

use super::protocol::{ScopesBody, Variable, VariablesBody};
use super::session::{DapError, DapSession};
use crate::heap::{disambiguate_names, Field, FieldValue, HeapSource, ObjectRecord, RootVariable, SourceError};

const UNKNOWN_TYPE: &str = "unknown";

#[derive(Debug, Clone)]
struct Handle {
    reference: i64,
    type_name: String,
}

/// Lazily populated view of the top frame of one stop.
///
/// Object ids are the adapter's `memoryReference` when it supplies one, and
/// otherwise a path `root/<variable>/<field>/…`, with `[k]` appended to the
/// k-th repeat of a sibling name. Children with a zero `variablesReference`
/// are attributes; the rest are linked objects.
#[derive(Debug)]
pub struct HeapView {
    epoch: u64,
    frame_id: i64,
    handles: HashMap<String, Handle>,
    records: HashMap<String, ObjectRecord>,
    roots: Option<Vec<RootVariable>>,
    variables_requests: usize,
}

impl HeapView {
    pub(crate) fn new(epoch: u64, frame_id: i64) -> Self {
        Self {
            epoch,
            frame_id,
            handles: HashMap::new(),
            records: HashMap::new(),
            roots: None,
            variables_requests: 0,
        }
    }

    pub fn frame_id(&self) -> String {
        self.frame_id.to_string()
    }

    /// Number of `variables` requests issued through this view so far.
    pub fn variables_requests(&self) -> usize {
        self.variables_requests
    }

    pub fn bind<'a>(&'a mut self, session: &'a mut DapSession) -> BoundHeapView<'a> {
        BoundHeapView {
            view: self,
            session,
        }
    }

    fn convert(&mut self, parent_path: &str, variables: Vec<Variable>) -> Vec<Field> {
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut fields: Vec<Field> = variables
            .into_iter()
            .map(|var| {
                let repeat = seen.entry(var.name.clone()).or_default();
                let path = match *repeat {
                    0 => format!("{parent_path}/{}", var.name),
                    k => format!("{parent_path}/{}[{k}]", var.name),
                };
                *repeat += 1;
                let value = if var.variables_reference > 0 {
                    let id = var
                        .memory_reference
                        .filter(|m| !m.is_empty())
                        .unwrap_or(path);
                    let type_name = var
                        .type_name
                        .filter(|t| !t.is_empty())
                        .unwrap_or_else(|| var.value.clone());
                    self.handles.entry(id.clone()).or_insert(Handle {
                        reference: var.variables_reference,
                        type_name,
                    });
                    FieldValue::Reference(id)
                } else {
                    let type_name = var
                        .type_name
                        .filter(|t| !t.is_empty())
                        .unwrap_or_else(|| UNKNOWN_TYPE.to_string());
                    FieldValue::primitive(type_name, var.value)
                };
                Field::new(var.name, value)
            })
            .collect();
        disambiguate_names(&mut fields);
        fields
    }
}

pub struct BoundHeapView<'a> {
    view: &'a mut HeapView,
    session: &'a mut DapSession,
}

fn backend(e: DapError) -> SourceError {
    SourceError::Backend(e.to_string())
}

impl BoundHeapView<'_> {
    fn check_fresh(&self) -> Result<(), SourceError> {
        if !self.session.is_stopped() || self.session.stop_epoch() != self.view.epoch {
            return Err(SourceError::StaleView);
        }
        Ok(())
    }

    async fn variables(&mut self, reference: i64) -> Result<Vec<Variable>, SourceError> {
        self.view.variables_requests += 1;
        let body = self
            .session
            .request("variables", json!({ "variablesReference": reference }))
            .await
            .map_err(backend)?;
        let body: VariablesBody = serde_json::from_value(body)
            .map_err(|e| SourceError::Backend(format!("malformed variables response: {e}")))?;
        Ok(body.variables)
    }
}

impl HeapSource for BoundHeapView<'_> {
    async fn list_roots(&mut self, frame_id: &str) -> Result<Vec<RootVariable>, SourceError> {
        self.check_fresh()?;
        if frame_id != self.view.frame_id() {
            return Err(SourceError::FrameNotFound(frame_id.to_string()));
        }
        if let Some(roots) = &self.view.roots {
            return Ok(roots.clone());
        }
        let body = self
            .session
            .request("scopes", json!({ "frameId": self.view.frame_id }))
            .await
            .map_err(backend)?;
        let scopes: ScopesBody = serde_json::from_value(body)
            .map_err(|e| SourceError::Backend(format!("malformed scopes response: {e}")))?;
        let mut variables = Vec::new();
        for scope in scopes.scopes.iter().filter(|s| !s.expensive && s.variables_reference > 0) {
            variables.extend(self.variables(scope.variables_reference).await?);
        }
        let roots = self.view.convert("root", variables);
        self.view.roots = Some(roots.clone());
        Ok(roots)
    }

    async fn read_object(&mut self, id: &str) -> Result<ObjectRecord, SourceError> {
        self.check_fresh()?;
        if let Some(record) = self.view.records.get(id) {
            return Ok(record.clone());
        }
        let handle = self
            .view
            .handles
            .get(id)
            .cloned()
            .ok_or_else(|| SourceError::ObjectNotFound(id.to_string()))?;
        let children = self.variables(handle.reference).await?;
        let record = ObjectRecord {
            id: id.to_string(),
            type_name: handle.type_name,
            fields: self.view.convert(id, children),
        };
        self.view.records.insert(id.to_string(), record.clone());
        Ok(record)
    }
}
