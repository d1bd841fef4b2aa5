//! Depth-bounded object-diagram extraction and on-demand expansion.
//!
//! Root objects (referenced by locals of the frame) sit at hop 0. A node is
//! *scanned* when its hop count is below the requested depth: its outgoing
//! links are emitted and its children are visited. Nodes at hop == depth are
//! the *frontier*: they appear with their primitive attributes only.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::heap::{FieldValue, HeapSource, ObjectRecord, SourceError};
use crate::model::{AttributeValue, LinkEdge, LinkKey, ObjectDiagram, ObjectNode};

pub const FRAME_NODE_TYPE: &str = "<StackFrame>";

pub fn frame_node_id(frame_id: &str) -> String {
    format!("frame:{frame_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("frame `{0}` not found")]
    FrameNotFound(String),
    #[error("object `{0}` not found")]
    ObjectNotFound(String),
    #[error("reading object `{object}`: {source}")]
    Source {
        object: String,
        #[source]
        source: SourceError,
    },
    #[error("listing roots of frame `{frame}`: {source}")]
    Roots {
        frame: String,
        #[source]
        source: SourceError,
    },
}

/// A diagram together with which of its objects have had their links loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationState {
    /// Always canonical.
    pub diagram: ObjectDiagram,
    pub scanned: BTreeSet<String>,
    pub frame_node_id: String,
}

impl ExplorationState {
    pub fn is_scanned(&self, id: &str) -> bool {
        id == self.frame_node_id || self.scanned.contains(id)
    }

    /// Objects shown without their outgoing links.
    pub fn frontier(&self) -> Vec<String> {
        self.diagram
            .objects
            .iter()
            .filter(|o| !self.is_scanned(&o.id))
            .map(|o| o.id.clone())
            .collect()
    }
}

#[derive(Default)]
struct Builder {
    nodes: BTreeMap<String, ObjectNode>,
    links: BTreeSet<LinkKey>,
    scanned: BTreeSet<String>,
}

impl Builder {
    fn from_state(state: &ExplorationState) -> Self {
        Self {
            nodes: state
                .diagram
                .objects
                .iter()
                .map(|o| (o.id.clone(), o.clone()))
                .collect(),
            links: state.diagram.link_keys(),
            scanned: state.scanned.clone(),
        }
    }

    fn link(&mut self, from: &str, type_name: &str, to: &str) {
        self.links.insert(LinkKey {
            from: from.to_string(),
            type_name: type_name.to_string(),
            to: to.to_string(),
        });
    }

    fn finish(self, frame_node_id: String) -> ExplorationState {
        let mut diagram = ObjectDiagram {
            objects: self.nodes.into_values().collect(),
            links: self.links.into_iter().map(LinkEdge::from).collect(),
        };
        diagram.canonicalize_in_place();
        ExplorationState {
            diagram,
            scanned: self.scanned,
            frame_node_id,
        }
    }
}

/// Node for `id` with the record's primitive and null fields as attributes.
/// A repeated attribute name keeps its first occurrence.
fn node_from_record(id: &str, record: &ObjectRecord) -> ObjectNode {
    let mut node = ObjectNode::new(id, record.type_name.clone());
    let mut names = HashSet::new();
    for field in &record.fields {
        let attr = match &field.value {
            FieldValue::Primitive { type_name, value } => {
                AttributeValue::new(field.name.clone(), type_name.clone(), value.clone())
            }
            FieldValue::Null => AttributeValue::null(field.name.clone()),
            FieldValue::Reference(_) => continue,
        };
        if names.insert(field.name.clone()) {
            node.attributes.push(attr);
        }
    }
    node
}

async fn read<S: HeapSource>(source: &mut S, id: &str) -> Result<ObjectRecord, ExtractError> {
    source.read_object(id).await.map_err(|e| match e {
        SourceError::ObjectNotFound(missing) if missing == id => {
            ExtractError::ObjectNotFound(missing)
        }
        other => ExtractError::Source {
            object: id.to_string(),
            source: other,
        },
    })
}

/// Builds the diagram for `frame_id`, following at most `depth` link hops
/// from the root objects. Each object is read at most once.
pub async fn build_diagram<S: HeapSource>(
    source: &mut S,
    frame_id: &str,
    depth: usize,
) -> Result<ExplorationState, ExtractError> {
    let roots = source.list_roots(frame_id).await.map_err(|e| match e {
        SourceError::FrameNotFound(f) => ExtractError::FrameNotFound(f),
        other => ExtractError::Roots {
            frame: frame_id.to_string(),
            source: other,
        },
    })?;

    let frame_id_node = frame_node_id(frame_id);
    let mut frame = ObjectNode::new(frame_id_node.clone(), FRAME_NODE_TYPE);
    let mut builder = Builder::default();
    let mut visited: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<(String, usize)> = VecDeque::new();

    for root in &roots {
        match &root.value {
            FieldValue::Primitive { type_name, value } => {
                if frame.attribute(&root.name).is_none() {
                    frame.attributes.push(AttributeValue::new(
                        root.name.clone(),
                        type_name.clone(),
                        value.clone(),
                    ));
                }
            }
            FieldValue::Null => {
                if frame.attribute(&root.name).is_none() {
                    frame.attributes.push(AttributeValue::null(root.name.clone()));
                }
            }
            FieldValue::Reference(id) => {
                builder.link(&frame_id_node, &root.name, id);
                if visited.insert(id.clone()) {
                    queue.push_back((id.clone(), 0));
                }
            }
        }
    }
    builder.nodes.insert(frame_id_node.clone(), frame);

    while let Some((id, hop)) = queue.pop_front() {
        let record = read(source, &id).await?;
        builder.nodes.insert(id.clone(), node_from_record(&id, &record));
        if hop < depth {
            builder.scanned.insert(id.clone());
            for (name, to) in record.references() {
                builder.link(&id, name, to);
                if visited.insert(to.to_string()) {
                    queue.push_back((to.to_string(), hop + 1));
                }
            }
        }
    }

    Ok(builder.finish(frame_id_node))
}

/// Loads the outgoing links and direct children of `object_id`.
/// Returns the state unchanged when the object is already scanned.
pub async fn expand_object<S: HeapSource>(
    state: &ExplorationState,
    source: &mut S,
    object_id: &str,
) -> Result<ExplorationState, ExtractError> {
    if !state.diagram.contains_object(object_id) {
        return Err(ExtractError::ObjectNotFound(object_id.to_string()));
    }
    if state.is_scanned(object_id) {
        return Ok(state.clone());
    }

    let mut builder = Builder::from_state(state);
    let record = read(source, object_id).await?;
    for (name, to) in record.references() {
        builder.link(object_id, name, to);
        if !builder.nodes.contains_key(to) {
            let child = read(source, to).await?;
            builder.nodes.insert(to.to_string(), node_from_record(to, &child));
        }
    }
    builder.scanned.insert(object_id.to_string());
    Ok(builder.finish(state.frame_node_id.clone()))
}

/// Extraction with no depth bound: every reachable object is scanned.
pub async fn full_closure<S: HeapSource>(
    source: &mut S,
    frame_id: &str,
) -> Result<ExplorationState, ExtractError> {
    build_diagram(source, frame_id, usize::MAX).await
}
