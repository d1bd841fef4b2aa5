//! Object-diagram data model: typed objects with primitive attributes and
//! typed links between them.
//!
//! All ordering is plain byte-wise string comparison so that canonical
//! output is identical across platforms.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Type and value used for a null reference shown as an attribute.
pub const NULL_LITERAL: &str = "null";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeValue {
    pub name: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub value: String,
}

impl AttributeValue {
    pub fn new(
        name: impl Into<String>,
        type_name: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            type_name: type_name.into(),
            value: value.into(),
        }
    }

    pub fn null(name: impl Into<String>) -> Self {
        Self::new(name, NULL_LITERAL, NULL_LITERAL)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub attributes: Vec<AttributeValue>,
}

impl ObjectNode {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            type_name: type_name.into(),
            attributes: Vec::new(),
        }
    }

    pub fn with_attribute(mut self, attribute: AttributeValue) -> Self {
        self.attributes.push(attribute);
        self
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeValue> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkEdge {
    #[serde(rename = "type")]
    pub type_name: String,
    pub from: String,
    pub to: String,
}

impl LinkEdge {
    pub fn new(
        type_name: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
    ) -> Self {
        Self {
            type_name: type_name.into(),
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn key(&self) -> LinkKey {
        LinkKey {
            from: self.from.clone(),
            type_name: self.type_name.clone(),
            to: self.to.clone(),
        }
    }
}

/// Identity of a link. Field order gives the canonical `(from, type, to)` sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkKey {
    pub from: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub to: String,
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.from, self.type_name, self.to)
    }
}

impl From<LinkKey> for LinkEdge {
    fn from(key: LinkKey) -> Self {
        LinkEdge {
            type_name: key.type_name,
            from: key.from,
            to: key.to,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectDiagram {
    pub objects: Vec<ObjectNode>,
    pub links: Vec<LinkEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Violation {
    EmptyObjectId,
    DuplicateObjectId(String),
    EmptyAttributeName { object: String },
    DuplicateAttribute { object: String, name: String },
    DanglingLink { link: LinkKey, missing: String },
    DuplicateLink(LinkKey),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyObjectId => write!(f, "object with empty id"),
            Violation::DuplicateObjectId(id) => write!(f, "duplicate object id `{id}`"),
            Violation::EmptyAttributeName { object } => {
                write!(f, "object `{object}` has an attribute with an empty name")
            }
            Violation::DuplicateAttribute { object, name } => {
                write!(f, "object `{object}` has duplicate attribute `{name}`")
            }
            Violation::DanglingLink { link, missing } => {
                write!(f, "link {link} references missing object `{missing}`")
            }
            Violation::DuplicateLink(link) => write!(f, "duplicate link {link}"),
        }
    }
}

/// Violations found by [`validate`]; empty means the diagram is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid object diagram: {0}")]
pub struct InvalidDiagram(pub ValidationReport);

pub fn validate(diagram: &ObjectDiagram) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = HashSet::new();
    let mut reported_dups = HashSet::new();

    for node in &diagram.objects {
        if node.id.is_empty() {
            violations.push(Violation::EmptyObjectId);
        }
        if !ids.insert(node.id.as_str()) && reported_dups.insert(node.id.as_str()) {
            violations.push(Violation::DuplicateObjectId(node.id.clone()));
        }

        let mut names = HashSet::new();
        let mut dup_names = HashSet::new();
        for attr in &node.attributes {
            if attr.name.is_empty() {
                violations.push(Violation::EmptyAttributeName {
                    object: node.id.clone(),
                });
            }
            if !names.insert(attr.name.as_str()) && dup_names.insert(attr.name.as_str()) {
                violations.push(Violation::DuplicateAttribute {
                    object: node.id.clone(),
                    name: attr.name.clone(),
                });
            }
        }
    }

    let mut seen_links = HashSet::new();
    let mut dup_links = HashSet::new();
    for link in &diagram.links {
        let key = link.key();
        for endpoint in [&link.from, &link.to] {
            if !ids.contains(endpoint.as_str()) {
                violations.push(Violation::DanglingLink {
                    link: key.clone(),
                    missing: endpoint.clone(),
                });
            }
            if link.from == link.to {
                break;
            }
        }
        if !seen_links.insert(key.clone()) && dup_links.insert(key.clone()) {
            violations.push(Violation::DuplicateLink(key));
        }
    }

    ValidationReport { violations }
}

/// Sorts objects by id, attributes by name, and links by `(from, type, to)`.
pub fn canonicalize(diagram: &ObjectDiagram) -> Result<ObjectDiagram, InvalidDiagram> {
    let report = validate(diagram);
    if !report.is_valid() {
        return Err(InvalidDiagram(report));
    }
    let mut out = diagram.clone();
    out.canonicalize_in_place();
    Ok(out)
}

impl ObjectDiagram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectNode> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn contains_object(&self, id: &str) -> bool {
        self.objects.iter().any(|o| o.id == id)
    }

    pub fn object_ids(&self) -> BTreeSet<String> {
        self.objects.iter().map(|o| o.id.clone()).collect()
    }

    pub fn link_keys(&self) -> BTreeSet<LinkKey> {
        self.links.iter().map(LinkEdge::key).collect()
    }

    /// Sorts in place without validating. Callers that need the error path
    /// use [`canonicalize`].
    pub(crate) fn canonicalize_in_place(&mut self) {
        self.objects.sort_by(|a, b| a.id.cmp(&b.id));
        for node in &mut self.objects {
            node.attributes.sort_by(|a, b| a.name.cmp(&b.name));
        }
        self.links.sort_by(|a, b| {
            (&a.from, &a.type_name, &a.to).cmp(&(&b.from, &b.type_name, &b.to))
        });
    }

    pub fn is_canonical(&self) -> bool {
        let mut sorted = self.clone();
        sorted.canonicalize_in_place();
        sorted == *self
    }
}

/// One attribute-level change on an object present in both diagrams.
/// `new` is `None` when the attribute was removed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AttributeChange {
    pub object: String,
    pub name: String,
    pub new: Option<AttributeValue>,
}

/// Set difference between two diagrams, carrying enough content to replay it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiagramDelta {
    pub added_objects: Vec<ObjectNode>,
    pub removed_objects: BTreeSet<String>,
    pub retyped_objects: BTreeMap<String, String>,
    pub added_links: BTreeSet<LinkKey>,
    pub removed_links: BTreeSet<LinkKey>,
    pub changed_attributes: Vec<AttributeChange>,
}

impl DiagramDelta {
    pub fn is_empty(&self) -> bool {
        self.added_objects.is_empty()
            && self.removed_objects.is_empty()
            && self.retyped_objects.is_empty()
            && self.added_links.is_empty()
            && self.removed_links.is_empty()
            && self.changed_attributes.is_empty()
    }

    pub fn added_object_ids(&self) -> BTreeSet<String> {
        self.added_objects.iter().map(|o| o.id.clone()).collect()
    }

    /// `(object id, attribute name)` pairs whose attribute was added, removed or changed.
    pub fn changed_attribute_keys(&self) -> BTreeSet<(String, String)> {
        self.changed_attributes
            .iter()
            .map(|c| (c.object.clone(), c.name.clone()))
            .collect()
    }

    /// Replays the delta on `old`, returning a canonical diagram.
    pub fn apply(&self, old: &ObjectDiagram) -> ObjectDiagram {
        let mut objects: BTreeMap<String, ObjectNode> = old
            .objects
            .iter()
            .filter(|o| !self.removed_objects.contains(&o.id))
            .map(|o| (o.id.clone(), o.clone()))
            .collect();
        for (id, type_name) in &self.retyped_objects {
            if let Some(node) = objects.get_mut(id) {
                node.type_name = type_name.clone();
            }
        }
        for change in &self.changed_attributes {
            let Some(node) = objects.get_mut(&change.object) else {
                continue;
            };
            node.attributes.retain(|a| a.name != change.name);
            if let Some(attr) = &change.new {
                node.attributes.push(attr.clone());
            }
        }
        for node in &self.added_objects {
            objects.insert(node.id.clone(), node.clone());
        }

        let mut links: BTreeSet<LinkKey> = old.link_keys();
        links.retain(|l| !self.removed_links.contains(l));
        links.extend(self.added_links.iter().cloned());

        let mut out = ObjectDiagram {
            objects: objects.into_values().collect(),
            links: links.into_iter().map(LinkEdge::from).collect(),
        };
        out.canonicalize_in_place();
        out
    }
}

pub fn diff(old: &ObjectDiagram, new: &ObjectDiagram) -> DiagramDelta {
    let old_by_id: BTreeMap<&str, &ObjectNode> =
        old.objects.iter().map(|o| (o.id.as_str(), o)).collect();
    let new_by_id: BTreeMap<&str, &ObjectNode> =
        new.objects.iter().map(|o| (o.id.as_str(), o)).collect();

    let mut delta = DiagramDelta::default();
    for (id, node) in &new_by_id {
        match old_by_id.get(id) {
            None => {
                let mut node = (*node).clone();
                node.attributes.sort_by(|a, b| a.name.cmp(&b.name));
                delta.added_objects.push(node);
            }
            Some(previous) => {
                if previous.type_name != node.type_name {
                    delta
                        .retyped_objects
                        .insert(id.to_string(), node.type_name.clone());
                }
                diff_attributes(previous, node, &mut delta.changed_attributes);
            }
        }
    }
    delta.removed_objects = old_by_id
        .keys()
        .filter(|id| !new_by_id.contains_key(*id))
        .map(|id| id.to_string())
        .collect();

    let old_links = old.link_keys();
    let new_links = new.link_keys();
    delta.added_links = new_links.difference(&old_links).cloned().collect();
    delta.removed_links = old_links.difference(&new_links).cloned().collect();
    delta
}

fn diff_attributes(old: &ObjectNode, new: &ObjectNode, out: &mut Vec<AttributeChange>) {
    let before: BTreeMap<&str, &AttributeValue> =
        old.attributes.iter().map(|a| (a.name.as_str(), a)).collect();
    let after: BTreeMap<&str, &AttributeValue> =
        new.attributes.iter().map(|a| (a.name.as_str(), a)).collect();
    let names: BTreeSet<&str> = before.keys().chain(after.keys()).copied().collect();
    for name in names {
        let (b, a) = (before.get(name), after.get(name));
        if b != a {
            out.push(AttributeChange {
                object: new.id.clone(),
                name: name.to_string(),
                new: a.map(|attr| (*attr).clone()),
            });
        }
    }
}
