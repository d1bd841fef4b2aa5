//! Generators and brute-force oracles shared by property and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use odbg_core::heap::{Field, FieldValue, ObjectRecord};
use odbg_core::snapshot::{Frame, Snapshot};
use odbg_core::{AttributeValue, LinkEdge, ObjectDiagram, ObjectNode};
use proptest::prelude::*;

pub const FRAME_ID: &str = "0";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Random heap: up to `max_objects` objects with references to arbitrary
/// targets (self-loops and cycles included) and a frame with a few locals.
pub fn snapshot_strategy(max_objects: usize) -> impl Strategy<Value = Snapshot> {
    (0..=max_objects).prop_flat_map(|n| {
        let target = if n == 0 { (0..1usize).boxed() } else { (0..n).boxed() };
        let object = (
            prop::collection::vec(target.clone(), 0..4),
            prop::collection::vec(0i32..100, 0..3),
            prop::bool::weighted(0.1),
        );
        (
            prop::collection::vec(object, n),
            prop::collection::vec(target, 0..4),
            0i32..10,
        )
            .prop_map(move |(objects, roots, local)| build_snapshot(n, objects, roots, local))
    })
}

fn build_snapshot(
    n: usize,
    objects: Vec<(Vec<usize>, Vec<i32>, bool)>,
    roots: Vec<usize>,
    local: i32,
) -> Snapshot {
    let id = |i: usize| format!("o{i}");
    let mut map = BTreeMap::new();
    for (i, (refs, prims, has_null)) in objects.into_iter().enumerate() {
        let mut fields: Vec<Field> = refs
            .into_iter()
            .enumerate()
            .map(|(k, t)| Field::new(format!("f{k}"), FieldValue::reference(id(t))))
            .collect();
        fields.extend(
            prims
                .into_iter()
                .enumerate()
                .map(|(k, v)| Field::new(format!("p{k}"), FieldValue::primitive("int", v.to_string()))),
        );
        if has_null {
            fields.push(Field::new("nothing", FieldValue::Null));
        }
        map.insert(
            id(i),
            ObjectRecord {
                id: id(i),
                type_name: format!("T{}", i % 3),
                fields,
            },
        );
    }
    let mut locals: Vec<Field> = if n == 0 {
        Vec::new()
    } else {
        roots
            .into_iter()
            .enumerate()
            .map(|(k, t)| Field::new(format!("v{k}"), FieldValue::reference(id(t))))
            .collect()
    };
    locals.push(Field::new("count", FieldValue::primitive("int", local.to_string())));
    Snapshot {
        frames: vec![Frame {
            id: FRAME_ID.into(),
            name: "main".into(),
            locals,
        }],
        objects: map,
    }
}

/// Hop distance of every object from the frame's reference locals, computed
/// by Bellman-Ford style relaxation (no queue).
pub fn brute_force_hops(s: &Snapshot) -> BTreeMap<String, usize> {
    let mut hop: BTreeMap<String, usize> = BTreeMap::new();
    for local in &s.frames[0].locals {
        if let Some(id) = local.value.as_reference() {
            hop.insert(id.to_string(), 0);
        }
    }
    for _ in 0..=s.objects.len() {
        let mut changed = false;
        for (from, record) in &s.objects {
            let Some(&h) = hop.get(from) else { continue };
            for field in &record.fields {
                if let Some(to) = field.value.as_reference() {
                    let entry = hop.entry(to.to_string()).or_insert(usize::MAX);
                    if h + 1 < *entry {
                        *entry = h + 1;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    hop
}

pub fn expected_node_set(s: &Snapshot, depth: usize) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = brute_force_hops(s)
        .into_iter()
        .filter(|(_, h)| *h <= depth)
        .map(|(id, _)| id)
        .collect();
    set.insert(format!("frame:{FRAME_ID}"));
    set
}

/// `(from, type, to)` triples expected at `depth`: frame links plus every
/// outgoing reference of objects with hop < depth.
pub fn expected_link_set(s: &Snapshot, depth: usize) -> BTreeSet<(String, String, String)> {
    let frame = format!("frame:{FRAME_ID}");
    let mut links = BTreeSet::new();
    for local in &s.frames[0].locals {
        if let Some(id) = local.value.as_reference() {
            links.insert((frame.clone(), local.name.clone(), id.to_string()));
        }
    }
    for (id, h) in brute_force_hops(s) {
        if h < depth {
            for field in &s.objects[&id].fields {
                if let Some(to) = field.value.as_reference() {
                    links.insert((id.clone(), field.name.clone(), to.to_string()));
                }
            }
        }
    }
    links
}

pub fn link_triples(d: &ObjectDiagram) -> BTreeSet<(String, String, String)> {
    d.links
        .iter()
        .map(|l| (l.from.clone(), l.type_name.clone(), l.to.clone()))
        .collect()
}

/// Strings exercising XML escaping: metacharacters, quotes, whitespace
/// controls and non-ASCII.
pub fn adversarial_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z0-9_]{1,8}",
        "[<>&\"' a-z]{0,8}",
        "[\u{e4}\u{f6}\u{3b1}\u{4e2d}\u{1f600}a-z]{0,6}",
        "[a-z\n\t\r]{0,6}",
        Just(String::new()),
        Just("&amp;&lt;".to_string()),
        Just("]]>".to_string()),
    ]
}

fn non_empty_text() -> impl Strategy<Value = String> {
    adversarial_text().prop_map(|s| if s.is_empty() { "x".to_string() } else { s })
}

/// Valid diagram with up to `max_objects` objects.
pub fn diagram_strategy(max_objects: usize) -> impl Strategy<Value = ObjectDiagram> {
    let node_body = (
        adversarial_text(),
        prop::collection::btree_map(non_empty_text(), (adversarial_text(), adversarial_text()), 0..4),
    );
    prop::collection::btree_map(non_empty_text(), node_body, 0..=max_objects)
        .prop_flat_map(|nodes| {
            let n = nodes.len();
            let links = if n == 0 {
                Just(Vec::new()).boxed()
            } else {
                prop::collection::vec((0..n, adversarial_text(), 0..n), 0..(2 * n)).boxed()
            };
            (Just(nodes), links, any::<u64>())
        })
        .prop_map(|(nodes, links, seed)| {
            let ids: Vec<String> = nodes.keys().cloned().collect();
            let mut objects: Vec<ObjectNode> = nodes
                .into_iter()
                .map(|(id, (type_name, attrs))| ObjectNode {
                    id,
                    type_name,
                    attributes: attrs
                        .into_iter()
                        .map(|(name, (t, v))| AttributeValue::new(name, t, v))
                        .collect(),
                })
                .collect();
            let mut seen = BTreeSet::new();
            let mut edges = Vec::new();
            for (a, t, b) in links {
                if seen.insert((a, t.clone(), b)) {
                    edges.push(LinkEdge::new(t, ids[a].clone(), ids[b].clone()));
                }
            }
            // scramble so canonicalization has work to do
            let k = (seed as usize) % objects.len().max(1);
            objects.rotate_left(k);
            edges.reverse();
            ObjectDiagram {
                objects,
                links: edges,
            }
        })
}

/// Diagram with a designated frame node `f` linking into the rest.
pub fn rooted_diagram_strategy(max_objects: usize) -> impl Strategy<Value = ObjectDiagram> {
    (1..=max_objects).prop_flat_map(|n| {
        let attrs = prop::collection::vec(0usize..4, n);
        let edges = prop::collection::vec((0..n, 0..n), 0..(2 * n));
        let roots = prop::collection::vec(0..n, 0..3);
        (attrs, edges, roots).prop_map(move |(attrs, edges, roots)| {
            let id = |i: usize| format!("n{i:02}");
            let mut objects = vec![ObjectNode::new("f", "<StackFrame>")];
            for (i, count) in attrs.iter().enumerate() {
                let mut node = ObjectNode::new(id(i), format!("Type{}", i % 4));
                for k in 0..*count {
                    node.attributes
                        .push(AttributeValue::new(format!("a{k}"), "int", "x".repeat(i % 7 + k)));
                }
                objects.push(node);
            }
            let mut links = BTreeSet::new();
            for r in roots {
                links.insert(("f".to_string(), format!("v{r}"), id(r)));
            }
            for (a, b) in edges {
                links.insert((id(a), "next".to_string(), id(b)));
            }
            ObjectDiagram {
                objects,
                links: links
                    .into_iter()
                    .map(|(from, t, to)| LinkEdge::new(t, from, to))
                    .collect(),
            }
        })
    })
}
