//! Deterministic layered layout.
//!
//! Nodes are placed in columns by directed BFS hop distance from the frame
//! node, ordered within each column by barycenter sweeps, and stacked top to
//! bottom. All metrics are fixed integer constants so output is bit-stable.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{canonicalize, AttributeValue, InvalidDiagram, ObjectDiagram, ObjectNode};

pub const CHAR_WIDTH: u32 = 8;
pub const LINE_HEIGHT: u32 = 18;
pub const PADDING: u32 = 20;
pub const LAYER_GAP: u32 = 60;
pub const NODE_GAP: u32 = 30;

const SWEEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn right(&self) -> u32 {
        self.x + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.height
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionedDiagram {
    /// Canonical.
    pub diagram: ObjectDiagram,
    pub positions: BTreeMap<String, Rect>,
    pub layers: BTreeMap<String, usize>,
}

impl PositionedDiagram {
    /// Smallest `(width, height)` covering every rectangle from the origin.
    pub fn extent(&self) -> (u32, u32) {
        self.positions.values().fold((0, 0), |(w, h), r| {
            (w.max(r.right()), h.max(r.bottom()))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error(transparent)]
    Invalid(#[from] InvalidDiagram),
    #[error("frame node `{0}` is not in the diagram")]
    MissingFrameNode(String),
}

pub fn header_text(node: &ObjectNode) -> String {
    format!("{}:{}", node.id, node.type_name)
}

pub fn attribute_line(attr: &AttributeValue) -> String {
    format!("{}: {}", attr.name, attr.value)
}

pub fn measure_node(node: &ObjectNode) -> (u32, u32) {
    let widest = node
        .attributes
        .iter()
        .map(|a| attribute_line(a).chars().count())
        .chain(std::iter::once(header_text(node).chars().count()))
        .max()
        .unwrap_or(0) as u32;
    let width = CHAR_WIDTH * widest + PADDING;
    let height = LINE_HEIGHT * (1 + node.attributes.len() as u32) + PADDING;
    (width, height)
}

fn bfs_hops<'a>(diagram: &'a ObjectDiagram, root: &'a str) -> HashMap<&'a str, usize> {
    let mut out_edges: HashMap<&str, Vec<&str>> = HashMap::new();
    for link in &diagram.links {
        out_edges.entry(&link.from).or_default().push(&link.to);
    }
    let mut hops = HashMap::new();
    let mut queue = VecDeque::new();
    if diagram.contains_object(root) {
        hops.insert(root, 0);
        queue.push_back(root);
    }
    while let Some(id) = queue.pop_front() {
        let hop = hops[id];
        for &to in out_edges.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            if !hops.contains_key(to) {
                hops.insert(to, hop + 1);
                queue.push_back(to);
            }
        }
    }
    hops
}

/// Directed BFS hop distance from `root`. Unreachable nodes get
/// `max reachable layer + 1`.
pub fn assign_layers(diagram: &ObjectDiagram, root: &str) -> BTreeMap<String, usize> {
    let hops = bfs_hops(diagram, root);
    let orphan_layer = hops.values().max().map_or(0, |m| m + 1);
    diagram
        .objects
        .iter()
        .map(|o| {
            let layer = hops.get(o.id.as_str()).copied().unwrap_or(orphan_layer);
            (o.id.clone(), layer)
        })
        .collect()
}

fn neighbours_by_node(edges: &[(String, String)]) -> HashMap<&str, Vec<&str>> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    adj
}

fn reorder_by_barycenter(
    layer: &mut Vec<String>,
    reference: &[String],
    adj: &HashMap<&str, Vec<&str>>,
) {
    let index: HashMap<&str, usize> = reference
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut keyed: Vec<(f64, String)> = layer
        .iter()
        .enumerate()
        .map(|(own, id)| {
            let positions: Vec<usize> = adj
                .get(id.as_str())
                .into_iter()
                .flatten()
                .filter_map(|n| index.get(n).copied())
                .collect();
            let bary = if positions.is_empty() {
                own as f64
            } else {
                positions.iter().sum::<usize>() as f64 / positions.len() as f64
            };
            (bary, id.clone())
        })
        .collect();
    // stable: ties keep the prior order
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    *layer = keyed.into_iter().map(|(_, id)| id).collect();
}

/// Alternating downward/upward barycenter sweeps (two of each). Within a
/// layer a node's key is the mean index of its neighbours in the adjacent
/// layer; nodes without such neighbours keep their current index.
pub fn order_layers(mut layers: Vec<Vec<String>>, edges: &[(String, String)]) -> Vec<Vec<String>> {
    let adj = neighbours_by_node(edges);
    for _ in 0..SWEEPS {
        for i in 1..layers.len() {
            let (before, rest) = layers.split_at_mut(i);
            reorder_by_barycenter(&mut rest[0], &before[i - 1], &adj);
        }
        for i in (0..layers.len().saturating_sub(1)).rev() {
            let (head, after) = layers.split_at_mut(i + 1);
            reorder_by_barycenter(&mut head[i], &after[0], &adj);
        }
    }
    layers
}

/// Number of pairwise edge crossings between adjacent layers.
pub fn count_crossings(layers: &[Vec<String>], edges: &[(String, String)]) -> usize {
    let mut position: HashMap<&str, (usize, usize)> = HashMap::new();
    for (l, layer) in layers.iter().enumerate() {
        for (i, id) in layer.iter().enumerate() {
            position.insert(id, (l, i));
        }
    }
    let mut between: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (a, b) in edges {
        let (Some(&(la, ia)), Some(&(lb, ib))) = (position.get(a.as_str()), position.get(b.as_str()))
        else {
            continue;
        };
        if la + 1 == lb {
            between.entry(la).or_default().push((ia, ib));
        } else if lb + 1 == la {
            between.entry(lb).or_default().push((ib, ia));
        }
    }
    let mut crossings = 0;
    for segs in between.values() {
        for (k, &(a1, b1)) in segs.iter().enumerate() {
            for &(a2, b2) in &segs[k + 1..] {
                if (a1 < a2 && b1 > b2) || (a1 > a2 && b1 < b2) {
                    crossings += 1;
                }
            }
        }
    }
    crossings
}

pub fn layout(diagram: &ObjectDiagram, frame_node_id: &str) -> Result<PositionedDiagram, LayoutError> {
    let diagram = canonicalize(diagram)?;
    if !diagram.contains_object(frame_node_id) {
        return Err(LayoutError::MissingFrameNode(frame_node_id.to_string()));
    }

    let reached = bfs_hops(&diagram, frame_node_id);
    let layer_count = reached.values().max().map_or(0, |m| m + 1);
    let mut layers = vec![Vec::new(); layer_count];
    let mut orphans = Vec::new();
    for node in &diagram.objects {
        match reached.get(node.id.as_str()) {
            Some(&hop) => layers[hop].push(node.id.clone()),
            None => orphans.push(node.id.clone()),
        }
    }
    let edges: Vec<(String, String)> = diagram
        .links
        .iter()
        .map(|l| (l.from.clone(), l.to.clone()))
        .collect();
    let mut layers = order_layers(layers, &edges);
    // unreachable nodes form one extra column, kept in id order
    if !orphans.is_empty() {
        layers.push(orphans);
    }

    let sizes: HashMap<&str, (u32, u32)> = diagram
        .objects
        .iter()
        .map(|o| (o.id.as_str(), measure_node(o)))
        .collect();
    let mut positions = BTreeMap::new();
    let mut layer_of = BTreeMap::new();
    let mut x = 0;
    for (index, layer) in layers.iter().enumerate() {
        let mut y = 0;
        let mut widest = 0;
        for id in layer {
            let (width, height) = sizes[id.as_str()];
            positions.insert(id.clone(), Rect { x, y, width, height });
            layer_of.insert(id.clone(), index);
            y += height + NODE_GAP;
            widest = widest.max(width);
        }
        x += widest + LAYER_GAP;
    }

    Ok(PositionedDiagram {
        diagram,
        positions,
        layers: layer_of,
    })
}
