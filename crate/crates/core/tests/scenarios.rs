mod common;

use std::collections::BTreeSet;

use common::*;
use futures::executor::block_on;
use odbg_core::layout::{assign_layers, order_layers};
use odbg_core::snapshot::{load_snapshot, load_trace, play_trace, SnapshotHeap};
use odbg_core::{
    build_diagram, diff, expand_object, layout, to_svg, to_xml, AttributeValue, ExplorationState,
    LinkEdge, ObjectDiagram, ObjectNode,
};

fn parts_list(depth: usize) -> ExplorationState {
    let snapshot = load_snapshot(&read_fixture("parts-list.heap.json")).unwrap();
    block_on(build_diagram(&mut SnapshotHeap::new(snapshot), "0", depth)).unwrap()
}

fn types(d: &ObjectDiagram) -> BTreeSet<&str> {
    d.objects.iter().map(|o| o.type_name.as_str()).collect()
}

/// Compares against a committed file; `ODBG_BLESS=1` rewrites it instead.
fn check_golden(name: &str, actual: &str) {
    let path = fixture(&format!("golden/{name}"));
    if std::env::var_os("ODBG_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert!(expected == actual, "{name} differs from the committed golden file");
}

#[test]
fn parts_list_depth_one_stops_before_materials() {
    let state = parts_list(1);
    assert!(!types(&state.diagram).contains("Material"));
    assert_eq!(
        state.diagram.object_ids(),
        ["frame:0", "o1", "o2", "o3", "o4"].map(String::from).into()
    );
}

#[test]
fn parts_list_depth_two_reaches_materials() {
    let state = parts_list(2);
    let d = &state.diagram;
    assert!(types(d).contains("Material"));
    // product -> quantified component -> material
    assert!(d.links.iter().any(|l| l.from == "o1" && l.to == "o3"));
    assert!(d.links.iter().any(|l| l.from == "o3" && l.to == "o6"));
    assert_eq!(d.object("o6").unwrap().attribute("name").unwrap().value, "hinge");
    assert_eq!(d.object("o3").unwrap().attribute("quantity").unwrap().value, "4");
}

#[test]
fn expanding_one_component_reveals_its_material() {
    let snapshot = load_snapshot(&read_fixture("parts-list.heap.json")).unwrap();
    let mut heap = SnapshotHeap::new(snapshot);
    let state = block_on(build_diagram(&mut heap, "0", 1)).unwrap();
    let expanded = block_on(expand_object(&state, &mut heap, "o3")).unwrap();
    let added: Vec<_> = expanded
        .diagram
        .object_ids()
        .difference(&state.diagram.object_ids())
        .cloned()
        .collect();
    assert_eq!(added, ["o6"]);
    assert_eq!(expanded.diagram.object("o6").unwrap().type_name, "Material");
}

#[test]
fn trace_steps_change_one_attribute() {
    let trace = load_trace(&read_fixture("parts-list.trace.json")).unwrap();
    let diagrams: Vec<_> = play_trace(trace)
        .map(|stop| {
            let mut heap = stop.heap;
            block_on(build_diagram(&mut heap, "0", 2)).unwrap().diagram
        })
        .collect();
    assert_eq!(diagrams.len(), 3);
    let first = diff(&diagrams[0], &diagrams[1]);
    assert_eq!(
        first.changed_attribute_keys(),
        [("frame:0".to_string(), "actualCost".to_string())].into()
    );
    assert!(first.added_objects.is_empty() && first.added_links.is_empty());
    assert!(diff(&diagrams[1], &diagrams[2]).is_empty());
}

#[test]
fn chain_trace_changes_values_in_order() {
    let trace = load_trace(&read_fixture("chain.trace.json")).unwrap();
    let diagrams: Vec<_> = play_trace(trace)
        .map(|stop| {
            let mut heap = stop.heap;
            block_on(build_diagram(&mut heap, "0", 5)).unwrap().diagram
        })
        .collect();
    let changed: Vec<_> = diagrams
        .windows(2)
        .map(|w| diff(&w[0], &w[1]).changed_attribute_keys())
        .collect();
    assert_eq!(changed[0], [("b".to_string(), "value".to_string())].into());
    assert_eq!(changed[1], [("c".to_string(), "value".to_string())].into());
}

#[test]
fn golden_xml() {
    check_golden("parts-list.depth2.xml", &to_xml(&parts_list(2).diagram).unwrap());
}

#[test]
fn golden_svg() {
    let state = parts_list(2);
    let positioned = layout(&state.diagram, &state.frame_node_id).unwrap();
    check_golden("parts-list.depth2.svg", &to_svg(&positioned).unwrap());
}

/// Crossings counted geometrically: two straight segments between the same
/// pair of columns cross when their endpoints swap vertical order.
fn crossings_by_geometry(d: &ObjectDiagram, order: &[Vec<String>]) -> usize {
    let slot = |id: &str| {
        order
            .iter()
            .enumerate()
            .find_map(|(l, ids)| ids.iter().position(|x| x == id).map(|i| (l, i as i64)))
            .unwrap()
    };
    let segs: Vec<_> = d
        .links
        .iter()
        .map(|l| (slot(&l.from), slot(&l.to)))
        .filter(|(a, b)| a.0 + 1 == b.0)
        .collect();
    let mut n = 0;
    for (i, (a1, b1)) in segs.iter().enumerate() {
        for (a2, b2) in &segs[i + 1..] {
            if a1.0 == a2.0 && (a1.1 - a2.1) * (b1.1 - b2.1) < 0 {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn barycenter_does_not_add_crossings_on_fixture() {
    let mut d = ObjectDiagram::new();
    d.objects.push(ObjectNode::new("f", "<StackFrame>"));
    for id in ["a1", "a2", "b1", "b2"] {
        d.objects.push(ObjectNode::new(id, "T"));
    }
    for (from, to) in [("f", "a1"), ("f", "a2"), ("a1", "b2"), ("a2", "b1")] {
        d.links.push(LinkEdge::new("r", from, to));
    }
    let layers = assign_layers(&d, "f");
    let mut initial = vec![Vec::new(); 3];
    for (id, l) in &layers {
        initial[*l].push(id.clone());
    }
    let edges: Vec<_> = d.links.iter().map(|l| (l.from.clone(), l.to.clone())).collect();
    let ordered = order_layers(initial.clone(), &edges);
    let before = crossings_by_geometry(&d, &initial);
    let after = crossings_by_geometry(&d, &ordered);
    assert_eq!(before, 1);
    assert!(after <= before);
    assert_eq!(after, 0);

    // positions agree with the ordering
    let p = layout(&d, "f").unwrap();
    let mut by_y: Vec<_> = ["b1", "b2"].iter().map(|id| (p.positions[*id].y, *id)).collect();
    by_y.sort();
    assert_eq!(by_y.iter().map(|(_, id)| *id).collect::<Vec<_>>(), ordered[2]);
}

#[test]
fn layout_repeats_byte_identically() {
    let state = parts_list(2);
    let a = layout(&state.diagram, &state.frame_node_id).unwrap();
    let b = layout(&state.diagram, &state.frame_node_id).unwrap();
    assert_eq!(format!("{:?}", a.positions), format!("{:?}", b.positions));
}

#[test]
fn null_fields_become_null_attributes() {
    let state = block_on(build_diagram(
        &mut SnapshotHeap::new(load_snapshot(&read_fixture("chain.heap.json")).unwrap()),
        "0",
        5,
    ))
    .unwrap();
    let c = state.diagram.object("c").unwrap();
    assert_eq!(c.attribute("next"), Some(&AttributeValue::null("next")));
}
