//! Synthetic heaps for benchmarking.

use std::collections::BTreeMap;

use odbg_core::heap::{Field, FieldValue, ObjectRecord};
use odbg_core::snapshot::{Frame, Snapshot};

/// A heap of `objects` nodes: a `fanout`-ary tree rooted at the frame's
/// single local, plus one back-link per node to make cycles. Each node
/// carries two primitive fields.
pub fn synthetic_snapshot(objects: usize, fanout: usize) -> Snapshot {
    let id = |i: usize| format!("n{i}");
    let mut map = BTreeMap::new();
    for i in 0..objects {
        let mut fields = vec![
            Field::new("index", FieldValue::primitive("int", i.to_string())),
            Field::new("label", FieldValue::primitive("String", format!("node number {i}"))),
        ];
        for k in 1..=fanout {
            let child = i * fanout + k;
            if child < objects {
                fields.push(Field::new(format!("child{k}"), FieldValue::reference(id(child))));
            }
        }
        if i > 0 {
            fields.push(Field::new("back", FieldValue::reference(id(i / 2))));
        }
        map.insert(
            id(i),
            ObjectRecord {
                id: id(i),
                type_name: format!("Type{}", i % 5),
                fields,
            },
        );
    }
    let locals = if objects == 0 {
        Vec::new()
    } else {
        vec![Field::new("root", FieldValue::reference(id(0)))]
    };
    Snapshot {
        frames: vec![Frame {
            id: "0".into(),
            name: "main".into(),
            locals,
        }],
        objects: map,
    }
}
