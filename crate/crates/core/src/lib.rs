//! Object-diagram visual debugging: extraction of depth-bounded object
//! diagrams from a paused program, deterministic layout, and XML/SVG export.

pub mod dap;
pub mod event;
pub mod export;
pub mod extract;
pub mod heap;
pub mod layout;
pub mod model;
pub mod snapshot;

pub use event::DebugEvent;
pub use export::{from_xml, to_svg, to_xml, DiagramFrame, ExportError, XmlError};
pub use extract::{build_diagram, expand_object, full_closure, ExplorationState, ExtractError};
pub use heap::{Field, FieldValue, HeapSource, ObjectRecord, RootVariable, SourceError};
pub use layout::{layout, measure_node, LayoutError, PositionedDiagram, Rect};
pub use model::{
    canonicalize, diff, validate, AttributeValue, DiagramDelta, LinkEdge, LinkKey, ObjectDiagram,
    ObjectNode, ValidationReport, Violation,
};
pub use snapshot::{load_snapshot, load_trace, play_trace, SessionTrace, Snapshot, SnapshotError, SnapshotHeap};
