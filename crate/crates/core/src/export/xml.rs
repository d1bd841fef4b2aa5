use std::collections::BTreeMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{escape_attr, ExportError};
use crate::layout::{PositionedDiagram, Rect};
use crate::model::{
    canonicalize, validate, AttributeValue, InvalidDiagram, LinkEdge, ObjectDiagram, ObjectNode,
    ValidationReport,
};

const DECLARATION: &str = r#"<?xml version="1.0" encoding="UTF-8"?>"#;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XmlError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid object diagram: {0}")]
    Invalid(ValidationReport),
}

/// A decoded server push: the diagram, its version and optional layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramFrame {
    pub version: u64,
    pub diagram: ObjectDiagram,
    pub positions: BTreeMap<String, Rect>,
}

struct Writer<'a> {
    out: String,
    positions: Option<&'a BTreeMap<String, Rect>>,
}

impl Writer<'_> {
    fn attr(&mut self, name: &str, value: &str) {
        self.out.push(' ');
        self.out.push_str(name);
        self.out.push_str("=\"");
        escape_attr(value, &mut self.out);
        self.out.push('"');
    }

    fn document(mut self, diagram: &ObjectDiagram, version: Option<u64>) -> String {
        self.out.push_str(DECLARATION);
        self.out.push('\n');
        self.out.push_str("<objectDiagram");
        if let Some(v) = version {
            self.attr("version", &v.to_string());
        }
        if diagram.objects.is_empty() && diagram.links.is_empty() {
            self.out.push_str("/>\n");
            return self.out;
        }
        self.out.push_str(">\n");
        for node in &diagram.objects {
            self.out.push_str("  <object");
            self.attr("id", &node.id);
            self.attr("type", &node.type_name);
            if let Some(rect) = self.positions.and_then(|p| p.get(&node.id)) {
                self.attr("x", &rect.x.to_string());
                self.attr("y", &rect.y.to_string());
                self.attr("width", &rect.width.to_string());
                self.attr("height", &rect.height.to_string());
            }
            if node.attributes.is_empty() {
                self.out.push_str("/>\n");
                continue;
            }
            self.out.push_str(">\n");
            for a in &node.attributes {
                self.out.push_str("    <attribute");
                self.attr("name", &a.name);
                self.attr("type", &a.type_name);
                self.attr("value", &a.value);
                self.out.push_str("/>\n");
            }
            self.out.push_str("  </object>\n");
        }
        for link in &diagram.links {
            self.out.push_str("  <link");
            self.attr("type", &link.type_name);
            self.attr("from", &link.from);
            self.attr("to", &link.to);
            self.out.push_str("/>\n");
        }
        self.out.push_str("</objectDiagram>\n");
        self.out
    }
}

/// Canonical XML document for `diagram`, with trailing newline.
pub fn to_xml(diagram: &ObjectDiagram) -> Result<String, InvalidDiagram> {
    let diagram = canonicalize(diagram)?;
    Ok(Writer {
        out: String::new(),
        positions: None,
    }
    .document(&diagram, None))
}

/// Server push frame: the canonical document with a root `version` and
/// per-object `x`, `y`, `width`, `height`.
pub fn encode_diagram_frame(positioned: &PositionedDiagram, version: u64) -> Result<String, ExportError> {
    super::svg::check_positions(positioned)?;
    let diagram = canonicalize(&positioned.diagram)?;
    Ok(Writer {
        out: String::new(),
        positions: Some(&positioned.positions),
    }
    .document(&diagram, Some(version)))
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Export,
    Frame,
}

pub fn from_xml(text: &str) -> Result<ObjectDiagram, XmlError> {
    parse(text, Mode::Export).map(|(_, diagram, _)| diagram)
}

pub fn decode_diagram_frame(text: &str) -> Result<DiagramFrame, XmlError> {
    let (version, diagram, positions) = parse(text, Mode::Frame)?;
    Ok(DiagramFrame {
        version: version.ok_or_else(|| XmlError::Schema("missing attribute `version` on <objectDiagram>".into()))?,
        diagram,
        positions,
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let prefix = &text.as_bytes()[..offset.min(text.len())];
    let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = prefix.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&prefix[line_start..]).chars().count() + 1;
    (line, column)
}

/// Attributes of one element, checked against an allowed list.
struct Attrs {
    element: String,
    values: BTreeMap<String, String>,
}

impl Attrs {
    fn read(e: &BytesStart<'_>, allowed: &[&str], text: &str, offset: usize) -> Result<Self, XmlError> {
        let element = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut values = BTreeMap::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| parse_error(text, offset, err.to_string()))?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            if !allowed.contains(&key.as_str()) {
                return Err(XmlError::Schema(format!(
                    "unknown attribute `{key}` on <{element}>"
                )));
            }
            let value = attr
                .unescape_value()
                .map_err(|err| parse_error(text, offset, err.to_string()))?
                .into_owned();
            values.insert(key, value);
        }
        Ok(Attrs { element, values })
    }

    fn required(&mut self, name: &str) -> Result<String, XmlError> {
        self.values.remove(name).ok_or_else(|| {
            XmlError::Schema(format!(
                "missing attribute `{name}` on <{}>",
                self.element
            ))
        })
    }

    fn number<T: std::str::FromStr>(&mut self, name: &str) -> Result<Option<T>, XmlError> {
        match self.values.remove(name) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                XmlError::Schema(format!(
                    "attribute `{name}` on <{}> is not a non-negative integer: `{v}`",
                    self.element
                ))
            }),
        }
    }
}

fn parse_error(text: &str, offset: usize, message: String) -> XmlError {
    let (line, column) = line_column(text, offset);
    XmlError::Parse {
        line,
        column,
        message,
    }
}

#[derive(PartialEq)]
enum Open {
    Root,
    Object,
    Leaf(String),
}

type Parsed = (Option<u64>, ObjectDiagram, BTreeMap<String, Rect>);

fn parse(text: &str, mode: Mode) -> Result<Parsed, XmlError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut stack: Vec<Open> = Vec::new();
    let mut seen_root = false;
    let mut version = None;
    let mut diagram = ObjectDiagram::new();
    let mut positions = BTreeMap::new();

    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| parse_error(text, reader.error_position() as usize, e.to_string()))?;
        let (start, is_empty) = match event {
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(_) => {
                stack.pop();
                continue;
            }
            Event::Text(t) => {
                return Err(XmlError::Schema(format!(
                    "unexpected text `{}`",
                    String::from_utf8_lossy(t.as_ref()).trim()
                )))
            }
            Event::CData(_) => return Err(XmlError::Schema("unexpected CDATA section".into())),
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => continue,
            Event::Eof => break,
        };

        let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
        let opened = match (stack.last(), name.as_str()) {
            (None, "objectDiagram") if !seen_root => {
                seen_root = true;
                let allowed: &[&str] = if mode == Mode::Frame { &["version"] } else { &[] };
                let mut attrs = Attrs::read(&start, allowed, text, offset)?;
                version = attrs.number("version")?;
                Open::Root
            }
            (Some(Open::Root), "object") => {
                let allowed: &[&str] = if mode == Mode::Frame {
                    &["id", "type", "x", "y", "width", "height"]
                } else {
                    &["id", "type"]
                };
                let mut attrs = Attrs::read(&start, allowed, text, offset)?;
                let id = attrs.required("id")?;
                let type_name = attrs.required("type")?;
                let geometry = [
                    attrs.number::<u32>("x")?,
                    attrs.number::<u32>("y")?,
                    attrs.number::<u32>("width")?,
                    attrs.number::<u32>("height")?,
                ];
                match geometry {
                    [Some(x), Some(y), Some(width), Some(height)] => {
                        positions.insert(id.clone(), Rect { x, y, width, height });
                    }
                    [None, None, None, None] => {}
                    _ => {
                        return Err(XmlError::Schema(format!(
                            "object `{id}` has a partial position"
                        )))
                    }
                }
                diagram.objects.push(ObjectNode::new(id, type_name));
                Open::Object
            }
            (Some(Open::Root), "link") => {
                let mut attrs = Attrs::read(&start, &["type", "from", "to"], text, offset)?;
                diagram.links.push(LinkEdge::new(
                    attrs.required("type")?,
                    attrs.required("from")?,
                    attrs.required("to")?,
                ));
                Open::Leaf(name)
            }
            (Some(Open::Object), "attribute") => {
                let mut attrs = Attrs::read(&start, &["name", "type", "value"], text, offset)?;
                let attr = AttributeValue::new(
                    attrs.required("name")?,
                    attrs.required("type")?,
                    attrs.required("value")?,
                );
                diagram
                    .objects
                    .last_mut()
                    .expect("an open <object> has a node")
                    .attributes
                    .push(attr);
                Open::Leaf(name)
            }
            (Some(Open::Leaf(parent)), _) => {
                return Err(XmlError::Schema(format!(
                    "unexpected element <{name}> inside <{parent}>"
                )))
            }
            (None, _) if seen_root => {
                return Err(XmlError::Schema(format!(
                    "unexpected element <{name}> after the root element"
                )))
            }
            _ => return Err(XmlError::Schema(format!("unknown element <{name}>"))),
        };
        if !is_empty {
            stack.push(opened);
        }
    }

    if !seen_root {
        return Err(XmlError::Schema("missing <objectDiagram> root element".into()));
    }
    let report = validate(&diagram);
    if !report.is_valid() {
        return Err(XmlError::Invalid(report));
    }
    diagram.canonicalize_in_place();
    Ok((version, diagram, positions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Violation;

    #[test]
    fn empty_diagram() {
        assert_eq!(
            to_xml(&ObjectDiagram::new()).unwrap(),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<objectDiagram/>\n"
        );
        assert_eq!(from_xml(&to_xml(&ObjectDiagram::new()).unwrap()).unwrap(), ObjectDiagram::new());
    }

    #[test]
    fn one_object_one_attribute() {
        let d = ObjectDiagram {
            objects: vec![ObjectNode::new("o1", "Product")
                .with_attribute(AttributeValue::new("price", "int", "20"))],
            links: vec![],
        };
        let text = to_xml(&d).unwrap();
        assert_eq!(
            text,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <objectDiagram>\n  \
             <object id=\"o1\" type=\"Product\">\n    \
             <attribute name=\"price\" type=\"int\" value=\"20\"/>\n  \
             </object>\n\
             </objectDiagram>\n"
        );
        assert_eq!(from_xml(&text).unwrap(), d);
    }

    #[test]
    fn dangling_link_rejected() {
        let text = r#"<objectDiagram><object id="b" type="T"/><link type="x" from="a" to="b"/></objectDiagram>"#;
        match from_xml(text) {
            Err(XmlError::Invalid(report)) => assert!(matches!(
                &report.violations[0],
                Violation::DanglingLink { missing, .. } if missing == "a"
            )),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_element_named() {
        let err = from_xml("<objectDiagram><cluster/></objectDiagram>").unwrap_err();
        assert!(matches!(&err, XmlError::Schema(m) if m.contains("cluster")), "{err}");
    }

    #[test]
    fn unknown_and_missing_attributes() {
        assert!(matches!(
            from_xml(r#"<objectDiagram><object id="a" type="T" color="red"/></objectDiagram>"#),
            Err(XmlError::Schema(m)) if m.contains("color")
        ));
        assert!(matches!(
            from_xml(r#"<objectDiagram><object id="a"/></objectDiagram>"#),
            Err(XmlError::Schema(m)) if m.contains("type")
        ));
        // layout attributes belong to push frames only
        assert!(from_xml(r#"<objectDiagram><object id="a" type="T" x="1"/></objectDiagram>"#).is_err());
    }

    #[test]
    fn parse_error_reports_position() {
        let err = from_xml("<objectDiagram>\n  <object id=\"a\" type=\"T\">\n</objectDiagram>").unwrap_err();
        assert!(matches!(err, XmlError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn nested_leaf_rejected() {
        let err = from_xml(r#"<objectDiagram><object id="a" type="T"><attribute name="n" type="t" value="v"><x/></attribute></object></objectDiagram>"#)
            .unwrap_err();
        assert!(matches!(err, XmlError::Schema(_)));
    }

    #[test]
    fn frame_round_trip() {
        let d = ObjectDiagram {
            objects: vec![ObjectNode::new("f", "F"), ObjectNode::new("a", "A")],
            links: vec![LinkEdge::new("x", "f", "a")],
        };
        let positioned = crate::layout::layout(&d, "f").unwrap();
        let text = encode_diagram_frame(&positioned, 7).unwrap();
        assert!(text.contains("<objectDiagram version=\"7\">"));
        let frame = decode_diagram_frame(&text).unwrap();
        assert_eq!(frame.version, 7);
        assert_eq!(frame.diagram, positioned.diagram);
        assert_eq!(frame.positions, positioned.positions);
        assert!(decode_diagram_frame(&to_xml(&d).unwrap()).is_err());
    }
}
