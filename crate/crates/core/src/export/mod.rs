//! Canonical XML exchange format and SVG rendering.

mod svg;
mod xml;

pub use svg::{to_svg, SVG_MARGIN};
pub use xml::{decode_diagram_frame, encode_diagram_frame, from_xml, to_xml, DiagramFrame, XmlError};

use crate::model::InvalidDiagram;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Invalid(#[from] InvalidDiagram),
    #[error("object `{0}` has no position")]
    MissingPosition(String),
    #[error("position given for unknown object `{0}`")]
    UnknownPosition(String),
}

/// Escapes text for use inside a double-quoted attribute value. Whitespace
/// controls become character references so they survive attribute-value
/// normalization.
pub(crate) fn escape_attr(raw: &str, out: &mut String) {
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c if (c as u32) < 0x20 => out.push_str(&format!("&#x{:X};", c as u32)),
            c => out.push(c),
        }
    }
}

pub(crate) fn escape_text(raw: &str, out: &mut String) {
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' => {
                out.push_str(&format!("&#x{:X};", c as u32))
            }
            c => out.push(c),
        }
    }
}
