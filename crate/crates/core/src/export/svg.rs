use std::fmt::Write as _;

use super::{escape_attr, escape_text, ExportError};
use crate::layout::{attribute_line, header_text, PositionedDiagram, LINE_HEIGHT, PADDING};
use crate::model::canonicalize;

pub const SVG_MARGIN: u32 = 20;

const FONT_SIZE: u32 = 14;
const BASELINE_RAISE: u32 = 4;
const LABEL_RAISE: u32 = 4;

pub(crate) fn check_positions(positioned: &PositionedDiagram) -> Result<(), ExportError> {
    for node in &positioned.diagram.objects {
        if !positioned.positions.contains_key(&node.id) {
            return Err(ExportError::MissingPosition(node.id.clone()));
        }
    }
    for id in positioned.positions.keys() {
        if !positioned.diagram.contains_object(id) {
            return Err(ExportError::UnknownPosition(id.clone()));
        }
    }
    Ok(())
}

/// Formats `doubled / 2`, which is either an integer or ends in `.5`.
fn half(doubled: u32) -> String {
    if doubled.is_multiple_of(2) {
        (doubled / 2).to_string()
    } else {
        format!("{}.5", doubled / 2)
    }
}

fn text_element(out: &mut String, x: u32, y: u32, extra: &str, content: &str) {
    let _ = write!(out, "<text x=\"{x}\" y=\"{y}\"{extra}>");
    escape_text(content, out);
    out.push_str("</text>\n");
}

/// Renders a laid-out diagram. Links are straight lines from the source's
/// right edge midpoint to the target's left edge midpoint, drawn beneath the
/// object boxes; the canvas is the bounding box plus a margin on every side.
pub fn to_svg(positioned: &PositionedDiagram) -> Result<String, ExportError> {
    let diagram = canonicalize(&positioned.diagram)?;
    check_positions(positioned)?;
    let pos = |id: &str| {
        let r = positioned.positions[id];
        (r.x + SVG_MARGIN, r.y + SVG_MARGIN, r.width, r.height)
    };

    let (w, h) = positioned.extent();
    let (w, h) = (w + 2 * SVG_MARGIN, h + 2 * SVG_MARGIN);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"{FONT_SIZE}\">"
    );

    for link in &diagram.links {
        let (sx, sy, sw, sh) = pos(&link.from);
        let (tx, ty, _, th) = pos(&link.to);
        let (x1, y1) = (2 * (sx + sw), 2 * sy + sh);
        let (x2, y2) = (2 * tx, 2 * ty + th);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            half(x1),
            half(y1),
            half(x2),
            half(y2)
        );
        let mx = half((x1 + x2) / 2);
        let my = (y1 + y2) / 4;
        let _ = write!(out, "<text x=\"{mx}\" y=\"{}\" text-anchor=\"middle\">", my.saturating_sub(LABEL_RAISE));
        escape_text(&link.type_name, &mut out);
        out.push_str("</text>\n");
    }

    for node in &diagram.objects {
        let (x, y, width, height) = pos(&node.id);
        out.push_str("<g>\n");
        let _ = write!(out, "<rect x=\"{x}\" y=\"{y}\" width=\"{width}\" height=\"{height}\" fill=\"white\" stroke=\"black\"");
        out.push_str(" data-id=\"");
        escape_attr(&node.id, &mut out);
        out.push_str("\"/>\n");
        let text_x = x + PADDING / 2;
        let baseline = |line: u32| y + PADDING / 2 + LINE_HEIGHT * (line + 1) - BASELINE_RAISE;
        text_element(
            &mut out,
            text_x,
            baseline(0),
            " text-decoration=\"underline\"",
            &header_text(node),
        );
        for (i, attr) in node.attributes.iter().enumerate() {
            text_element(&mut out, text_x, baseline(i as u32 + 1), "", &attribute_line(attr));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}
