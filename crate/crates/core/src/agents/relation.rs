use crate::env::{hit_test, BoundingBox, CursorState};

fn fmt_coord(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v:.1}")
    }
}

/// Where the cursor sits relative to the box, e.g. "above and to the left of".
pub fn relative_position(cursor: &CursorState, bbox: &BoundingBox) -> String {
    if hit_test(bbox, cursor.point()) {
        return "inside".to_string();
    }
    let vertical = if cursor.y < bbox.y as f64 {
        Some("above")
    } else if cursor.y >= bbox.bottom() as f64 {
        Some("below")
    } else {
        None
    };
    let horizontal = if cursor.x < bbox.x as f64 {
        Some("to the left of")
    } else if cursor.x >= bbox.right() as f64 {
        Some("to the right of")
    } else {
        None
    };
    match (vertical, horizontal) {
        (Some(v), Some(h)) => format!("{v} and {h}"),
        (Some(v), None) => v.to_string(),
        (None, Some(h)) => h.to_string(),
        (None, None) => "inside".to_string(),
    }
}

/// One-paragraph description of the cursor-target relation used as the
/// reasoning text of scripted agents and distillation targets.
pub fn describe_relation(cursor: &CursorState, bbox: &BoundingBox, label: &str) -> String {
    let (cx, cy) = bbox.center_pixel();
    let rel = relative_position(cursor, bbox);
    let place = if rel == "inside" {
        "inside the target element, so the cursor is pointing at it. Next action: click.".to_string()
    } else {
        format!("{rel} the target element, so the cursor is not pointing at it. Next action: move the cursor to ({cx}, {cy}).")
    };
    format!(
        "The target element \"{label}\" occupies x {}..{}, y {}..{} with its center at ({cx}, {cy}). The cursor tip is at ({}, {}), {place}",
        bbox.x,
        bbox.right(),
        bbox.y,
        bbox.bottom(),
        fmt_coord(cursor.x),
        fmt_coord(cursor.y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions() {
        let b = BoundingBox::new(100, 100, 50, 20);
        let p = |x, y| relative_position(&CursorState::new(x, y), &b);
        assert_eq!(p(125.0, 110.0), "inside");
        assert_eq!(p(0.0, 0.0), "above and to the left of");
        assert_eq!(p(150.0, 110.0), "to the right of");
        assert_eq!(p(120.0, 300.0), "below");
    }

    #[test]
    fn description_mentions_move_target() {
        let d = describe_relation(&CursorState::new(0.0, 0.0), &BoundingBox::new(100, 100, 50, 20), "English");
        assert!(d.contains("(125, 110)"));
        assert!(d.contains("\"English\""));
        assert!(d.contains("not pointing"));
    }
}
