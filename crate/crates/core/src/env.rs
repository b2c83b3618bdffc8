//! Environment state and the two-action semantics shared by every page backend.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("action applied to a terminated episode")]
    ActionAfterTermination,
    #[error("invalid viewport {width}x{height}")]
    InvalidViewport { width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Viewport {
    pub width: u32,
    pub height: u32,
}

impl Viewport {
    pub fn new(width: u32, height: u32) -> Result<Self, EnvError> {
        if width == 0 || height == 0 {
            return Err(EnvError::InvalidViewport { width, height });
        }
        Ok(Self { width, height })
    }

    /// Clamp a pixel position into the viewport. Returns the clamped point
    /// and whether any clamping took place.
    pub fn clamp(&self, x: i64, y: i64) -> ((i64, i64), bool) {
        let cx = x.clamp(0, self.width as i64 - 1);
        let cy = y.clamp(0, self.height as i64 - 1);
        ((cx, cy), cx != x || cy != y)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }
}

impl Default for Viewport {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 800,
        }
    }
}

/// Axis-aligned rectangle in CSS pixels, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl BoundingBox {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    /// Center rounded half-up to a whole pixel.
    pub fn center_pixel(&self) -> (i64, i64) {
        let (cx, cy) = self.center();
        (round_half_up(cx), round_half_up(cy))
    }

    pub fn right(&self) -> i32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) as i64 * self.h.max(0) as i64
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn diagonal(&self) -> f64 {
        (self.w as f64).hypot(self.h as f64)
    }
}

/// Half-open containment: left/top edges are inside, right/bottom are not.
pub fn hit_test(bbox: &BoundingBox, point: (f64, f64)) -> bool {
    let (x, y) = point;
    x >= bbox.x as f64 && x < bbox.right() as f64 && y >= bbox.y as f64 && y < bbox.bottom() as f64
}

pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorState {
    pub x: f64,
    pub y: f64,
}

impl CursorState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn point(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// The two browser methods available to the agent. Move targets are whole
/// pixels; real-valued coordinates are rounded on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Action {
    MouseMove { x: i64, y: i64 },
    MouseClick,
}

impl Action {
    pub fn move_to(x: f64, y: f64) -> Self {
        Action::MouseMove {
            x: round_half_up(x),
            y: round_half_up(y),
        }
    }

    pub fn is_click(&self) -> bool {
        matches!(self, Action::MouseClick)
    }

    /// Canonical call text, e.g. `mouse_move(412, 233)`.
    pub fn call_text(&self) -> String {
        match self {
            Action::MouseMove { x, y } => format!("mouse_move({x}, {y})"),
            Action::MouseClick => "mouse_click()".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub screenshot: Raster,
    pub cursor: CursorState,
    pub step_index: u32,
    pub terminated: bool,
    pub click_point: Option<(f64, f64)>,
}

impl EnvState {
    pub fn new(screenshot: Raster, cursor: CursorState) -> Self {
        Self {
            screenshot,
            cursor,
            step_index: 0,
            terminated: false,
            click_point: None,
        }
    }
}

/// What happened when an action was executed, for console feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub action: Action,
    /// Requested move target before clamping.
    pub requested: Option<(i64, i64)>,
    pub clamped: bool,
}

/// Applies one action. The screenshot is carried over unchanged; the caller
/// refreshes it from its backend afterwards.
pub fn apply_action(
    state: &EnvState,
    action: Action,
    viewport: Viewport,
) -> Result<(EnvState, Transition), EnvError> {
    if state.terminated {
        return Err(EnvError::ActionAfterTermination);
    }
    let mut next = state.clone();
    next.step_index += 1;
    let transition = match action {
        Action::MouseMove { x, y } => {
            let ((cx, cy), clamped) = viewport.clamp(x, y);
            next.cursor = CursorState::new(cx as f64, cy as f64);
            Transition {
                action,
                requested: Some((x, y)),
                clamped,
            }
        }
        Action::MouseClick => {
            next.click_point = Some(next.cursor.point());
            next.terminated = true;
            Transition {
                action,
                requested: None,
                clamped: false,
            }
        }
    };
    Ok((next, transition))
}

/// Where the page for a task comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PageRef {
    Synthetic {
        layout: crate::synthetic::PageLayout,
    },
    Snapshot {
        path: std::path::PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub page: PageRef,
    /// XPath for snapshot pages, element id for synthetic ones.
    pub target_locator: String,
    pub target_bbox: BoundingBox,
    pub target_text: String,
    pub formulation_simplified: String,
    pub formulation_humanlike: String,
}
