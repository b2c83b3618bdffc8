//! Self-distillation data: Stage-1 move-or-click samples with privileged
//! hints for the teacher, and Stage-2 samples that replay a trace-hidden
//! teacher's outputs to a trace-visible student with reduced prompting.

mod export;
mod stage1;
mod stage2;

pub use export::{export_jsonl, import_jsonl, SCHEMA_VERSION};
pub use stage1::{eval_move_or_click, gen_stage1_samples, plan_stage1_sample, Stage1Config};
pub use stage2::{collect_stage2, Stage2Config};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{hit_test, Action, BoundingBox};
use crate::protocol::{texts, Message};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error(transparent)]
    Gen(#[from] crate::synthetic::GenError),
    #[error(transparent)]
    Run(#[from] crate::runner::RunError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image {path} does not match its recorded hash")]
    HashMismatch { path: String },
    #[error("malformed sample: {0}")]
    Format(String),
}

/// Click if the cursor is already inside the box, else move to the box
/// center rounded half-up.
pub fn label_action(cursor: (f64, f64), bbox: &BoundingBox) -> Action {
    if hit_test(bbox, cursor) {
        Action::MouseClick
    } else {
        let (cx, cy) = bbox.center();
        Action::move_to(cx, cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivilegedHint {
    pub cursor: (f64, f64),
    pub target_bbox: BoundingBox,
    pub correct_action: Action,
}

impl PrivilegedHint {
    pub fn new(cursor: (f64, f64), target_bbox: BoundingBox) -> Self {
        Self {
            cursor,
            target_bbox,
            correct_action: label_action(cursor, &target_bbox),
        }
    }

    /// `HINT: cursor=(cx,cy); target_bbox=(x,y,w,h); correct_action=...`
    pub fn text(&self) -> String {
        let b = self.target_bbox;
        let vars = [
            ("cx", self.cursor.0.to_string()),
            ("cy", self.cursor.1.to_string()),
            ("x", b.x.to_string()),
            ("y", b.y.to_string()),
            ("w", b.w.to_string()),
            ("h", b.h.to_string()),
            ("action", self.correct_action.call_text()),
        ];
        let mut s = texts().distill.hint.clone();
        for (k, v) in vars {
            s = s.replace(&format!("{{{k}}}"), &v);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub task_id: String,
    pub step: u32,
    pub seed: u64,
    /// Ground truth for Stage-1 samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<PrivilegedHint>,
    /// Target label of the task.
    pub target_text: String,
    pub prompt_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillSample {
    pub stage: Stage,
    pub teacher_messages: Vec<Message>,
    pub student_messages: Vec<Message>,
    pub target_output: String,
    pub meta: SampleMeta,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_examples() {
        let b = BoundingBox::new(100, 100, 50, 20);
        assert_eq!(label_action(b.center(), &b), Action::MouseClick);
        assert_eq!(label_action((0.0, 0.0), &b), Action::MouseMove { x: 125, y: 110 });
        assert_eq!(label_action((150.0, 110.0), &b), Action::MouseMove { x: 125, y: 110 });
    }

    #[test]
    fn odd_box_center_rounds_half_up() {
        let b = BoundingBox::new(0, 0, 11, 9);
        assert_eq!(label_action((100.0, 100.0), &b), Action::MouseMove { x: 6, y: 5 });
    }

    #[test]
    fn hint_text() {
        let h = PrivilegedHint::new((3.0, 4.0), BoundingBox::new(100, 100, 50, 20));
        assert_eq!(
            h.text(),
            "HINT: cursor=(3,4); target_bbox=(100,100,50,20); correct_action=mouse_move(125, 110)"
        );
    }
}
