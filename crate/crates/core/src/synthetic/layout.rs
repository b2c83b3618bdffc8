use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{hit_test, BoundingBox, Viewport};
use crate::raster::Rgba;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("duplicate element id {0:?}")]
    DuplicateId(String),
    #[error("element {0:?} has an empty rectangle")]
    EmptyRect(String),
    #[error("clickable element {0:?} has no label")]
    MissingLabel(String),
    #[error("layout has no clickable element")]
    NoTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutElement {
    pub id: String,
    pub rect: BoundingBox,
    pub fill: Rgba,
    pub label: String,
    pub clickable: bool,
    /// Containing element, if this one is nested inside another.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

/// Elements paint in list order: later entries sit on top.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageLayout {
    pub viewport: Viewport,
    pub background: Rgba,
    pub elements: Vec<LayoutElement>,
}

impl PageLayout {
    pub fn element(&self, id: &str) -> Option<&LayoutElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.id == id)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.elements {
            if !seen.insert(e.id.as_str()) {
                return Err(LayoutError::DuplicateId(e.id.clone()));
            }
            if e.rect.w <= 0 || e.rect.h <= 0 {
                return Err(LayoutError::EmptyRect(e.id.clone()));
            }
            if e.clickable && e.label.trim().is_empty() {
                return Err(LayoutError::MissingLabel(e.id.clone()));
            }
        }
        if !self.elements.iter().any(|e| e.clickable) {
            return Err(LayoutError::NoTarget);
        }
        Ok(())
    }

    /// True if `id` is `ancestor` or nested (transitively) inside it.
    pub fn is_descendant_or_self(&self, id: &str, ancestor: &str) -> bool {
        let mut cur = Some(id);
        let mut hops = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            hops += 1;
            if hops > self.elements.len() {
                return false;
            }
            cur = self.element(c).and_then(|e| e.parent.as_deref());
        }
        false
    }
}

/// Judges occlusion at the target's center: the topmost element covering
/// that point must be the target or one of its descendants painted after it.
pub fn occlusion_check(layout: &PageLayout, target_id: &str) -> Result<bool, LayoutError> {
    let target_pos = layout
        .position(target_id)
        .ok_or_else(|| LayoutError::UnknownElement(target_id.to_string()))?;
    let center = layout.elements[target_pos].rect.center();
    let top = layout
        .elements
        .iter()
        .enumerate()
        .rev()
        .find(|(_, e)| hit_test(&e.rect, center));
    Ok(match top {
        Some((i, e)) => {
            !(i == target_pos || (i > target_pos && layout.is_descendant_or_self(&e.id, target_id)))
        }
        None => false,
    })
}
