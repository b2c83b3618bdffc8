//! Deterministic in-process page model. Pages are stacks of labelled
//! rectangles, so every target's ground truth is exact.

mod generate;
mod layout;
mod render;

pub use generate::{
    generate_task, generate_tasks, simplified_formulation, GenError, GenSpec, GeneratedTask,
    OverlapPolicy, SpanF, SpanU,
};
pub(crate) use generate::place_cursor;
pub use layout::{occlusion_check, LayoutElement, LayoutError, PageLayout};
pub use render::{render_page, GeometryTable};

use crate::backend::{BackendError, ExclusionVerdict, PageBackend};
use crate::env::{PageRef, TaskSpec, Viewport};
use crate::raster::Raster;

/// Page backend over [`PageLayout`]s embedded in task manifests.
#[derive(Debug, Default)]
pub struct SyntheticBackend {
    viewport: Viewport,
    current: Option<Raster>,
}

impl SyntheticBackend {
    pub fn new(viewport: Viewport) -> Self {
        Self {
            viewport,
            current: None,
        }
    }
}

impl PageBackend for SyntheticBackend {
    fn viewport(&self) -> Viewport {
        self.viewport
    }

    fn load(&mut self, task: &TaskSpec) -> Result<ExclusionVerdict, BackendError> {
        let layout = match &task.page {
            PageRef::Synthetic { layout } => layout,
            PageRef::Snapshot { path } => {
                return Err(BackendError::UnsupportedPage(format!(
                    "synthetic backend cannot load snapshot {}",
                    path.display()
                )))
            }
        };
        if layout.viewport != self.viewport {
            return Err(BackendError::UnsupportedPage(format!(
                "layout viewport {}x{} differs from backend viewport {}x{}",
                layout.viewport.width, layout.viewport.height, self.viewport.width, self.viewport.height
            )));
        }
        self.current = None;
        let Some(target) = layout.element(&task.target_locator) else {
            return Ok(ExclusionVerdict::NotFound);
        };
        if !crate::backend::text_matches(&target.label, &task.target_text) {
            return Ok(ExclusionVerdict::Replaced);
        }
        match occlusion_check(layout, &task.target_locator) {
            Ok(true) => return Ok(ExclusionVerdict::Occluded),
            Ok(false) => {}
            Err(_) => return Ok(ExclusionVerdict::NotFound),
        }
        let (raster, _) = render_page(layout);
        self.current = Some(raster);
        Ok(ExclusionVerdict::Ok)
    }

    fn screenshot(&mut self) -> Result<Raster, BackendError> {
        self.current.clone().ok_or(BackendError::NoPageLoaded)
    }
}
