//! The page-backend abstraction the runner drives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{TaskSpec, Viewport};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionVerdict {
    Ok,
    Occluded,
    Replaced,
    NotFound,
}

impl ExclusionVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, ExclusionVerdict::Ok)
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("no page loaded")]
    NoPageLoaded,
    #[error("unsupported page: {0}")]
    UnsupportedPage(String),
    #[error(transparent)]
    Cdp(#[from] crate::cdp::CdpError),
}

pub trait PageBackend {
    fn viewport(&self) -> Viewport;

    /// Loads the task's page and reports whether it may enter evaluation.
    fn load(&mut self, task: &TaskSpec) -> Result<ExclusionVerdict, BackendError>;

    /// Page raster at viewport size, without the cursor.
    fn screenshot(&mut self) -> Result<Raster, BackendError>;
}

impl<B: PageBackend + ?Sized> PageBackend for Box<B> {
    fn viewport(&self) -> Viewport {
        (**self).viewport()
    }
    fn load(&mut self, task: &TaskSpec) -> Result<ExclusionVerdict, BackendError> {
        (**self).load(task)
    }
    fn screenshot(&mut self) -> Result<Raster, BackendError> {
        (**self).screenshot()
    }
}

pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Case-insensitive, whitespace-normalized containment of `expected` in `visible`.
pub fn text_matches(visible: &str, expected: &str) -> bool {
    normalize_text(visible).contains(&normalize_text(expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_matching() {
        assert!(text_matches("  Switch to\n  ENGLISH  ", "english"));
        assert!(text_matches("Sign   in now", "sign in"));
        assert!(!text_matches("Deutsch", "English"));
    }
}
