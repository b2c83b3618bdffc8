//! Real-browser backend over the Chrome DevTools Protocol.
//!
//! Everything is synchronous: one [`BrowserSession`] owns one page target
//! and one WebSocket, and every command blocks until its response arrives.

mod launch;
mod session;
mod transport;

pub use launch::{find_browser, BrowserProcess};
pub use session::{
    classify_exclusion, rect_to_bbox, BrowserSession, CdpBackend, ExclusionProbe, DEFAULT_NAVIGATION_TIMEOUT,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CdpError {
    #[error("cannot connect to {endpoint}: {reason}")]
    ConnectFailed { endpoint: String, reason: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{method} timed out")]
    Timeout { method: String },
    #[error("navigation to {path} did not finish within {secs} s")]
    NavigationTimeout { path: String, secs: u64 },
    #[error("cannot load {path}: {reason}")]
    LoadFailed { path: String, reason: String },
    #[error("xpath matched nothing: {0}")]
    NotFound(String),
    #[error("xpath matched an element without area: {0}")]
    ZeroArea(String),
    #[error("browser launch failed: {0}")]
    Launch(String),
}
