//! Agents answer one prompt per sub-step. Scripted agents additionally get a
//! privileged view of the ground truth so they can serve as oracles.

mod relation;
mod remote;
mod scripted;

pub use relation::{describe_relation, relative_position};
pub use remote::{ImagePartStyle, RemoteEndpointConfig, RemoteVlmAgent};
pub use scripted::{
    CorrectingOracleAgent, MoveOnlyAgent, NoisyOracleAgent, OracleAgent, PrematureClickerAgent,
};

use thiserror::Error;

use crate::env::{BoundingBox, CursorState};
use crate::protocol::Message;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {0}")]
    HttpError(u16),
    #[error("endpoint returned an empty reply")]
    EmptyReply,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStep {
    Reasoning,
    Action,
}

/// Ground truth handed to agents before every sub-step. Only scripted
/// agents look at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivilegedView {
    pub target_bbox: BoundingBox,
    pub cursor: CursorState,
    /// Steps already taken in this episode.
    pub step: u32,
    pub substep: SubStep,
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub task_id: &'a str,
    pub target_text: &'a str,
    /// Per-episode seed derived from (benchmark seed, task index, repetition).
    pub episode_seed: u64,
}

pub trait Agent {
    fn name(&self) -> String;

    fn begin_episode(&mut self, _ctx: &EpisodeContext<'_>) {}

    fn observe(&mut self, _view: &PrivilegedView) {}

    fn respond(&mut self, messages: &[Message]) -> Result<String, AgentError>;

    /// Whether errors from `respond` are transport failures rather than agent behaviour.
    fn is_remote(&self) -> bool {
        false
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn begin_episode(&mut self, ctx: &EpisodeContext<'_>) {
        (**self).begin_episode(ctx)
    }
    fn observe(&mut self, view: &PrivilegedView) {
        (**self).observe(view)
    }
    fn respond(&mut self, messages: &[Message]) -> Result<String, AgentError> {
        (**self).respond(messages)
    }
    fn is_remote(&self) -> bool {
        (**self).is_remote()
    }
}
