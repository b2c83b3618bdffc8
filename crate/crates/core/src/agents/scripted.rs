use rand_chacha::ChaCha8Rng;

use super::relation::describe_relation;
use super::{Agent, AgentError, EpisodeContext, PrivilegedView, SubStep};
use crate::env::{hit_test, Action};
use crate::protocol::{serialize_action_cell, Message, THINK_CLOSE, THINK_OPEN};
use crate::rng;

/// Shared plumbing: a per-step plan chosen at the reasoning sub-step and
/// replayed at the action sub-step.
#[derive(Debug, Default)]
struct Script {
    label: String,
    view: Option<PrivilegedView>,
    planned: Option<Action>,
    thought: String,
}

impl Script {
    fn begin(&mut self, ctx: &EpisodeContext<'_>) {
        self.label = ctx.target_text.to_string();
        self.view = None;
        self.planned = None;
    }

    fn plan(&mut self, view: &PrivilegedView, action: Action) {
        self.view = Some(*view);
        self.planned = Some(action);
        self.thought = describe_relation(&view.cursor, &view.target_bbox, &self.label);
    }

    fn reply(&self) -> Result<String, AgentError> {
        let view = self.view.ok_or(AgentError::EmptyReply)?;
        let action = self.planned.ok_or(AgentError::EmptyReply)?;
        Ok(match view.substep {
            SubStep::Reasoning => format!("{THINK_OPEN}{}{THINK_CLOSE}", self.thought),
            SubStep::Action => serialize_action_cell(&action),
        })
    }
}

fn oracle_action(view: &PrivilegedView) -> Action {
    if hit_test(&view.target_bbox, view.cursor.point()) {
        Action::MouseClick
    } else {
        let (cx, cy) = view.target_bbox.center();
        Action::move_to(cx, cy)
    }
}

fn noisy_center(view: &PrivilegedView, sigma: f64, rng: &mut ChaCha8Rng) -> Action {
    let (cx, cy) = view.target_bbox.center();
    let (zx, zy) = rng::gaussian_pair(rng);
    Action::move_to(cx + sigma * zx, cy + sigma * zy)
}

/// Clicks when the cursor is inside the target, otherwise moves to its center.
#[derive(Debug, Default)]
pub struct OracleAgent {
    script: Script,
}

impl OracleAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> String {
        "oracle".into()
    }
    fn begin_episode(&mut self, ctx: &EpisodeContext<'_>) {
        self.script.begin(ctx);
    }
    fn observe(&mut self, view: &PrivilegedView) {
        if view.substep == SubStep::Reasoning {
            self.script.plan(view, oracle_action(view));
        } else {
            self.script.view = Some(*view);
        }
    }
    fn respond(&mut self, _messages: &[Message]) -> Result<String, AgentError> {
        self.script.reply()
    }
}

/// Open loop: one move to the center plus Gaussian noise (sigma per axis),
/// then a click regardless of where the cursor ended up.
#[derive(Debug)]
pub struct NoisyOracleAgent {
    sigma: f64,
    seed: u64,
    rng: ChaCha8Rng,
    script: Script,
}

impl NoisyOracleAgent {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            rng: rng::stream(seed, &[]),
            script: Script::default(),
        }
    }
}

impl Agent for NoisyOracleAgent {
    fn name(&self) -> String {
        format!("noisy(sigma={})", self.sigma)
    }
    fn begin_episode(&mut self, ctx: &EpisodeContext<'_>) {
        self.script.begin(ctx);
        self.rng = rng::stream(self.seed, &[ctx.episode_seed]);
    }
    fn observe(&mut self, view: &PrivilegedView) {
        if view.substep == SubStep::Action {
            self.script.view = Some(*view);
            return;
        }
        let action = if view.step == 0 {
            noisy_center(view, self.sigma, &mut self.rng)
        } else {
            Action::MouseClick
        };
        self.script.plan(view, action);
    }
    fn respond(&mut self, _messages: &[Message]) -> Result<String, AgentError> {
        self.script.reply()
    }
}

/// Closed loop: the first move is noisy; afterwards it checks the real
/// cursor and re-moves to the exact center until the cursor is inside.
#[derive(Debug)]
pub struct CorrectingOracleAgent {
    sigma: f64,
    seed: u64,
    rng: ChaCha8Rng,
    script: Script,
}

impl CorrectingOracleAgent {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            rng: rng::stream(seed, &[]),
            script: Script::default(),
        }
    }
}

impl Agent for CorrectingOracleAgent {
    fn name(&self) -> String {
        format!("correcting(sigma={})", self.sigma)
    }
    fn begin_episode(&mut self, ctx: &EpisodeContext<'_>) {
        self.script.begin(ctx);
        self.rng = rng::stream(self.seed, &[ctx.episode_seed]);
    }
    fn observe(&mut self, view: &PrivilegedView) {
        if view.substep == SubStep::Action {
            self.script.view = Some(*view);
            return;
        }
        let action = if view.step == 0 {
            noisy_center(view, self.sigma, &mut self.rng)
        } else {
            oracle_action(view)
        };
        self.script.plan(view, action);
    }
    fn respond(&mut self, _messages: &[Message]) -> Result<String, AgentError> {
        self.script.reply()
    }
}

/// Clicks on the first step without moving.
#[derive(Debug, Default)]
pub struct PrematureClickerAgent {
    script: Script,
}

impl PrematureClickerAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Agent for PrematureClickerAgent {
    fn name(&self) -> String {
        "premature".into()
    }
    fn begin_episode(&mut self, ctx: &EpisodeContext<'_>) {
        self.script.begin(ctx);
    }
    fn observe(&mut self, view: &PrivilegedView) {
        if view.substep == SubStep::Reasoning {
            self.script.plan(view, Action::MouseClick);
        } else {
            self.script.view = Some(*view);
        }
    }
    fn respond(&mut self, _messages: &[Message]) -> Result<String, AgentError> {
        self.script.reply()
    }
}

/// Keeps moving to the target center and never clicks.
#[derive(Debug, Default)]
pub struct MoveOnlyAgent {
    script: Script,
}

impl MoveOnlyAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Agent for MoveOnlyAgent {
    fn name(&self) -> String {
        "move-only".into()
    }
    fn begin_episode(&mut self, ctx: &EpisodeContext<'_>) {
        self.script.begin(ctx);
    }
    fn observe(&mut self, view: &PrivilegedView) {
        if view.substep == SubStep::Reasoning {
            let (cx, cy) = view.target_bbox.center();
            self.script.plan(view, Action::move_to(cx, cy));
        } else {
            self.script.view = Some(*view);
        }
    }
    fn respond(&mut self, _messages: &[Message]) -> Result<String, AgentError> {
        self.script.reply()
    }
}
