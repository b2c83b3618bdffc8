//! Prompt assembly and strict parsing of agent replies.

mod message;
mod parse;
mod prompt;
mod texts;

pub use message::{Message, Part, Role};
pub use parse::{
    action_cell_content, parse_action_cell, parse_think, serialize_action_cell, ParseError, ACTION_CLOSE, ACTION_OPEN,
    THINK_CLOSE, THINK_OPEN,
};
pub use prompt::{
    build_action_prompt, build_feedback, build_reasoning_prompt, initial_observation,
    ConsoleOutput, ExecutionOutcome,
};
pub use texts::{texts, PromptTexts};

use serde::{Deserialize, Serialize};

use crate::env::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Simplified,
    HumanLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunConfig {
    pub trace_visible: bool,
    pub guidance_present: bool,
    pub formulation: Formulation,
    pub step_quota: u32,
    pub repetitions: u32,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trace_visible: false,
            guidance_present: true,
            formulation: Formulation::Simplified,
            step_quota: 5,
            repetitions: 5,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.step_quota == 0 {
            return Err("step_quota must be at least 1".into());
        }
        if self.repetitions == 0 {
            return Err("repetitions must be at least 1".into());
        }
        Ok(())
    }

    /// Short label like `trace=off guidance=on formulation=simplified`.
    pub fn label(&self) -> String {
        let onoff = |b: bool| if b { "on" } else { "off" };
        let f = match self.formulation {
            Formulation::Simplified => "simplified",
            Formulation::HumanLike => "humanlike",
        };
        format!(
            "trace={} guidance={} formulation={f}",
            onoff(self.trace_visible),
            onoff(self.guidance_present)
        )
    }
}

/// One agent step: the reasoning sub-step's think content and the action
/// sub-step's cell content, with the parsed action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub reasoning_text: String,
    pub action_raw: String,
    pub action: Result<Action, ParseError>,
}

impl AgentTurn {
    /// Assistant-side text of this turn as replayed in a visible trace.
    pub fn transcript(&self) -> String {
        format!(
            "{THINK_OPEN}{}{THINK_CLOSE}\n{ACTION_OPEN}{}{ACTION_CLOSE}",
            self.reasoning_text, self.action_raw
        )
    }
}
