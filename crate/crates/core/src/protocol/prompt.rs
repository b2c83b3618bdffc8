use super::message::{Message, Part, Role};
use super::parse::ParseError;
use super::texts::{fill, texts};
use super::{AgentTurn, Formulation, RunConfig};
use crate::env::{Action, TaskSpec, Transition, Viewport};

/// Result of attempting one action, as reported back on the console.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecutionOutcome {
    Executed {
        transition: Transition,
        cursor: (f64, f64),
        viewport: Viewport,
    },
    ParseFailed(ParseError),
    Failed(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConsoleOutput {
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
}

impl ConsoleOutput {
    pub fn from_outcome(outcome: &ExecutionOutcome) -> Self {
        let f = &texts().feedback;
        let mut out = ConsoleOutput::default();
        match outcome {
            ExecutionOutcome::Executed {
                transition,
                cursor,
                viewport,
            } => match transition.action {
                Action::MouseMove { .. } => {
                    let (x, y) = (cursor.0.to_string(), cursor.1.to_string());
                    if transition.clamped {
                        let (rx, ry) = transition.requested.unwrap_or_default();
                        out.stdout.push(fill(
                            &f.clamped,
                            &[
                                ("rx", rx.to_string()),
                                ("ry", ry.to_string()),
                                ("w", viewport.width.to_string()),
                                ("h", viewport.height.to_string()),
                                ("x", x.clone()),
                                ("y", y.clone()),
                            ],
                        ));
                    }
                    out.stdout.push(fill(&f.moved, &[("x", x), ("y", y)]));
                }
                Action::MouseClick => out.stdout.push(fill(
                    &f.clicked,
                    &[("x", cursor.0.to_string()), ("y", cursor.1.to_string())],
                )),
            },
            ExecutionOutcome::ParseFailed(e) => out.stderr.push(e.feedback().to_string()),
            ExecutionOutcome::Failed(msg) => out.stderr.push(msg.clone()),
        }
        out
    }

    pub fn render(&self) -> String {
        let f = &texts().feedback;
        let mut s = String::new();
        s.push_str(&f.stdout_header);
        for line in &self.stdout {
            s.push('\n');
            s.push_str(line);
        }
        s.push('\n');
        s.push_str(&f.stderr_header);
        for line in &self.stderr {
            s.push('\n');
            s.push_str(line);
        }
        s
    }
}

/// Console feedback after an action, followed by the fresh screenshot
/// (PNG) when the episode continues.
pub fn build_feedback(outcome: &ExecutionOutcome, screenshot_png: Option<Vec<u8>>) -> Message {
    let mut parts = vec![Part::Text(ConsoleOutput::from_outcome(outcome).render())];
    if let Some(png) = screenshot_png {
        parts.push(Part::Text(texts().feedback.screenshot.clone()));
        parts.push(Part::Image(png));
    }
    Message::new(Role::User, parts)
}

/// Observation message for the first step of an episode.
pub fn initial_observation(screenshot_png: Vec<u8>) -> Message {
    Message::new(
        Role::User,
        vec![
            Part::Text(texts().initial_observation.clone()),
            Part::Image(screenshot_png),
        ],
    )
}

fn formulation_text(task: &TaskSpec, formulation: Formulation) -> &str {
    match formulation {
        Formulation::Simplified => &task.formulation_simplified,
        Formulation::HumanLike => &task.formulation_humanlike,
    }
}

/// Messages for the reasoning sub-step.
///
/// Layout: system preamble; a user message with the task formulation and,
/// when enabled, the guidance block as its own part; one assistant message
/// per prior turn when the trace is visible; then `observation` (the latest
/// screenshot with any console output) with the reasoning instruction
/// appended.
pub fn build_reasoning_prompt(
    task: &TaskSpec,
    config: &RunConfig,
    observation: &Message,
    trace: &[AgentTurn],
) -> Vec<Message> {
    let t = texts();
    let mut messages = Vec::with_capacity(3 + trace.len());
    messages.push(Message::text(Role::System, t.system_preamble.clone()));

    let mut task_parts = vec![Part::Text(fill(
        &t.task_intro,
        &[("formulation", formulation_text(task, config.formulation).to_string())],
    ))];
    if config.guidance_present {
        task_parts.push(Part::Text(t.guidance.clone()));
    }
    messages.push(Message::new(Role::User, task_parts));

    if config.trace_visible {
        for turn in trace {
            messages.push(Message::text(Role::Assistant, turn.transcript()));
        }
    }

    let mut obs = observation.clone();
    obs.parts.push(Part::Text(t.reasoning_instruction.clone()));
    messages.push(obs);
    messages
}

/// Messages for the action sub-step: the reasoning exchange plus the
/// single-call instruction.
pub fn build_action_prompt(prior: &[Message], reasoning_reply: &str) -> Vec<Message> {
    let mut messages = prior.to_vec();
    messages.push(Message::text(Role::Assistant, reasoning_reply));
    messages.push(Message::text(Role::User, texts().action_instruction.clone()));
    messages
}
