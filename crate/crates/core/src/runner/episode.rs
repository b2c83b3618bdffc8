use serde::{Deserialize, Serialize};

use super::RunError;
use crate::agents::{Agent, EpisodeContext, PrivilegedView, SubStep};
use crate::backend::PageBackend;
use crate::env::{apply_action, hit_test, Action, BoundingBox, CursorState, EnvState, TaskSpec};
use crate::protocol::{
    build_action_prompt, build_feedback, build_reasoning_prompt, initial_observation,
    parse_action_cell, parse_think, AgentTurn, ExecutionOutcome, Message, RunConfig,
};
use crate::raster::composite_cursor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub task_id: String,
    pub task_index: u64,
    pub repetition: u32,
    pub agent: String,
    pub config: RunConfig,
    pub target_bbox: BoundingBox,
    pub initial_cursor: CursorState,
    pub turns: Vec<AgentTurn>,
    /// Cursor position after each executed move.
    pub moves: Vec<(f64, f64)>,
    pub click_point: Option<(f64, f64)>,
    pub success: bool,
    pub first_move_outside: bool,
    pub corrected_success: bool,
    pub infra_failure: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infra_error: Option<String>,
    pub steps_used: u32,
}

/// Prompts and replies of one step, kept for data collection.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub reasoning_messages: Vec<Message>,
    pub observation: Message,
    pub reasoning_reply: String,
    pub action_reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub record: EpisodeRecord,
    pub steps: Vec<StepLog>,
}

pub struct EpisodeSetup<'a> {
    pub task: &'a TaskSpec,
    pub task_index: u64,
    pub repetition: u32,
    pub episode_seed: u64,
    pub initial_cursor: CursorState,
}

fn observation_png(state: &EnvState) -> Result<Vec<u8>, RunError> {
    Ok(composite_cursor(&state.screenshot, &state.cursor).to_png()?)
}

/// Runs one episode on the task currently loaded in `backend`.
pub fn run_episode(
    backend: &mut dyn PageBackend,
    agent: &mut dyn Agent,
    task: &TaskSpec,
    config: &RunConfig,
    initial_cursor: CursorState,
) -> Result<EpisodeRecord, RunError> {
    let setup = EpisodeSetup {
        task,
        task_index: 0,
        repetition: 0,
        episode_seed: super::episode_seed(config.seed, 0, 0),
        initial_cursor,
    };
    Ok(run_episode_traced(backend, agent, config, &setup, false)?.record)
}

/// Episode loop with two agent calls per step (reasoning, then action).
/// Ends on the first click or when `step_quota` steps are used; a reply
/// that fails to parse consumes a step without touching the environment.
pub fn run_episode_traced(
    backend: &mut dyn PageBackend,
    agent: &mut dyn Agent,
    config: &RunConfig,
    setup: &EpisodeSetup<'_>,
    keep_steps: bool,
) -> Result<EpisodeTrace, RunError> {
    config.validate().map_err(RunError::Config)?;
    let task = setup.task;
    let viewport = backend.viewport();
    let bbox = task.target_bbox;
    let mut record = EpisodeRecord {
        task_id: task.task_id.clone(),
        task_index: setup.task_index,
        repetition: setup.repetition,
        agent: agent.name(),
        config: *config,
        target_bbox: bbox,
        initial_cursor: setup.initial_cursor,
        turns: Vec::new(),
        moves: Vec::new(),
        click_point: None,
        success: false,
        first_move_outside: false,
        corrected_success: false,
        infra_failure: false,
        infra_error: None,
        steps_used: 0,
    };
    let mut steps = Vec::new();

    let page = match backend.screenshot() {
        Ok(p) => p,
        Err(e) => {
            record.infra_failure = true;
            record.infra_error = Some(e.to_string());
            return Ok(EpisodeTrace { record, steps });
        }
    };
    let mut state = EnvState::new(page, setup.initial_cursor);
    let mut observation = initial_observation(observation_png(&state)?);
    let mut first_action_seen = false;

    agent.begin_episode(&EpisodeContext {
        task_id: &task.task_id,
        target_text: &task.target_text,
        episode_seed: setup.episode_seed,
    });

    while record.steps_used < config.step_quota && !state.terminated {
        let mut view = PrivilegedView {
            target_bbox: bbox,
            cursor: state.cursor,
            step: record.steps_used,
            substep: SubStep::Reasoning,
        };
        agent.observe(&view);
        let messages = build_reasoning_prompt(task, config, &observation, &record.turns);
        let reasoning_reply = match agent.respond(&messages) {
            Ok(r) => r,
            Err(e) => {
                record.infra_failure = true;
                record.infra_error = Some(e.to_string());
                break;
            }
        };
        record.steps_used += 1;
        let mut log = keep_steps.then(|| StepLog {
            reasoning_messages: messages.clone(),
            observation: observation.clone(),
            reasoning_reply: reasoning_reply.clone(),
            action_reply: None,
        });

        let outcome = match parse_think(&reasoning_reply) {
            Err(e) => {
                record.turns.push(AgentTurn {
                    reasoning_text: String::new(),
                    action_raw: String::new(),
                    action: Err(e),
                });
                ExecutionOutcome::ParseFailed(e)
            }
            Ok(reasoning_text) => {
                view.substep = SubStep::Action;
                agent.observe(&view);
                let action_messages = build_action_prompt(&messages, &reasoning_reply);
                let action_reply = match agent.respond(&action_messages) {
                    Ok(r) => r,
                    Err(e) => {
                        record.infra_failure = true;
                        record.infra_error = Some(e.to_string());
                        break;
                    }
                };
                if let Some(l) = log.as_mut() {
                    l.action_reply = Some(action_reply.clone());
                }
                let parsed = parse_action_cell(&action_reply);
                let action_raw = crate::protocol::action_cell_content(&action_reply);
                record.turns.push(AgentTurn {
                    reasoning_text,
                    action_raw,
                    action: parsed,
                });
                match parsed {
                    Ok(action) => execute(&mut state, &mut record, action, &mut first_action_seen, viewport, backend)?,
                    Err(e) => ExecutionOutcome::ParseFailed(e),
                }
            }
        };
        if let Some(l) = log {
            steps.push(l);
        }
        if record.infra_failure {
            break;
        }
        if !state.terminated {
            observation = build_feedback(&outcome, Some(observation_png(&state)?));
        }
    }

    record.click_point = state.click_point;
    record.success = !record.infra_failure
        && state
            .click_point
            .is_some_and(|p| hit_test(&bbox, p));
    record.corrected_success = record.first_move_outside && record.success;
    Ok(EpisodeTrace { record, steps })
}

fn execute(
    state: &mut EnvState,
    record: &mut EpisodeRecord,
    action: Action,
    first_action_seen: &mut bool,
    viewport: crate::env::Viewport,
    backend: &mut dyn PageBackend,
) -> Result<ExecutionOutcome, RunError> {
    let (mut next, transition) = apply_action(state, action, viewport)?;
    if let Action::MouseMove { .. } = action {
        record.moves.push(next.cursor.point());
        if !*first_action_seen {
            record.first_move_outside = !hit_test(&record.target_bbox, next.cursor.point());
        }
    }
    *first_action_seen = true;
    match backend.screenshot() {
        Ok(page) => next.screenshot = page,
        Err(e) => {
            record.infra_failure = true;
            record.infra_error = Some(e.to_string());
        }
    }
    let cursor = next.cursor.point();
    *state = next;
    Ok(ExecutionOutcome::Executed {
        transition,
        cursor,
        viewport,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentError, MoveOnlyAgent, OracleAgent, PrematureClickerAgent};
    use crate::env::{PageRef, Viewport};
    use crate::protocol::{Part, ParseError, Role};
    use crate::synthetic::{LayoutElement, PageLayout, SyntheticBackend};

    const BOX: BoundingBox = BoundingBox::new(100, 100, 50, 20);

    fn fixture() -> (SyntheticBackend, TaskSpec) {
        let vp = Viewport::new(320, 200).unwrap();
        let layout = PageLayout {
            viewport: vp,
            background: [255, 255, 255, 255],
            elements: vec![LayoutElement {
                id: "go".into(),
                rect: BOX,
                fill: [0, 90, 200, 255],
                label: "Go".into(),
                clickable: true,
                parent: None,
            }],
        };
        let task = TaskSpec {
            task_id: "t".into(),
            page: PageRef::Synthetic { layout },
            target_locator: "go".into(),
            target_bbox: BOX,
            target_text: "Go".into(),
            formulation_simplified: "Click on the element that displays Go or conveys its meaning.".into(),
            formulation_humanlike: "Start.".into(),
        };
        let mut backend = SyntheticBackend::new(vp);
        assert!(backend.load(&task).unwrap().is_ok());
        (backend, task)
    }

    fn run(agent: &mut dyn Agent, quota: u32, start: (f64, f64)) -> EpisodeRecord {
        let (mut backend, task) = fixture();
        let config = RunConfig {
            step_quota: quota,
            ..RunConfig::default()
        };
        run_episode(&mut backend, agent, &task, &config, CursorState::new(start.0, start.1)).unwrap()
    }

    #[test]
    fn oracle_from_outside_takes_two_steps() {
        let r = run(&mut OracleAgent::new(), 5, (0.0, 0.0));
        assert!(r.success && !r.first_move_outside && !r.corrected_success);
        assert_eq!(r.steps_used, 2);
        assert_eq!(r.moves, vec![(125.0, 110.0)]);
        assert_eq!(r.click_point, Some((125.0, 110.0)));
    }

    #[test]
    fn premature_from_outside_fails_in_one_step() {
        let r = run(&mut PrematureClickerAgent::new(), 5, (0.0, 0.0));
        assert!(!r.success);
        assert_eq!(r.steps_used, 1);
        assert_eq!(r.click_point, Some((0.0, 0.0)));
        assert!(!r.first_move_outside);
        assert!(run(&mut PrematureClickerAgent::new(), 5, (101.0, 101.0)).success);
    }

    #[test]
    fn move_only_exhausts_quota() {
        let r = run(&mut MoveOnlyAgent::new(), 5, (0.0, 0.0));
        assert!(!r.success && !r.infra_failure);
        assert_eq!(r.steps_used, 5);
        assert_eq!(r.click_point, None);
        assert_eq!(r.moves.len(), 5);
    }

    struct Scripted(Vec<Result<String, AgentError>>);

    impl Agent for Scripted {
        fn name(&self) -> String {
            "scripted".into()
        }
        fn respond(&mut self, _: &[Message]) -> Result<String, AgentError> {
            self.0.remove(0)
        }
    }

    #[test]
    fn missing_think_block_consumes_a_step_without_acting() {
        let mut a = Scripted(vec![
            Ok("no tags".into()),
            Ok("<think>t</think>".into()),
            Ok("<ipython_cell>mouse_click()</ipython_cell>".into()),
        ]);
        let r = run(&mut a, 3, (0.0, 0.0));
        assert_eq!(r.steps_used, 2);
        assert_eq!(r.turns[0].action, Err(ParseError::NoThinkBlock));
        assert_eq!(r.turns[1].action, Ok(Action::MouseClick));
        assert!(!r.success);
    }

    #[test]
    fn first_move_outside_is_judged_on_the_first_action() {
        let mut a = Scripted(vec![
            Ok("<think>a</think>".into()),
            Ok("<ipython_cell>mouse_move(5, 5)</ipython_cell>".into()),
            Ok("<think>b</think>".into()),
            Ok("<ipython_cell>mouse_move(125, 110)</ipython_cell>".into()),
            Ok("<think>c</think>".into()),
            Ok("<ipython_cell>mouse_click()</ipython_cell>".into()),
        ]);
        let r = run(&mut a, 5, (0.0, 0.0));
        assert!(r.success && r.first_move_outside && r.corrected_success);
        assert_eq!(r.steps_used, 3);
    }

    #[test]
    fn agent_errors_are_infrastructure_failures() {
        let mut a = Scripted(vec![Ok("<think>a</think>".into()), Err(AgentError::Timeout)]);
        let r = run(&mut a, 5, (125.0, 110.0));
        assert!(r.infra_failure && !r.success);
        assert_eq!(r.infra_error.as_deref(), Some("request timed out"));
    }

    #[test]
    fn visible_trace_feeds_back_prior_turns() {
        let (mut backend, task) = fixture();
        let config = RunConfig {
            trace_visible: true,
            ..RunConfig::default()
        };
        let setup = EpisodeSetup {
            task: &task,
            task_index: 0,
            repetition: 0,
            episode_seed: 0,
            initial_cursor: CursorState::new(0.0, 0.0),
        };
        let trace = run_episode_traced(&mut backend, &mut OracleAgent::new(), &config, &setup, true).unwrap();
        assert_eq!(trace.steps.len(), 2);
        let assistants = |ms: &[Message]| ms.iter().filter(|m| m.role == Role::Assistant).count();
        assert_eq!(assistants(&trace.steps[0].reasoning_messages), 0);
        assert_eq!(assistants(&trace.steps[1].reasoning_messages), 1);
        // the second observation reports the executed move
        let feedback = trace.steps[1].observation.joined_text();
        assert!(feedback.contains("moved to (125, 110)"), "{feedback}");
        assert!(trace.steps[1].observation.parts.iter().any(|p| matches!(p, Part::Image(_))));
    }
}
