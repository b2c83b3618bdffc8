use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{label_action, DistillError, DistillSample, PrivilegedHint, SampleMeta, Stage};
use crate::agents::{describe_relation, Agent, EpisodeContext, PrivilegedView, SubStep};
use crate::env::{hit_test, round_half_up, Action, CursorState};
use crate::protocol::{
    build_action_prompt, build_reasoning_prompt, initial_observation, parse_action_cell,
    serialize_action_cell, texts, Formulation, Part, RunConfig, THINK_CLOSE, THINK_OPEN,
};
use crate::raster::composite_cursor;
use crate::rng;
use crate::synthetic::{generate_task, place_cursor, render_page, GenError, GenSpec, GeneratedTask};

const STAGE1_STREAM: u64 = 0x7374_6731;
const MAX_PLACEMENTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Config {
    pub gen: GenSpec,
    /// When set, each sample is a click case with this probability (cursor
    /// uniform inside the target) and otherwise a move case (cursor drawn
    /// from the distance range, outside the target). When unset the cursor
    /// is the generator's placement and the label follows from it.
    #[serde(default)]
    pub click_fraction: Option<f64>,
    #[serde(default)]
    pub formulation: Formulation,
}

impl Stage1Config {
    /// Labels follow from the generator's cursor placement.
    pub fn new(gen: GenSpec) -> Self {
        Self {
            gen,
            click_fraction: None,
            formulation: Formulation::Simplified,
        }
    }

    /// Half click cases, half move cases.
    pub fn balanced(gen: GenSpec) -> Self {
        Self {
            click_fraction: Some(0.5),
            ..Self::new(gen)
        }
    }
}

fn whole_pixel(c: CursorState) -> (f64, f64) {
    (round_half_up(c.x) as f64, round_half_up(c.y) as f64)
}

/// Canonical teacher answer: a think block describing the cursor-target
/// relation followed by the single call realizing the label.
pub(crate) fn canonical_output(cursor: (f64, f64), hint: &PrivilegedHint, label: &str) -> String {
    let thought = describe_relation(&CursorState::new(cursor.0, cursor.1), &hint.target_bbox, label);
    format!(
        "{THINK_OPEN}{thought}{THINK_CLOSE}\n{}",
        serialize_action_cell(&hint.correct_action)
    )
}

/// Draws the task and cursor of sample `index` without rendering anything.
pub fn plan_stage1_sample(config: &Stage1Config, index: u64) -> Result<(GeneratedTask, (f64, f64)), DistillError> {
    let g = generate_task(&config.gen, index)?;
    let bbox = g.task.target_bbox;
    let cursor = match config.click_fraction {
        None => whole_pixel(g.initial_cursor),
        Some(frac) => {
            let mut r = rng::stream(config.gen.seed, &[STAGE1_STREAM, index]);
            if r.random_bool(frac.clamp(0.0, 1.0)) {
                let x = r.random_range(bbox.x..bbox.right());
                let y = r.random_range(bbox.y..bbox.bottom());
                (x as f64, y as f64)
            } else {
                let center = bbox.center();
                (0..MAX_PLACEMENTS)
                    .filter_map(|_| place_cursor(&mut r, &config.gen, center))
                    .map(whole_pixel)
                    .find(|p| !hit_test(&bbox, *p) && config.gen.viewport.contains(p.0, p.1))
                    .ok_or(GenError::GenerationFailed {
                        index,
                        attempts: MAX_PLACEMENTS,
                    })?
            }
        }
    };
    Ok((g, cursor))
}

fn build_sample(config: &Stage1Config, run: &RunConfig, index: u64) -> Result<DistillSample, DistillError> {
    let (g, cursor) = plan_stage1_sample(config, index)?;
    let (page, _) = render_page(&g.layout);
    let shot = composite_cursor(&page, &CursorState::new(cursor.0, cursor.1)).to_png()?;
    let observation = initial_observation(shot);
    let student = build_reasoning_prompt(&g.task, run, &observation, &[]);
    let hint = PrivilegedHint::new(cursor, g.task.target_bbox);
    let mut teacher = student.clone();
    teacher[1].parts.push(Part::Text(hint.text()));
    Ok(DistillSample {
        stage: Stage::One,
        teacher_messages: teacher,
        student_messages: student,
        target_output: canonical_output(cursor, &hint, &g.task.target_text),
        meta: SampleMeta {
            task_id: g.task.task_id.clone(),
            step: 0,
            seed: config.gen.seed,
            hint: Some(hint),
            target_text: g.task.target_text.clone(),
            prompt_version: texts().version.clone(),
        },
    })
}

/// Builds `count` Stage-1 samples. The teacher prompt carries the hint as
/// an extra text part in the task message; the student prompt is identical
/// without that part. Samples are built in parallel; the result does not
/// depend on the thread count.
pub fn gen_stage1_samples(config: &Stage1Config, count: u64) -> Result<Vec<DistillSample>, DistillError> {
    let run = RunConfig {
        trace_visible: false,
        guidance_present: true,
        formulation: config.formulation,
        step_quota: 1,
        repetitions: 1,
        seed: config.gen.seed,
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()) as u64;
    let chunk = count.div_ceil(threads.max(1)).max(1);
    let parts: Vec<Result<Vec<DistillSample>, DistillError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .step_by(chunk as usize)
            .map(|start| {
                let run = &run;
                scope.spawn(move || {
                    (start..(start + chunk).min(count))
                        .map(|i| build_sample(config, run, i))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sample worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(count as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn query_action(agent: &mut dyn Agent, sample: &DistillSample, hint: &PrivilegedHint) -> Option<Action> {
    let mut view = PrivilegedView {
        target_bbox: hint.target_bbox,
        cursor: CursorState::new(hint.cursor.0, hint.cursor.1),
        step: 0,
        substep: SubStep::Reasoning,
    };
    agent.begin_episode(&EpisodeContext {
        task_id: &sample.meta.task_id,
        target_text: &sample.meta.target_text,
        episode_seed: rng::derive_seed(sample.meta.seed, &[STAGE1_STREAM]),
    });
    agent.observe(&view);
    let reasoning = agent.respond(&sample.student_messages).ok()?;
    if let Ok(a) = parse_action_cell(&reasoning) {
        return Some(a);
    }
    view.substep = SubStep::Action;
    agent.observe(&view);
    let reply = agent
        .respond(&build_action_prompt(&sample.student_messages, &reasoning))
        .ok()?;
    parse_action_cell(&reply).ok()
}

/// Fraction of samples where the agent picks the labelled variant (move or
/// click); move coordinates are not scored. Unparseable replies count as wrong.
pub fn eval_move_or_click(agent: &mut dyn Agent, samples: &[DistillSample]) -> f64 {
    let scored: Vec<bool> = samples
        .iter()
        .filter_map(|s| {
            let hint = s.meta.hint?;
            let expected = label_action(hint.cursor, &hint.target_bbox);
            Some(match query_action(agent, s, &hint) {
                Some(a) => a.is_click() == expected.is_click(),
                None => false,
            })
        })
        .collect();
    if scored.is_empty() {
        return 0.0;
    }
    scored.iter().filter(|&&ok| ok).count() as f64 / scored.len() as f64
}
