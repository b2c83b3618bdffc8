use serde::{Deserialize, Serialize};

use super::{DistillError, DistillSample, SampleMeta, Stage};
use crate::agents::Agent;
use crate::backend::PageBackend;
use crate::env::TaskSpec;
use crate::protocol::{build_reasoning_prompt, texts, Formulation, RunConfig};
use crate::runner::{episode_seed, initial_cursor_for, run_episode_traced, EpisodeSetup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Config {
    #[serde(default)]
    pub formulation: Formulation,
    pub step_quota: u32,
    pub repetitions: u32,
    pub seed: u64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            formulation: Formulation::Simplified,
            step_quota: 5,
            repetitions: 1,
            seed: 0,
        }
    }
}

impl Stage2Config {
    /// The teacher runs with the trace hidden and guidance present.
    pub fn teacher_config(&self) -> RunConfig {
        RunConfig {
            trace_visible: false,
            guidance_present: true,
            formulation: self.formulation,
            step_quota: self.step_quota,
            repetitions: self.repetitions,
            seed: self.seed,
        }
    }

    /// The student sees its own trace but no guidance block.
    pub fn student_config(&self) -> RunConfig {
        RunConfig {
            trace_visible: true,
            guidance_present: false,
            ..self.teacher_config()
        }
    }
}

/// Runs the teacher over `tasks` and turns every step of each successful
/// episode into one sample. Steps whose reasoning failed to parse have no
/// action reply and are still kept, so the student learns the format too.
pub fn collect_stage2(
    backend: &mut dyn PageBackend,
    teacher: &mut dyn Agent,
    tasks: &[TaskSpec],
    config: &Stage2Config,
) -> Result<Vec<DistillSample>, DistillError> {
    let teacher_cfg = config.teacher_config();
    let student_cfg = config.student_config();
    teacher_cfg.validate().map_err(crate::runner::RunError::Config)?;
    let viewport = backend.viewport();
    let mut out = Vec::new();
    for (index, task) in tasks.iter().enumerate() {
        let task_index = index as u64;
        if !backend.load(task).map_err(crate::runner::RunError::from)?.is_ok() {
            continue;
        }
        for rep in 0..config.repetitions {
            let seed = episode_seed(config.seed, task_index, rep);
            let setup = EpisodeSetup {
                task,
                task_index,
                repetition: rep,
                episode_seed: seed,
                initial_cursor: initial_cursor_for(seed, viewport),
            };
            let trace = run_episode_traced(backend, teacher, &teacher_cfg, &setup, true)?;
            if !trace.record.success {
                continue;
            }
            for (t, step) in trace.steps.iter().enumerate() {
                let student = build_reasoning_prompt(
                    task,
                    &student_cfg,
                    &step.observation,
                    &trace.record.turns[..t],
                );
                let target_output = match &step.action_reply {
                    Some(a) => format!("{}\n{}", step.reasoning_reply, a),
                    None => step.reasoning_reply.clone(),
                };
                out.push(DistillSample {
                    stage: Stage::Two,
                    teacher_messages: step.reasoning_messages.clone(),
                    student_messages: student,
                    target_output,
                    meta: SampleMeta {
                        task_id: task.task_id.clone(),
                        step: t as u32,
                        seed,
                        hint: None,
                        target_text: task.target_text.clone(),
                        prompt_version: texts().version.clone(),
                    },
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{CorrectingOracleAgent, OracleAgent, PrematureClickerAgent};
    use crate::env::Viewport;
    use crate::protocol::{texts, Part, Role};
    use crate::synthetic::{generate_tasks, GenSpec, SyntheticBackend};

    fn tasks(n: u64) -> Vec<TaskSpec> {
        generate_tasks(&GenSpec { seed: 5, ..GenSpec::default() }, n)
            .unwrap()
            .into_iter()
            .map(|g| g.task)
            .collect()
    }

    #[test]
    fn oracle_episodes_yield_one_sample_per_step() {
        let mut backend = SyntheticBackend::new(Viewport::default());
        let ts = tasks(6);
        let samples = collect_stage2(&mut backend, &mut OracleAgent::new(), &ts, &Stage2Config::default()).unwrap();
        assert!(samples.len() >= ts.len());
        let guidance = &texts().guidance;
        for s in &samples {
            assert_eq!(s.stage, Stage::Two);
            let has_guidance = |ms: &[crate::protocol::Message]| {
                ms.iter().flat_map(|m| &m.parts).any(|p| matches!(p, Part::Text(t) if t == guidance))
            };
            assert!(has_guidance(&s.teacher_messages));
            assert!(!has_guidance(&s.student_messages));
            let assistant = s.student_messages.iter().filter(|m| m.role == Role::Assistant).count();
            assert_eq!(assistant as u32, s.meta.step);
            assert!(s.target_output.contains("</ipython_cell>"));
        }
    }

    #[test]
    fn failed_episodes_are_dropped() {
        let mut backend = SyntheticBackend::new(Viewport::default());
        let ts = tasks(6);
        let premature = collect_stage2(&mut backend, &mut PrematureClickerAgent::new(), &ts, &Stage2Config::default()).unwrap();
        // a premature click only succeeds when the initial cursor happens to be on target
        assert!(premature.iter().all(|s| s.meta.step == 0));
        let correcting = collect_stage2(
            &mut backend,
            &mut CorrectingOracleAgent::new(40.0, 3),
            &ts,
            &Stage2Config::default(),
        )
        .unwrap();
        assert!(!correcting.is_empty());
    }
}
