use rand::Rng;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode_traced, EpisodeRecord, EpisodeSetup};
use super::RunError;
use crate::agents::Agent;
use crate::backend::{ExclusionVerdict, PageBackend};
use crate::env::{CursorState, TaskSpec, Viewport};
use crate::jsonl::JsonlWriter;
use crate::protocol::RunConfig;
use crate::rng;

const CURSOR_STREAM: u64 = 0x6375_7273;

/// Seed of repetition `rep` of task `task_index` under benchmark seed `seed`.
pub fn episode_seed(seed: u64, task_index: u64, rep: u32) -> u64 {
    rng::derive_seed(seed, &[task_index, rep as u64])
}

/// Uniform whole-pixel starting position for an episode.
pub fn initial_cursor_for(episode_seed: u64, viewport: Viewport) -> CursorState {
    let mut r = rng::stream(episode_seed, &[CURSOR_STREAM]);
    let x = r.random_range(0..viewport.width);
    let y = r.random_range(0..viewport.height);
    CursorState::new(x as f64, y as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionRecord {
    pub task_id: String,
    pub task_index: u64,
    pub verdict: ExclusionVerdict,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkRun {
    pub n_tasks: u64,
    pub records: Vec<EpisodeRecord>,
    pub exclusions: Vec<ExclusionRecord>,
}

impl BenchmarkRun {
    pub fn n_infra_failures(&self) -> usize {
        self.records.iter().filter(|r| r.infra_failure).count()
    }
}

/// Runs every task `config.repetitions` times. Tasks whose exclusion check
/// is not `Ok` are skipped and tallied. Records are streamed to `sink` as
/// they complete.
pub fn run_benchmark(
    backend: &mut dyn PageBackend,
    agent: &mut dyn Agent,
    tasks: &[TaskSpec],
    config: &RunConfig,
    mut sink: Option<&mut JsonlWriter>,
) -> Result<BenchmarkRun, RunError> {
    config.validate().map_err(RunError::Config)?;
    let viewport = backend.viewport();
    let mut run = BenchmarkRun {
        n_tasks: tasks.len() as u64,
        ..BenchmarkRun::default()
    };
    for (index, task) in tasks.iter().enumerate() {
        let task_index = index as u64;
        let verdict = backend.load(task)?;
        if !verdict.is_ok() {
            run.exclusions.push(ExclusionRecord {
                task_id: task.task_id.clone(),
                task_index,
                verdict,
            });
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
            let record = run_episode_traced(backend, agent, config, &setup, false)?.record;
            if let Some(w) = sink.as_deref_mut() {
                w.write(&record)?;
            }
            run.records.push(record);
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_stream_is_stable_and_in_viewport() {
        let vp = Viewport::new(50, 30).unwrap();
        for i in 0..200 {
            let c = initial_cursor_for(episode_seed(1, i, 0), vp);
            assert!(vp.contains(c.x, c.y));
            assert_eq!(c, initial_cursor_for(episode_seed(1, i, 0), vp));
        }
        assert_ne!(episode_seed(1, 0, 1), episode_seed(1, 1, 0));
    }
}
