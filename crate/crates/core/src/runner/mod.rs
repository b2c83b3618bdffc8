//! Episode loop, benchmark orchestration and the reported statistics.

mod benchmark;
mod episode;
mod metrics;
mod report;
pub mod stats;

pub use benchmark::{episode_seed, initial_cursor_for, run_benchmark, BenchmarkRun, ExclusionRecord};
pub use episode::{run_episode, run_episode_traced, EpisodeRecord, EpisodeSetup, EpisodeTrace, StepLog};
pub use metrics::{aggregate, correction_rate, success_rate, ConfigKey, ConfigRow, MetricsReport};
pub use report::{emit_report, load_run, ReportFiles, RECORDS_FILE, EXCLUSIONS_FILE};
pub use stats::{clopper_pearson, success_rate_ci, CorrectionRate, RateCi, StatsError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
