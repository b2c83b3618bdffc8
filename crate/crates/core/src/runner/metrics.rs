use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::episode::EpisodeRecord;
use super::stats::{correction_rate_counts, success_rate_ci, CorrectionRate, RateCi, StatsError};
use crate::protocol::{Formulation, RunConfig};

fn scored(records: &[EpisodeRecord]) -> impl Iterator<Item = &EpisodeRecord> {
    records.iter().filter(|r| !r.infra_failure)
}

/// Success rate over non-infrastructure episodes with its normal 95% half-width.
pub fn success_rate(records: &[EpisodeRecord]) -> Result<RateCi, StatsError> {
    let (k, n) = scored(records).fold((0u64, 0u64), |(k, n), r| (k + r.success as u64, n + 1));
    success_rate_ci(k, n)
}

/// Among episodes whose first move landed outside the target, the fraction
/// that still ended in a successful click.
pub fn correction_rate(records: &[EpisodeRecord]) -> Result<CorrectionRate, StatsError> {
    let (k, n) = scored(records)
        .filter(|r| r.first_move_outside)
        .fold((0u64, 0u64), |(k, n), r| (k + r.success as u64, n + 1));
    correction_rate_counts(k, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigKey {
    pub trace_visible: bool,
    pub guidance_present: bool,
    pub humanlike: bool,
}

impl From<&RunConfig> for ConfigKey {
    fn from(c: &RunConfig) -> Self {
        Self {
            trace_visible: c.trace_visible,
            guidance_present: c.guidance_present,
            humanlike: c.formulation == Formulation::HumanLike,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRow {
    pub key: ConfigKey,
    pub n_episodes: u64,
    pub n_infra_failures: u64,
    pub success: Option<RateCi>,
    pub r_corr: Option<CorrectionRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_tasks: u64,
    pub n_episodes: u64,
    pub n_excluded: u64,
    pub n_infra_failures: u64,
    pub success: Option<RateCi>,
    pub r_corr: Option<CorrectionRate>,
    pub breakdown: Vec<ConfigRow>,
}

/// Aggregates records into report numbers. The result does not depend on
/// record order.
pub fn aggregate(records: &[EpisodeRecord], n_excluded: u64) -> MetricsReport {
    let mut groups: BTreeMap<ConfigKey, Vec<EpisodeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(ConfigKey::from(&r.config)).or_default().push(r.clone());
    }
    let breakdown = groups
        .into_iter()
        .map(|(key, rs)| ConfigRow {
            key,
            n_episodes: rs.len() as u64,
            n_infra_failures: rs.iter().filter(|r| r.infra_failure).count() as u64,
            success: success_rate(&rs).ok(),
            r_corr: correction_rate(&rs).ok(),
        })
        .collect();
    let tasks: BTreeSet<&str> = records.iter().map(|r| r.task_id.as_str()).collect();
    MetricsReport {
        n_tasks: tasks.len() as u64 + n_excluded,
        n_episodes: records.len() as u64,
        n_excluded,
        n_infra_failures: records.iter().filter(|r| r.infra_failure).count() as u64,
        success: success_rate(records).ok(),
        r_corr: correction_rate(records).ok(),
        breakdown,
    }
}
