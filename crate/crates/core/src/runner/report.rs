use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::benchmark::ExclusionRecord;
use super::episode::EpisodeRecord;
use super::metrics::{aggregate, ConfigKey, MetricsReport};
use super::RunError;
use crate::jsonl::read_jsonl;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const EXCLUSIONS_FILE: &str = "exclusions.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub markdown: PathBuf,
    pub csv: PathBuf,
    pub task_scores: PathBuf,
    pub report: MetricsReport,
}

/// Reads `records.jsonl` and (if present) `exclusions.jsonl` from a run directory.
pub fn load_run(dir: &Path) -> Result<(Vec<EpisodeRecord>, Vec<ExclusionRecord>), RunError> {
    let records = read_jsonl(&dir.join(RECORDS_FILE))?;
    let excl_path = dir.join(EXCLUSIONS_FILE);
    let exclusions = if excl_path.exists() {
        read_jsonl(&excl_path)?
    } else {
        Vec::new()
    };
    Ok((records, exclusions))
}

fn onoff(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn formulation(key: &ConfigKey) -> &'static str {
    if key.humanlike {
        "humanlike"
    } else {
        "simplified"
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

fn markdown(report: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Single-click benchmark report\n");
    let _ = writeln!(
        s,
        "Tasks: {} (excluded: {}); episodes: {}; infrastructure failures: {} (not scored)\n",
        report.n_tasks, report.n_excluded, report.n_episodes, report.n_infra_failures
    );
    let _ = writeln!(s, "## Success rate (95% normal half-width)\n");
    let _ = writeln!(s, "| Interaction trace | Behavioral guidance | Formulation | Episodes | Success | ± |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for row in &report.breakdown {
        let (rate, hw) = row
            .success
            .map(|c| (format!("{:.2}", c.rate), format!("{:.2}", c.halfwidth)))
            .unwrap_or_else(|| ("n/a".into(), "n/a".into()));
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {rate} | {hw} |",
            onoff(row.key.trace_visible),
            onoff(row.key.guidance_present),
            formulation(&row.key),
            row.n_episodes
        );
    }
    let _ = writeln!(s, "\n## Closed-loop correction rate (95% Clopper-Pearson)\n");
    let _ = writeln!(s, "| Interaction trace | Behavioral guidance | Formulation | Inaccurate first moves | R_corr | CI |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for row in &report.breakdown {
        let (den, rate, ci) = match row.r_corr {
            Some(c) => (
                c.inaccurate_first_moves.to_string(),
                pct(c.rate),
                format!("{}–{}", pct(c.ci.0), pct(c.ci.1)),
            ),
            None => ("0".into(), "undefined".into(), "–".into()),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {den} | {rate} | {ci} |",
            onoff(row.key.trace_visible),
            onoff(row.key.guidance_present),
            formulation(&row.key),
        );
    }
    let _ = writeln!(
        s,
        "\nR_corr is conditional: its denominator counts only episodes whose first move landed outside the target box."
    );
    s
}

fn write_csv(path: &Path, report: &MetricsReport) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::Io(e.into()))?;
    let header = [
        "trace", "guidance", "formulation", "episodes", "infra_failures", "successes", "scored",
        "success_rate", "halfwidth", "r_corr_num", "r_corr_den", "r_corr", "r_corr_lo", "r_corr_hi",
    ];
    w.write_record(header).map_err(|e| RunError::Io(e.into()))?;
    for row in &report.breakdown {
        let (k, n, rate, hw) = row
            .success
            .map(|c| (c.successes.to_string(), c.n.to_string(), c.rate.to_string(), c.halfwidth.to_string()))
            .unwrap_or_default();
        let (cn, cd, cr, lo, hi) = row
            .r_corr
            .map(|c| {
                (
                    c.corrected.to_string(),
                    c.inaccurate_first_moves.to_string(),
                    c.rate.to_string(),
                    c.ci.0.to_string(),
                    c.ci.1.to_string(),
                )
            })
            .unwrap_or_else(|| ("0".into(), "0".into(), String::new(), String::new(), String::new()));
        w.write_record([
            onoff(row.key.trace_visible).to_string(),
            onoff(row.key.guidance_present).to_string(),
            formulation(&row.key).to_string(),
            row.n_episodes.to_string(),
            row.n_infra_failures.to_string(),
            k,
            n,
            rate,
            hw,
            cn,
            cd,
            cr,
            lo,
            hi,
        ])
        .map_err(|e| RunError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-task success fractions, the input for a score-distribution plot.
fn write_task_scores(path: &Path, records: &[EpisodeRecord]) -> Result<(), RunError> {
    let mut per_task: BTreeMap<(ConfigKey, &str), (u64, u64)> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.infra_failure) {
        let e = per_task.entry((ConfigKey::from(&r.config), r.task_id.as_str())).or_default();
        e.0 += r.success as u64;
        e.1 += 1;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::Io(e.into()))?;
    w.write_record(["task_id", "trace", "guidance", "formulation", "successes", "episodes", "rate"])
        .map_err(|e| RunError::Io(e.into()))?;
    for ((key, task), (k, n)) in per_task {
        w.write_record([
            task.to_string(),
            onoff(key.trace_visible).to_string(),
            onoff(key.guidance_present).to_string(),
            formulation(&key).to_string(),
            k.to_string(),
            n.to_string(),
            (k as f64 / n as f64).to_string(),
        ])
        .map_err(|e| RunError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.md`, `report.csv` and `task_scores.csv` into `out_dir`.
pub fn emit_report(
    records: &[EpisodeRecord],
    exclusions: &[ExclusionRecord],
    out_dir: &Path,
) -> Result<ReportFiles, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let report = aggregate(records, exclusions.len() as u64);
    let files = ReportFiles {
        markdown: out_dir.join("report.md"),
        csv: out_dir.join("report.csv"),
        task_scores: out_dir.join("task_scores.csv"),
        report,
    };
    std::fs::write(&files.markdown, markdown(&files.report))?;
    write_csv(&files.csv, &files.report)?;
    write_task_scores(&files.task_scores, records)?;
    Ok(files)
}
