// SPDX-License-Identifier: Apache-2.0

//! Campaign reports, timeline CSV and cross-mode comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concolic::ConcolicStats;
use crate::detector::Witness;
use crate::orchestrator::{Goal, Mode};

pub const SCHEMA_VERSION: u32 = 1;

/// Placeholder for cells with no report.
pub const MISSING: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "DETECTED")]
    Detected,
    #[serde(rename = "COVERED")]
    Covered,
    /// Cutoff reached before the goal.
    #[serde(rename = "TO")]
    Timeout,
    /// Concolic-only run with nothing left to try.
    #[serde(rename = "EXHAUSTED")]
    Exhausted,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Detected => "DETECTED",
            Outcome::Covered => "COVERED",
            Outcome::Timeout => "TO",
            Outcome::Exhausted => "EXHAUSTED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub time_cutoff_seconds: f64,
    pub time_threshold_seconds: f64,
    pub time_budget_seconds: f64,
    pub step_limit: u64,
    pub k_base: u32,
    pub k_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phase: String,
    pub tests_generated: usize,
    pub start_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSample {
    pub t_seconds: f64,
    pub coverage_pct: f64,
    pub phase: String,
}

/// Host wall-clock stamps; the only nondeterministic part of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema: u32,
    pub design: String,
    pub mode: Mode,
    pub goal: Goal,
    pub rng_seed: u64,
    pub virtual_clock: bool,
    pub config: ConfigEcho,
    pub outcome: Outcome,
    pub detected: bool,
    pub witness: Option<Witness>,
    /// Recomputed by replaying the final queue.
    pub branch_coverage_pct: f64,
    /// Tracked by the fuzzer's map during the run.
    pub incremental_coverage_pct: f64,
    pub covered_edges: usize,
    pub total_edges: usize,
    pub total_tests: usize,
    pub total_seconds: f64,
    pub executions: u64,
    #[serde(default)]
    pub golden_unavailable: u64,
    pub phases: Vec<PhaseRow>,
    pub timeline: Vec<TimelineSample>,
    #[serde(default)]
    pub concolic: ConcolicStats,
    #[serde(default)]
    pub timestamps: Timestamps,
}

impl CampaignReport {
    /// Phase labels joined with `-`, e.g. `fuzz_1-conc_1-fuzz_2`.
    pub fn phase_sequence(&self) -> String {
        self.phases
            .iter()
            .map(|p| p.phase.as_str())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// Tests generated during the campaign, seeds excluded.
    pub fn tests_generated(&self) -> usize {
        self.phases.iter().map(|p| p.tests_generated).sum()
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported report schema {found}")]
    Schema { path: PathBuf, found: u32 },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate report for benchmark `{benchmark}` in mode {mode}")]
    DuplicateCell { benchmark: String, mode: Mode },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

pub fn report_json(report: &CampaignReport) -> String {
    serde_json::to_string_pretty(report).expect("reports always serialize")
}

pub fn emit_report(report: &CampaignReport, path: &Path) -> Result<(), ReportError> {
    let mut text = report_json(report);
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn parse_report(text: &str, path: &Path) -> Result<CampaignReport, ReportError> {
    let r: CampaignReport = serde_json::from_str(text).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if r.schema == 0 || r.schema > SCHEMA_VERSION {
        return Err(ReportError::Schema {
            path: path.to_path_buf(),
            found: r.schema,
        });
    }
    Ok(r)
}

pub fn read_report(path: &Path) -> Result<CampaignReport, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_report(&text, path)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn timeline_csv(samples: &[TimelineSample]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_seconds", "coverage_pct", "phase"])?;
    for s in samples {
        w.write_record([s.t_seconds.to_string(), s.coverage_pct.to_string(), s.phase.clone()])?;
    }
    finish_csv(w)
}

pub fn emit_timeline(samples: &[TimelineSample], path: &Path) -> Result<(), ReportError> {
    write_atomic(path, timeline_csv(samples)?.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub tests_generated: usize,
    pub seconds: f64,
    pub coverage_pct: f64,
    pub detected: bool,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub benchmark: String,
    pub mode: Mode,
    pub cell: Option<Cell>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

const HEADER: [&str; 7] = [
    "benchmark",
    "mode",
    "tests_generated",
    "seconds",
    "coverage_pct",
    "detected",
    "outcome",
];

/// One row per (benchmark, mode) over every benchmark and mode present;
/// rows are ordered by benchmark name, then fuce, fuzz, concolic.
pub fn build_comparison(reports: &[CampaignReport]) -> Result<ComparisonTable, ReportError> {
    let mut cells: BTreeMap<(String, Mode), Cell> = BTreeMap::new();
    let mut modes = BTreeSet::new();
    let mut benchmarks = BTreeSet::new();
    for r in reports {
        let cell = Cell {
            tests_generated: r.tests_generated(),
            seconds: r.total_seconds,
            coverage_pct: r.branch_coverage_pct,
            detected: r.detected,
            outcome: r.outcome,
        };
        if cells.insert((r.design.clone(), r.mode), cell).is_some() {
            return Err(ReportError::DuplicateCell {
                benchmark: r.design.clone(),
                mode: r.mode,
            });
        }
        modes.insert(r.mode);
        benchmarks.insert(r.design.clone());
    }
    let mut rows = Vec::new();
    for b in &benchmarks {
        for m in &modes {
            rows.push(ComparisonRow {
                benchmark: b.clone(),
                mode: *m,
                cell: cells.remove(&(b.clone(), *m)),
            });
        }
    }
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    fn records(&self) -> Vec<[String; 7]> {
        self.rows
            .iter()
            .map(|r| match &r.cell {
                Some(c) => [
                    r.benchmark.clone(),
                    r.mode.to_string(),
                    c.tests_generated.to_string(),
                    format!("{:.3}", c.seconds),
                    format!("{:.2}", c.coverage_pct),
                    c.detected.to_string(),
                    c.outcome.as_str().to_string(),
                ],
                None => [
                    r.benchmark.clone(),
                    r.mode.to_string(),
                    MISSING.into(),
                    MISSING.into(),
                    MISSING.into(),
                    MISSING.into(),
                    MISSING.into(),
                ],
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for rec in self.records() {
            w.write_record(&rec)?;
        }
        finish_csv(w)
    }

    /// Column-aligned plain text.
    pub fn to_text(&self) -> String {
        let recs = self.records();
        let mut widths = HEADER.map(str::len);
        for r in &recs {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&HEADER.map(String::from));
        for r in &recs {
            line(r);
        }
        out
    }
}
