// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use super::energy::{Averages, SeedMetrics};
use crate::testcase::{encode_words, Origin, PhaseId, TestCase, TestId};

#[derive(Debug, Clone)]
pub struct QueueEntry {
    pub id: TestId,
    pub case: TestCase,
    pub metrics: SeedMetrics,
    /// Campaign time at which the entry was retained.
    pub created_at: Duration,
    /// Next deterministic child to try; equal to the stage size once done.
    pub det_progress: usize,
}

/// Append-only list of retained test cases with a round-robin cursor.
#[derive(Debug, Clone, Default)]
pub struct FuzzQueue {
    entries: Vec<QueueEntry>,
    pub cursor: usize,
    steps_sum: u128,
    bitmap_sum: u128,
}

impl FuzzQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, case: TestCase, metrics: SeedMetrics, created_at: Duration) -> TestId {
        let id = TestId(self.entries.len() as u64);
        self.steps_sum += metrics.exec_time_steps as u128;
        self.bitmap_sum += metrics.bitmap_size as u128;
        self.entries.push(QueueEntry {
            id,
            case,
            metrics,
            created_at,
            det_progress: 0,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: TestId) -> Option<&QueueEntry> {
        self.entries.get(id.0 as usize)
    }

    pub(crate) fn get_mut(&mut self, id: TestId) -> Option<&mut QueueEntry> {
        self.entries.get_mut(id.0 as usize)
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    pub fn averages(&self) -> Averages {
        let n = self.entries.len().max(1) as f64;
        Averages {
            steps: self.steps_sum as f64 / n,
            bitmap: self.bitmap_sum as f64 / n,
        }
    }

    /// Point-in-time copy of all test cases, in queue order.
    pub fn snapshot(&self) -> Vec<TestCase> {
        self.entries.iter().map(|e| e.case.clone()).collect()
    }

    /// Writes every entry as `id_<n>,src_<origin>,phase_<p>.tc` plus a JSON
    /// metrics sidecar with the same stem.
    pub fn persist(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for e in &self.entries {
            let stem = entry_file_stem(e.id, e.case.origin, e.case.phase);
            fs::write(dir.join(format!("{stem}.tc")), encode_words(&e.case.words))?;
            let side = Sidecar {
                id: e.id,
                origin: e.case.origin,
                phase: e.case.phase.label(),
                parent: e.case.parent,
                created_at_seconds: e.created_at.as_secs_f64(),
                metrics: e.metrics,
            };
            let json = serde_json::to_string_pretty(&side).map_err(io::Error::other)?;
            fs::write(dir.join(format!("{stem}.json")), json)?;
        }
        Ok(())
    }
}

pub fn entry_file_stem(id: TestId, origin: Origin, phase: PhaseId) -> String {
    format!("id_{:06},src_{},phase_{}", id.0, origin.tag(), phase)
}

#[derive(Serialize)]
struct Sidecar {
    id: TestId,
    origin: Origin,
    phase: String,
    parent: Option<TestId>,
    created_at_seconds: f64,
    metrics: SeedMetrics,
}
