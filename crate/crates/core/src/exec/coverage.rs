// SPDX-License-Identifier: Apache-2.0

//! Branch-pair coverage with AFL-style hit-count buckets.

use std::collections::HashMap;
use std::fmt;

use super::ExecutionTrace;
use crate::dsl::BranchEdge;

/// Edge id used as the predecessor of the first decision of a run.
pub const ENTRY_EDGE: u32 = u32::MAX;

/// Ordered pair of consecutively resolved edges, by [`BranchEdge::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub prev: u32,
    pub cur: u32,
}

/// One of the 8 hit-count classes {1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bucket(pub u8);

impl Bucket {
    pub fn mask(self) -> u8 {
        1 << self.0
    }

    pub fn label(self) -> &'static str {
        ["1", "2", "3", "4-7", "8-15", "16-31", "32-127", "128+"][self.0 as usize]
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps a nonzero run-local hit count to its bucket.
pub fn bucket_of(count: u64) -> Bucket {
    Bucket(match count {
        0 | 1 => 0,
        2 => 1,
        3 => 2,
        4..=7 => 3,
        8..=15 => 4,
        16..=31 => 5,
        32..=127 => 6,
        _ => 7,
    })
}

/// Coverage touched by a single run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageDelta {
    /// Sorted by key.
    pub pairs: Vec<(PairKey, Bucket)>,
    /// Edge index and run-local hit count, sorted by edge.
    pub edges: Vec<(u32, u64)>,
}

impl CoverageDelta {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn coverage_of(trace: &ExecutionTrace) -> CoverageDelta {
    let mut pairs: HashMap<PairKey, u64> = HashMap::new();
    let mut edges: HashMap<u32, u64> = HashMap::new();
    let mut prev = ENTRY_EDGE;
    for d in &trace.decisions {
        let cur = d.edge().index() as u32;
        *pairs.entry(PairKey { prev, cur }).or_default() += 1;
        *edges.entry(cur).or_default() += 1;
        prev = cur;
    }
    let mut pairs: Vec<(PairKey, Bucket)> = pairs.into_iter().map(|(k, n)| (k, bucket_of(n))).collect();
    pairs.sort_unstable();
    let mut edges: Vec<(u32, u64)> = edges.into_iter().collect();
    edges.sort_unstable();
    CoverageDelta { pairs, edges }
}

/// Campaign-wide coverage ledger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    buckets: HashMap<PairKey, u8>,
    edge_hits: Vec<u64>,
}

impl CoverageMap {
    pub fn new(edge_count: usize) -> Self {
        CoverageMap {
            buckets: HashMap::new(),
            edge_hits: vec![0; edge_count],
        }
    }

    /// Number of distinct branch-pair keys seen.
    pub fn pair_count(&self) -> usize {
        self.buckets.len()
    }

    /// Bucket bit set recorded for `key`.
    pub fn buckets_of(&self, key: PairKey) -> u8 {
        self.buckets.get(&key).copied().unwrap_or(0)
    }

    pub fn edge_hits(&self, edge: BranchEdge) -> u64 {
        self.edge_hits.get(edge.index()).copied().unwrap_or(0)
    }

    pub fn is_covered(&self, edge: BranchEdge) -> bool {
        self.edge_hits(edge) > 0
    }

    pub fn covered_edges(&self) -> usize {
        self.edge_hits.iter().filter(|h| **h > 0).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_hits.len()
    }

    /// Branch coverage in percent; a design without edges is fully covered.
    pub fn coverage_pct(&self) -> f64 {
        coverage_pct(self.covered_edges(), self.edge_count())
    }

    /// True if merging `delta` would add a new (key, bucket) pair.
    pub fn would_be_novel(&self, delta: &CoverageDelta) -> bool {
        delta.pairs.iter().any(|(k, b)| self.buckets_of(*k) & b.mask() == 0)
    }
}

pub fn coverage_pct(covered: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        covered as f64 * 100.0 / total as f64
    }
}

/// Folds `delta` into `global` and reports whether any (key, bucket) was new.
pub fn merge_coverage(global: &mut CoverageMap, delta: &CoverageDelta) -> bool {
    let mut novel = false;
    for (k, b) in &delta.pairs {
        let slot = global.buckets.entry(*k).or_insert(0);
        if *slot & b.mask() == 0 {
            *slot |= b.mask();
            novel = true;
        }
    }
    for (e, n) in &delta.edges {
        if let Some(h) = global.edge_hits.get_mut(*e as usize) {
            *h += n;
        }
    }
    novel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::BranchId;
    use crate::exec::{Decision, OutputTrace};
    use proptest::prelude::*;

    fn trace(ds: &[(u32, bool)]) -> ExecutionTrace {
        ExecutionTrace {
            decisions: ds
                .iter()
                .map(|(b, t)| Decision {
                    branch: BranchId(*b),
                    taken: *t,
                })
                .collect(),
            outputs: OutputTrace::default(),
            steps_used: 0,
            fault: None,
            input_exhausted: false,
        }
    }

    fn e(b: u32, t: bool) -> u32 {
        BranchEdge::new(BranchId(b), t).index() as u32
    }

    #[test]
    fn bucket_table() {
        let got: Vec<u8> = [1, 2, 3, 4, 7, 8, 15, 16, 31, 32, 127, 128, 9999]
            .iter()
            .map(|n| bucket_of(*n).0)
            .collect();
        assert_eq!(got, vec![0, 1, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7]);
    }

    #[test]
    fn pairs_include_entry_edge() {
        let d = coverage_of(&trace(&[(0, true), (1, false)]));
        let entry = PairKey {
            prev: ENTRY_EDGE,
            cur: e(0, true),
        };
        let second = PairKey {
            prev: e(0, true),
            cur: e(1, false),
        };
        assert_eq!(d.pairs.len(), 2);
        assert!(d.pairs.contains(&(entry, Bucket(0))));
        assert!(d.pairs.contains(&(second, Bucket(0))));
        assert!(coverage_of(&trace(&[])).is_empty());
    }

    #[test]
    fn consecutive_loop_pairs_are_bucketed() {
        let d = coverage_of(&trace(&[(1, true); 5]));
        let key = PairKey {
            prev: e(1, true),
            cur: e(1, true),
        };
        assert!(d.pairs.contains(&(key, bucket_of(4))));
        assert_eq!(bucket_of(4).label(), "4-7");
    }

    #[test]
    fn merge_reports_novelty_once() {
        let mut g = CoverageMap::new(4);
        let d = coverage_of(&trace(&[(0, true), (1, false)]));
        assert!(merge_coverage(&mut g, &d));
        assert!(!merge_coverage(&mut g, &d));
        assert_eq!(g.covered_edges(), 2);
        assert_eq!(g.coverage_pct(), 50.0);
    }

    #[test]
    fn higher_bucket_is_novel() {
        let mut g = CoverageMap::new(4);
        merge_coverage(&mut g, &coverage_of(&trace(&[(1, true), (1, true)])));
        let more = coverage_of(&trace(&[(1, true); 6]));
        assert!(merge_coverage(&mut g, &more));
    }

    #[test]
    fn zero_edge_design_is_fully_covered() {
        assert_eq!(CoverageMap::new(0).coverage_pct(), 100.0);
    }

    proptest! {
        #[test]
        fn one_pair_per_decision(ds in proptest::collection::vec((0u32..3, any::<bool>()), 0..40)) {
            let d = coverage_of(&trace(&ds));
            let total: u64 = d.edges.iter().map(|(_, n)| n).sum();
            prop_assert_eq!(total as usize, ds.len());
            let mut g = CoverageMap::new(6);
            let before = g.covered_edges();
            merge_coverage(&mut g, &d);
            prop_assert!(g.covered_edges() >= before);
            prop_assert!(!merge_coverage(&mut g, &d));
        }
    }
}
