// SPDX-License-Identifier: Apache-2.0

//! Coverage-guided greybox fuzzing.
//!
//! Each queue entry gets a deterministic stage on its first visit and then
//! an energy-scaled number of havoc trials per visit. Children that touch a
//! new (branch-pair, bucket) combination are appended to the queue.

mod energy;
mod mutate;
mod queue;

pub use energy::{calculate_energy, Averages, SeedMetrics, DEFAULT_K_BASE, DEFAULT_K_MAX};
pub use mutate::{
    deterministic_child, deterministic_count, interesting_values, mutate_havoc, BASE_INTERESTING, MAX_HAVOC_LEN,
};
pub use queue::{entry_file_stem, FuzzQueue, QueueEntry};

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clock::{execution_cost, Clock};
use crate::dsl::Design;
use crate::exec::{
    coverage_of, execute, merge_coverage, CoverageDelta, CoverageMap, ExecutionTrace, DEFAULT_STEP_LIMIT,
};
use crate::testcase::{Origin, PhaseId, TestCase, TestId};
use crate::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzConfig {
    pub step_limit: u64,
    pub k_base: u32,
    pub k_max: u32,
    /// Append design literals to the interesting-value table.
    pub design_literals: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            step_limit: DEFAULT_STEP_LIMIT,
            k_base: DEFAULT_K_BASE,
            k_max: DEFAULT_K_MAX,
            design_literals: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Hooks the orchestrator uses to interleave its own checks with a round.
pub trait FuzzObserver {
    /// Polled before every child execution; `true` suspends the round.
    fn should_yield(&mut self, _engine: &FuzzEngine<'_>) -> bool {
        false
    }
    /// Called for every retained child, after its coverage was merged.
    fn retained(&mut self, _entry: &QueueEntry, _trace: &ExecutionTrace, _coverage: &CoverageMap) -> Control {
        Control::Continue
    }
}

impl FuzzObserver for () {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundOutcome {
    pub new_entries: usize,
    pub last_novel_at: Option<Duration>,
    /// The entry's deterministic and havoc stages both finished.
    pub completed: bool,
}

/// Executes `child`, merges its coverage into `global` and reports novelty.
pub fn is_interesting(
    design: &Design,
    child: &TestCase,
    global: &mut CoverageMap,
    step_limit: u64,
) -> (bool, ExecutionTrace) {
    let trace = execute(design, &child.words, step_limit);
    let novel = merge_coverage(global, &coverage_of(&trace));
    (novel, trace)
}

#[derive(Debug, Clone, Copy)]
struct HavocState {
    entry: TestId,
    left: u32,
}

pub struct FuzzEngine<'d> {
    design: &'d Design,
    config: FuzzConfig,
    table: Vec<Word>,
    rng: ChaCha8Rng,
    havoc: Option<HavocState>,
    pub queue: FuzzQueue,
    pub coverage: CoverageMap,
    /// Phase stamped on newly retained children.
    pub phase: PhaseId,
    pub executions: u64,
}

impl<'d> FuzzEngine<'d> {
    pub fn new(design: &'d Design, config: FuzzConfig, rng_seed: u64) -> Self {
        FuzzEngine {
            design,
            config,
            table: interesting_values(design, config.design_literals),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            havoc: None,
            queue: FuzzQueue::new(),
            coverage: CoverageMap::new(design.edge_count()),
            phase: PhaseId::FIRST,
            executions: 0,
        }
    }

    pub fn design(&self) -> &'d Design {
        self.design
    }

    pub fn config(&self) -> &FuzzConfig {
        &self.config
    }

    /// Runs `words` on the design and charges the clock.
    pub fn run(&mut self, words: &[Word], clock: &dyn Clock) -> (ExecutionTrace, CoverageDelta) {
        let trace = execute(self.design, words, self.config.step_limit);
        self.executions += 1;
        clock.charge(execution_cost(trace.steps_used));
        let delta = coverage_of(&trace);
        (trace, delta)
    }

    /// Merges an already executed case and appends it if it is novel or
    /// `force` is set. Returns the new id when appended.
    pub fn offer(
        &mut self,
        case: TestCase,
        trace: &ExecutionTrace,
        delta: &CoverageDelta,
        force: bool,
        clock: &dyn Clock,
    ) -> Option<TestId> {
        let novel = merge_coverage(&mut self.coverage, delta);
        if !(novel || force) {
            return None;
        }
        let depth = case
            .parent
            .and_then(|p| self.queue.get(p))
            .map_or(0, |p| p.metrics.depth + 1);
        let metrics = SeedMetrics {
            exec_time_steps: trace.steps_used,
            bitmap_size: delta.pairs.len(),
            depth,
        };
        Some(self.queue.push(case, metrics, clock.now()))
    }

    /// Executes and unconditionally enqueues an initial seed.
    pub fn add_seed(&mut self, case: TestCase, clock: &dyn Clock) -> (TestId, ExecutionTrace) {
        let (trace, delta) = self.run(&case.words, clock);
        let id = self
            .offer(case, &trace, &delta, true, clock)
            .expect("forced offers always enqueue");
        (id, trace)
    }

    fn trial(
        &mut self,
        words: Vec<Word>,
        origin: Origin,
        parent: TestId,
        clock: &dyn Clock,
        obs: &mut dyn FuzzObserver,
        out: &mut RoundOutcome,
    ) -> Control {
        let (trace, delta) = self.run(&words, clock);
        let case = TestCase::new(words, origin, self.phase, Some(parent));
        match self.offer(case, &trace, &delta, false, clock) {
            Some(id) => {
                out.new_entries += 1;
                out.last_novel_at = Some(clock.now());
                let entry = self.queue.get(id).expect("just pushed");
                obs.retained(entry, &trace, &self.coverage)
            }
            None => Control::Continue,
        }
    }

    /// Processes the entry under the cursor. A round suspended by the
    /// observer resumes on the same entry next time.
    pub fn fuzz_round(&mut self, clock: &dyn Clock, obs: &mut dyn FuzzObserver) -> RoundOutcome {
        let mut out = RoundOutcome::default();
        if self.queue.is_empty() {
            return out;
        }
        let id = TestId(self.queue.cursor as u64);
        let parent = self.queue.get(id).expect("cursor in range");
        let words = parent.case.words.clone();
        let total = deterministic_count(words.len(), self.table.len());

        loop {
            let entry = self.queue.get_mut(id).expect("cursor in range");
            if entry.det_progress >= total {
                break;
            }
            if obs.should_yield(self) {
                return out;
            }
            let entry = self.queue.get_mut(id).expect("cursor in range");
            let i = entry.det_progress;
            entry.det_progress += 1;
            let child = deterministic_child(&words, &self.table, i).expect("index below count");
            if self.trial(child, Origin::FuzzDeterministic, id, clock, obs, &mut out) == Control::Stop {
                return out;
            }
        }

        if self.havoc.map(|h| h.entry) != Some(id) {
            let entry = self.queue.get(id).expect("cursor in range");
            let k = calculate_energy(
                &entry.metrics,
                &self.queue.averages(),
                self.config.k_base,
                self.config.k_max,
            );
            self.havoc = Some(HavocState { entry: id, left: k });
        }
        while let Some(h) = self.havoc.filter(|h| h.left > 0) {
            if obs.should_yield(self) {
                return out;
            }
            self.havoc = Some(HavocState { left: h.left - 1, ..h });
            let child = mutate_havoc(&words, &mut self.rng);
            if self.trial(child, Origin::FuzzHavoc, id, clock, obs, &mut out) == Control::Stop {
                return out;
            }
        }

        self.havoc = None;
        self.queue.cursor = (self.queue.cursor + 1) % self.queue.len();
        out.completed = true;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::dsl::parse_design;

    #[test]
    fn first_input_is_interesting_and_replay_is_not() {
        let d = parse_design("design d { inputs 1; if (in[0] > 3) { output(1); } }").unwrap();
        let mut g = CoverageMap::new(d.edge_count());
        let t = TestCase::seed(vec![9]);
        assert!(is_interesting(&d, &t, &mut g, 100).0);
        assert!(!is_interesting(&d, &t, &mut g, 100).0);
    }

    #[test]
    fn loop_growth_into_a_new_bucket_is_interesting() {
        let d = parse_design("design d { inputs 1; i = 0; while (i < in[0]) { i = i + 1; } }").unwrap();
        let mut g = CoverageMap::new(d.edge_count());
        is_interesting(&d, &TestCase::seed(vec![3]), &mut g, 1000);
        assert!(is_interesting(&d, &TestCase::seed(vec![9]), &mut g, 1000).0);
    }

    #[test]
    fn deterministic_stage_finds_new_edges() {
        let d = parse_design("design d { inputs 1; if (in[0] == 1) { output(1); } }").unwrap();
        let clock = VirtualClock::new();
        let mut f = FuzzEngine::new(&d, FuzzConfig::default(), 1);
        f.add_seed(TestCase::seed(vec![0]), &clock);
        let out = f.fuzz_round(&clock, &mut ());
        assert!(out.new_entries >= 1);
        assert!(out.completed);
        assert_eq!(f.coverage.coverage_pct(), 100.0);
        assert!(clock.ticks() > 0);
    }

    #[test]
    fn saturated_design_retains_nothing() {
        let d = parse_design("design d { inputs 1; output(in[0]); }").unwrap();
        let clock = VirtualClock::new();
        let mut f = FuzzEngine::new(&d, FuzzConfig::default(), 1);
        f.add_seed(TestCase::seed(vec![0]), &clock);
        let out = f.fuzz_round(&clock, &mut ());
        assert_eq!(out.new_entries, 0);
        assert_eq!(out.last_novel_at, None);
    }

    #[test]
    fn same_seed_same_queue() {
        let d = parse_design(
            "design d { inputs 2; if (in[0] < 100) { if (in[1] % 7 == 3) { output(1); } } x = next_input(); while (x != 0) { x = next_input(); } }",
        )
        .unwrap();
        let run = || {
            let clock = VirtualClock::new();
            let mut f = FuzzEngine::new(&d, FuzzConfig::default(), 99);
            f.add_seed(TestCase::seed(vec![500, 1, 4]), &clock);
            for _ in 0..6 {
                f.fuzz_round(&clock, &mut ());
            }
            f.queue.snapshot()
        };
        assert_eq!(run(), run());
    }

    struct YieldAfter(usize);

    impl FuzzObserver for YieldAfter {
        fn should_yield(&mut self, _e: &FuzzEngine<'_>) -> bool {
            if self.0 == 0 {
                return true;
            }
            self.0 -= 1;
            false
        }
    }

    #[test]
    fn suspended_round_resumes_on_the_same_entry() {
        let d = parse_design("design d { inputs 1; if (in[0] == 77) { output(1); } }").unwrap();
        let clock = VirtualClock::new();
        let mut f = FuzzEngine::new(&d, FuzzConfig::default(), 3);
        f.add_seed(TestCase::seed(vec![0]), &clock);
        f.add_seed(TestCase::seed(vec![1]), &clock);
        let out = f.fuzz_round(&clock, &mut YieldAfter(10));
        assert!(!out.completed);
        assert_eq!(f.queue.cursor, 0);
        assert_eq!(f.queue.get(TestId(0)).unwrap().det_progress, 10);
        let out = f.fuzz_round(&clock, &mut ());
        assert!(out.completed);
        assert_eq!(f.queue.cursor, 1);
    }
}
