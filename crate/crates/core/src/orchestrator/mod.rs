// SPDX-License-Identifier: Apache-2.0

//! Campaign loop: fuzz until the queue stops growing, hand the queue to the
//! concolic engine for a bounded phase, feed its tests back, repeat.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{execution_cost, Clock};
use crate::concolic::{ConcolicEngine, ConcolicOutcome, Emission, ExecutionTree};
use crate::detector::{check_trace, GoldenModel, Witness};
use crate::dsl::{BranchEdge, Design};
use crate::exec::{coverage_of, merge_coverage, CoverageMap, ExecutionTrace, DEFAULT_STEP_LIMIT};
use crate::fuzz::{
    Control, FuzzConfig, FuzzEngine, FuzzObserver, FuzzQueue, QueueEntry, DEFAULT_K_BASE, DEFAULT_K_MAX,
};
use crate::report::{CampaignReport, ConfigEcho, Outcome, PhaseRow, TimelineSample, Timestamps, SCHEMA_VERSION};
use crate::testcase::{PhaseId, PhaseKind, TestCase, TestId};
use crate::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fuce,
    Fuzz,
    Concolic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Fuce, Mode::Fuzz, Mode::Concolic];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fuce => "fuce",
            Mode::Fuzz => "fuzz",
            Mode::Concolic => "concolic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fuce" => Ok(Mode::Fuce),
            "fuzz" | "fuzz-only" => Ok(Mode::Fuzz),
            "concolic" | "concolic-only" => Ok(Mode::Concolic),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    Detect,
    Coverage,
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Goal::Detect => "detect",
            Goal::Coverage => "coverage",
        })
    }
}

impl FromStr for Goal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "detect" => Ok(Goal::Detect),
            "coverage" => Ok(Goal::Coverage),
            _ => Err(format!("unknown goal `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignConfig {
    pub time_cutoff: Duration,
    /// Stagnation limit: time since the last retained test.
    pub time_threshold: Duration,
    /// Upper bound on one concolic phase.
    pub time_budget: Duration,
    pub rng_seed: u64,
    pub goal: Goal,
    pub mode: Mode,
    pub step_limit: u64,
    pub k_base: u32,
    pub k_max: u32,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            time_cutoff: Duration::from_secs(7200),
            time_threshold: Duration::from_secs(5),
            time_budget: Duration::from_secs(1800),
            rng_seed: 0,
            goal: Goal::Detect,
            mode: Mode::Fuce,
            step_limit: DEFAULT_STEP_LIMIT,
            k_base: DEFAULT_K_BASE,
            k_max: DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("time limits must satisfy 0 < threshold ({threshold:?}) < budget ({budget:?}) <= cutoff ({cutoff:?})")]
    TimeOrder {
        threshold: Duration,
        budget: Duration,
        cutoff: Duration,
    },
    #[error("step limit must be positive")]
    StepLimit,
    #[error("energy bounds must satisfy 1 <= k_base <= k_max")]
    Energy,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(Duration::ZERO < self.time_threshold
            && self.time_threshold < self.time_budget
            && self.time_budget <= self.time_cutoff)
        {
            return Err(ConfigError::TimeOrder {
                threshold: self.time_threshold,
                budget: self.time_budget,
                cutoff: self.time_cutoff,
            });
        }
        if self.step_limit == 0 {
            return Err(ConfigError::StepLimit);
        }
        if self.k_base == 0 || self.k_base > self.k_max {
            return Err(ConfigError::Energy);
        }
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            time_cutoff_seconds: self.time_cutoff.as_secs_f64(),
            time_threshold_seconds: self.time_threshold.as_secs_f64(),
            time_budget_seconds: self.time_budget.as_secs_f64(),
            step_limit: self.step_limit,
            k_base: self.k_base,
            k_max: self.k_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CampaignError {
    #[error("a campaign needs at least one seed")]
    NoSeeds,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Ground-truth coverage from replaying retained tests on a fresh map.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub covered_edges: usize,
    pub total_edges: usize,
    pub coverage_pct: f64,
    /// Coverage after each entry that added an edge, stamped with the
    /// entry's retention time.
    pub timeline: Vec<(Duration, f64)>,
}

pub fn report_coverage(design: &Design, queue: &FuzzQueue, step_limit: u64) -> CoverageSummary {
    let mut map = CoverageMap::new(design.edge_count());
    let mut timeline = Vec::new();
    for e in queue.entries() {
        let before = map.covered_edges();
        let t = crate::exec::execute(design, &e.case.words, step_limit);
        merge_coverage(&mut map, &coverage_of(&t));
        if map.covered_edges() > before {
            timeline.push((e.created_at, map.coverage_pct()));
        }
    }
    CoverageSummary {
        covered_edges: map.covered_edges(),
        total_edges: map.edge_count(),
        coverage_pct: map.coverage_pct(),
        timeline,
    }
}

/// A finished campaign with its final queue.
pub struct CampaignRun {
    pub report: CampaignReport,
    pub queue: FuzzQueue,
    /// Empty unless a concolic phase ran.
    pub tree: ExecutionTree,
}

/// Campaign state shared between the fuzz observer and the concolic sink.
struct State<'a> {
    design: &'a Design,
    golden: &'a GoldenModel,
    config: &'a CampaignConfig,
    clock: &'a dyn Clock,
    phase: PhaseId,
    phase_tests: usize,
    last_retained: Duration,
    witness: Option<Witness>,
    golden_unavailable: u64,
    covered_all: bool,
    timeline: Vec<TimelineSample>,
}

impl State<'_> {
    fn cutoff_reached(&self) -> bool {
        self.clock.now() >= self.config.time_cutoff
    }

    fn goal_met(&self) -> bool {
        match self.config.goal {
            Goal::Detect => self.witness.is_some(),
            Goal::Coverage => self.covered_all,
        }
    }

    fn done(&self) -> bool {
        self.goal_met() || self.cutoff_reached()
    }

    fn sample(&mut self, coverage: &CoverageMap) {
        self.covered_all = coverage.covered_edges() == coverage.edge_count();
        let s = TimelineSample {
            t_seconds: self.clock.now().as_secs_f64(),
            coverage_pct: coverage.coverage_pct(),
            phase: self.phase.label(),
        };
        match self.timeline.last_mut() {
            Some(last) if last.t_seconds >= s.t_seconds => *last = s,
            Some(last) if last.coverage_pct == s.coverage_pct && last.phase == s.phase => {}
            _ => self.timeline.push(s),
        }
    }

    /// Runs the detector on a retained test. Returns whether it deviated.
    fn detect(&mut self, trace: &ExecutionTrace, words: &[Word], id: TestId) -> bool {
        if self.witness.is_some() {
            return true;
        }
        match check_trace(trace, self.golden, words, Some(id), self.config.step_limit) {
            Ok((verdict, golden)) => {
                if matches!(self.golden, GoldenModel::Reference(_)) {
                    self.clock.charge(execution_cost(golden.steps_used));
                }
                self.witness = verdict.witness;
            }
            Err(_) => self.golden_unavailable += 1,
        }
        self.witness.is_some()
    }

    fn retained(&mut self, id: TestId, words: &[Word], trace: &ExecutionTrace, coverage: &CoverageMap) -> Control {
        self.phase_tests += 1;
        self.last_retained = self.clock.now();
        self.detect(trace, words, id);
        self.sample(coverage);
        if self.goal_met() {
            Control::Stop
        } else {
            Control::Continue
        }
    }

    fn enter(&mut self, phase: PhaseId) -> Duration {
        self.phase = phase;
        self.phase_tests = 0;
        self.last_retained = self.clock.now();
        self.clock.now()
    }

    fn stagnated(&self) -> bool {
        self.config.mode == Mode::Fuce
            && self.clock.now().saturating_sub(self.last_retained) > self.config.time_threshold
    }
}

struct Observer<'s, 'a>(&'s mut State<'a>);

impl FuzzObserver for Observer<'_, '_> {
    fn should_yield(&mut self, _engine: &FuzzEngine<'_>) -> bool {
        self.0.cutoff_reached() || self.0.stagnated()
    }

    fn retained(&mut self, entry: &QueueEntry, trace: &ExecutionTrace, coverage: &CoverageMap) -> Control {
        self.0.retained(entry.id, &entry.case.words, trace, coverage)
    }
}

/// Runs one campaign and returns its report.
pub fn run_campaign(
    design: &Design,
    golden: &GoldenModel,
    seeds: &[TestCase],
    config: &CampaignConfig,
    clock: &dyn Clock,
) -> Result<CampaignReport, CampaignError> {
    run_campaign_detailed(design, golden, seeds, config, clock).map(|r| r.report)
}

pub fn run_campaign_detailed(
    design: &Design,
    golden: &GoldenModel,
    seeds: &[TestCase],
    config: &CampaignConfig,
    clock: &dyn Clock,
) -> Result<CampaignRun, CampaignError> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(CampaignError::NoSeeds);
    }
    let started = unix_millis();
    let fuzz_config = FuzzConfig {
        step_limit: config.step_limit,
        k_base: config.k_base,
        k_max: config.k_max,
        design_literals: true,
    };
    let mut fuzz = FuzzEngine::new(design, fuzz_config, config.rng_seed);
    let mut conc = ConcolicEngine::new(design, config.step_limit, config.rng_seed);
    let first = match config.mode {
        Mode::Concolic => PhaseId::conc(1),
        _ => PhaseId::FIRST,
    };
    let mut st = State {
        design,
        golden,
        config,
        clock,
        phase: first,
        phase_tests: 0,
        last_retained: clock.now(),
        witness: None,
        golden_unavailable: 0,
        covered_all: false,
        timeline: Vec::new(),
    };
    let mut phases: Vec<PhaseRow> = Vec::new();
    let mut exhausted = false;

    let mut phase_start = st.enter(first);
    for s in seeds {
        let (id, trace) = fuzz.add_seed(s.clone(), clock);
        st.detect(&trace, &s.words, id);
        if st.witness.is_some() {
            break;
        }
    }
    st.sample(&fuzz.coverage);
    st.phase_tests = 0;

    match config.mode {
        Mode::Fuce | Mode::Fuzz => loop {
            fuzz.phase = st.phase;
            while !st.done() && !st.stagnated() {
                fuzz.fuzz_round(clock, &mut Observer(&mut st));
            }
            phases.push(row(&st, phase_start));
            if st.done() {
                break;
            }
            phase_start = st.enter(st.phase.next());
            let budget = config.time_budget.min(config.time_cutoff.saturating_sub(clock.now()));
            concolic_round(&mut conc, &mut fuzz, &mut st, budget);
            phases.push(row(&st, phase_start));
            if st.done() {
                break;
            }
            phase_start = st.enter(st.phase.next());
        },
        Mode::Concolic => {
            while !st.done() {
                let budget = config.time_cutoff.saturating_sub(clock.now());
                let out = concolic_round(&mut conc, &mut fuzz, &mut st, budget);
                if out.tests_emitted == 0 && !out.budget_exhausted {
                    exhausted = true;
                    break;
                }
            }
            phases.push(row(&st, phase_start));
        }
    }

    st.sample(&fuzz.coverage);
    let truth = report_coverage(design, &fuzz.queue, config.step_limit);
    let outcome = if st.goal_met() {
        match config.goal {
            Goal::Detect => Outcome::Detected,
            Goal::Coverage => Outcome::Covered,
        }
    } else if exhausted {
        Outcome::Exhausted
    } else {
        Outcome::Timeout
    };
    let report = CampaignReport {
        schema: SCHEMA_VERSION,
        design: design.name.clone(),
        mode: config.mode,
        goal: config.goal,
        rng_seed: config.rng_seed,
        virtual_clock: clock.is_virtual(),
        config: config.echo(),
        outcome,
        detected: st.witness.is_some(),
        witness: st.witness.clone(),
        branch_coverage_pct: truth.coverage_pct,
        incremental_coverage_pct: fuzz.coverage.coverage_pct(),
        covered_edges: truth.covered_edges,
        total_edges: truth.total_edges,
        total_tests: fuzz.queue.len(),
        total_seconds: clock.now().as_secs_f64(),
        executions: fuzz.executions,
        golden_unavailable: st.golden_unavailable,
        phases,
        timeline: st.timeline,
        concolic: conc.stats,
        timestamps: Timestamps {
            started_unix_ms: started,
            finished_unix_ms: unix_millis(),
        },
    };
    Ok(CampaignRun {
        report,
        queue: fuzz.queue,
        tree: conc.into_tree(),
    })
}

fn row(st: &State<'_>, start: Duration) -> PhaseRow {
    PhaseRow {
        phase: st.phase.label(),
        tests_generated: st.phase_tests,
        start_seconds: start.as_secs_f64(),
        wall_seconds: st.clock.now().saturating_sub(start).as_secs_f64(),
    }
}

/// One concolic pass over the current queue. Every emission is verified by
/// replay inside the engine, so it always covers its target and is kept.
fn concolic_round(
    conc: &mut ConcolicEngine<'_>,
    fuzz: &mut FuzzEngine<'_>,
    st: &mut State<'_>,
    budget: Duration,
) -> ConcolicOutcome {
    debug_assert_eq!(st.phase.kind, PhaseKind::Conc);
    let covered: Vec<bool> = st
        .design
        .all_edges()
        .into_iter()
        .map(|e| fuzz.coverage.is_covered(e))
        .collect();
    let covered = move |e: BranchEdge| covered[e.index()];
    let snapshot = fuzz.queue.snapshot();
    let clock = st.clock;
    let phase = st.phase;
    let mut sink = |em: Emission| {
        let delta = coverage_of(&em.trace);
        let words = em.case.words.clone();
        let id = fuzz
            .offer(em.case, &em.trace, &delta, true, clock)
            .expect("forced offers always enqueue");
        st.retained(id, &words, &em.trace, &fuzz.coverage)
    };
    conc.run_phase(&snapshot, &covered, budget, phase, clock, &mut sink)
}

fn unix_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::dsl::parse_design;

    fn cfg(mode: Mode, goal: Goal, cutoff: u64) -> CampaignConfig {
        CampaignConfig {
            time_cutoff: Duration::from_secs(cutoff),
            time_threshold: Duration::from_secs(1),
            time_budget: Duration::from_secs(cutoff.min(10)),
            mode,
            goal,
            rng_seed: 1,
            ..Default::default()
        }
    }

    #[test]
    fn config_ordering_is_enforced() {
        assert!(CampaignConfig::default().validate().is_ok());
        let mut c = CampaignConfig::default();
        c.time_threshold = c.time_budget;
        assert!(c.validate().is_err());
        c = CampaignConfig {
            time_budget: Duration::from_secs(8000),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn branchless_design_is_covered_at_once() {
        let d = parse_design("design d { inputs 1; output(in[0]); }").unwrap();
        let clock = VirtualClock::new();
        let r = run_campaign(
            &d,
            &GoldenModel::Reference(d.clone()),
            &[TestCase::seed(vec![3])],
            &cfg(Mode::Fuce, Goal::Coverage, 60),
            &clock,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Covered);
        assert_eq!(r.branch_coverage_pct, 100.0);
        let labels: Vec<&str> = r.phases.iter().map(|p| p.phase.as_str()).collect();
        assert_eq!(labels, ["fuzz_1"]);
    }

    #[test]
    fn fuce_solves_a_magic_guard_that_fuzzing_misses() {
        let src = "design d { inputs 2; output(0); if (in[0] == 912673 and in[1] == 40213) { output(1); } }";
        let dut = parse_design(src).unwrap();
        let gold = parse_design("design d { inputs 2; output(0); }").unwrap();
        let golden = GoldenModel::Reference(gold);
        let seeds = [TestCase::seed(vec![5, 6])];
        let run = |mode| {
            let clock = VirtualClock::new();
            run_campaign(&dut, &golden, &seeds, &cfg(mode, Goal::Detect, 20), &clock).unwrap()
        };
        let fuce = run(Mode::Fuce);
        assert!(fuce.detected);
        assert_eq!(fuce.witness.as_ref().unwrap().words, vec![912673, 40213]);
        let labels: Vec<&str> = fuce.phases.iter().map(|p| p.phase.as_str()).collect();
        assert_eq!(labels, ["fuzz_1", "conc_1"]);
        let fuzz = run(Mode::Fuzz);
        assert!(!fuzz.detected);
        assert_eq!(fuzz.outcome, Outcome::Timeout);
        assert!(fuzz.total_seconds >= 20.0);
        let conc = run(Mode::Concolic);
        assert!(conc.detected);
    }

    #[test]
    fn concolic_only_stops_when_nothing_is_left() {
        let d = parse_design("design d { inputs 1; if (in[0] == 7) { output(1); } }").unwrap();
        let clock = VirtualClock::new();
        let r = run_campaign(
            &d,
            &GoldenModel::Reference(d.clone()),
            &[TestCase::seed(vec![0])],
            &cfg(Mode::Concolic, Goal::Detect, 60),
            &clock,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.branch_coverage_pct, 100.0);
        assert_eq!(r.total_tests, 2);
        assert_eq!(r.phases.len(), 1);
    }

    #[test]
    fn recomputed_coverage_matches_incremental() {
        let d = parse_design(
            "design d { inputs 2; if (in[0] < 10) { output(1); } else { if (in[1] == 77777) { output(2); } } }",
        )
        .unwrap();
        let clock = VirtualClock::new();
        let r = run_campaign(
            &d,
            &GoldenModel::Reference(d.clone()),
            &[TestCase::seed(vec![50, 0])],
            &cfg(Mode::Fuce, Goal::Coverage, 30),
            &clock,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Covered);
        assert_eq!(r.branch_coverage_pct, r.incremental_coverage_pct);
        let ts: Vec<f64> = r.timeline.iter().map(|s| s.t_seconds).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn seeds_are_required() {
        let d = parse_design("design d { inputs 0; }").unwrap();
        let clock = VirtualClock::new();
        let e = run_campaign(
            &d,
            &GoldenModel::Reference(d.clone()),
            &[],
            &CampaignConfig::default(),
            &clock,
        );
        assert_eq!(e.unwrap_err(), CampaignError::NoSeeds);
    }
}
