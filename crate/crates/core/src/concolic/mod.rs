// SPDX-License-Identifier: Apache-2.0

//! Concolic exploration: symbolic shadow execution, the execution tree and
//! solver-backed generation of tests for unobserved branch polarities.

mod shadow;
mod sym;
mod tree;

pub use shadow::{shadow_execute, ConditionRecord, SYM_SIZE_LIMIT};
pub use sym::{Sym, SymNode};
pub use tree::{ExecutionTree, FrontierEntry, NodeId, PathPredicate, TreeNode, OCCURRENCE_CAP};

use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::clock::{execution_cost, Clock};
use crate::dsl::{BranchEdge, Design};
use crate::exec::{execute, ExecutionTrace};
use crate::fuzz::Control;
use crate::solver::{per_call_deadline, solve, SolveOptions, Verdict};
use crate::testcase::{Origin, PhaseId, TestCase, TestId};
use crate::Word;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcolicStats {
    pub emitted: u64,
    pub target_covered: u64,
    /// Sat models whose replay missed the target; always a bug.
    pub violations: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub propagations: u64,
    pub search_nodes: u64,
}

/// A generated test case, already replayed.
#[derive(Debug, Clone)]
pub struct Emission {
    pub case: TestCase,
    pub trace: ExecutionTrace,
    pub target: BranchEdge,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConcolicOutcome {
    pub tests_emitted: usize,
    pub budget_exhausted: bool,
    /// The sink asked to stop.
    pub stopped: bool,
    pub frontier_size: usize,
}

/// Concolic state that persists across the phases of one campaign.
pub struct ConcolicEngine<'d> {
    design: &'d Design,
    step_limit: u64,
    rng_seed: u64,
    tree: ExecutionTree,
    attempted: HashSet<FrontierEntry>,
    shadowed: usize,
    pub stats: ConcolicStats,
}

impl<'d> ConcolicEngine<'d> {
    pub fn new(design: &'d Design, step_limit: u64, rng_seed: u64) -> Self {
        ConcolicEngine {
            design,
            step_limit,
            rng_seed,
            tree: ExecutionTree::new(),
            attempted: HashSet::new(),
            shadowed: 0,
            stats: ConcolicStats::default(),
        }
    }

    pub fn tree(&self) -> &ExecutionTree {
        &self.tree
    }

    pub fn into_tree(self) -> ExecutionTree {
        self.tree
    }

    /// Shadow-executes seeds not seen before. `seeds[i]` must be queue entry
    /// `i`; the queue is append-only so only the tail is new.
    pub fn absorb(&mut self, seeds: &[TestCase], clock: &dyn Clock) {
        for (i, s) in seeds.iter().enumerate().skip(self.shadowed) {
            let (trace, records) = shadow_execute(self.design, &s.words, self.step_limit);
            clock.charge(execution_cost(trace.steps_used));
            self.tree.grow(&records, &s.words, Some(TestId(i as u64)));
        }
        self.shadowed = self.shadowed.max(seeds.len());
    }

    /// Current frontier under the occurrence cap, minus attempted targets.
    pub fn frontier(&self, covered: &dyn Fn(BranchEdge) -> bool) -> Vec<FrontierEntry> {
        self.tree.frontier(covered, &self.attempted)
    }

    /// One concolic phase. Every target is attempted at most once per
    /// campaign; emissions go to `sink` immediately.
    #[allow(clippy::too_many_arguments)]
    pub fn run_phase(
        &mut self,
        seeds: &[TestCase],
        covered: &dyn Fn(BranchEdge) -> bool,
        budget: Duration,
        phase: PhaseId,
        clock: &dyn Clock,
        sink: &mut dyn FnMut(Emission) -> Control,
    ) -> ConcolicOutcome {
        let start = clock.now();
        self.absorb(seeds, clock);
        let frontier = self.frontier(covered);
        let mut out = ConcolicOutcome {
            frontier_size: frontier.len(),
            ..Default::default()
        };
        let deadline = per_call_deadline(budget, frontier.len());

        for target in frontier {
            let elapsed = clock.now().saturating_sub(start);
            if elapsed >= budget {
                out.budget_exhausted = true;
                break;
            }
            self.attempted.insert(target);
            let Some(emission) = self.attempt(target, deadline.min(budget - elapsed), phase, clock) else {
                continue;
            };
            out.tests_emitted += 1;
            if sink(emission) == Control::Stop {
                out.stopped = true;
                break;
            }
        }
        out
    }

    fn attempt(
        &mut self,
        target: FrontierEntry,
        deadline: Duration,
        phase: PhaseId,
        clock: &dyn Clock,
    ) -> Option<Emission> {
        let pred = self.tree.build_predicate(target);
        let base = self.tree.witness(target.node).to_vec();
        let opts = SolveOptions {
            deadline,
            seed: self.rng_seed ^ (target.node as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ target.polarity as u64,
        };
        let result = solve(&pred, &base, &opts, clock).expect("frontier targets have conditions");
        self.stats.propagations += result.stats.propagations;
        self.stats.search_nodes += result.stats.search_nodes;
        let model = match result.verdict {
            Verdict::Sat(m) => {
                self.stats.sat += 1;
                m
            }
            Verdict::Unsat => {
                self.stats.unsat += 1;
                return None;
            }
            Verdict::Unknown(_) => {
                self.stats.unknown += 1;
                return None;
            }
        };

        let len = model.keys().next_back().map_or(0, |k| *k as usize + 1).max(base.len());
        let mut words: Vec<Word> = base;
        words.resize(len, 0);
        for (k, v) in &model {
            words[*k as usize] = *v;
        }

        let trace = execute(self.design, &words, self.step_limit);
        clock.charge(execution_cost(trace.steps_used));
        let path = self.tree.path_to(target);
        let follows = trace.decisions.len() >= path.len()
            && path
                .iter()
                .zip(&trace.decisions)
                .all(|((b, t), d)| d.branch == *b && d.taken == *t);
        if !follows {
            self.stats.violations += 1;
            return None;
        }
        self.stats.emitted += 1;
        self.stats.target_covered += 1;
        let node = self.tree.node(target.node);
        Some(Emission {
            case: TestCase::new(words, Origin::Concolic, phase, self.tree.witness_id(target.node)),
            trace,
            target: BranchEdge::new(node.branch, target.polarity),
        })
    }
}

/// Stand-alone phase over `seeds` with a fresh tree.
pub fn concolic_phase(
    design: &Design,
    seeds: &[TestCase],
    budget: Duration,
    step_limit: u64,
    clock: &dyn Clock,
    sink: &mut dyn FnMut(Emission) -> Control,
) -> ConcolicOutcome {
    let mut engine = ConcolicEngine::new(design, step_limit, 0);
    engine.run_phase(seeds, &|_| false, budget, PhaseId::conc(1), clock, sink)
}
