// SPDX-License-Identifier: Apache-2.0

//! Native word-level solver for path predicates.
//!
//! Pipeline: normalization into atoms, interval propagation (the only source
//! of `Unsat`), direct inversion, bounded exhaustive search for a single
//! narrow symbol, then local search on branch distance until the deadline.
//! Every `Sat` model is re-checked against the original predicate.

mod interval;
mod invert;
mod search;

pub use interval::{eval_interval, Interval};
pub use invert::{invert, solve_mul};
pub use search::{branch_distance, Fitness};

use std::collections::BTreeMap;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::concolic::{PathPredicate, Sym, SymNode};
use crate::ops::{BinOp, UnOp};
use crate::Word;

/// Smallest per-call deadline handed out by the concolic engine.
pub const MIN_DEADLINE: Duration = Duration::from_millis(50);

/// Widest single-symbol domain that is enumerated exhaustively.
pub const EXHAUSTIVE_WIDTH: u64 = 1 << 16;

pub type Model = BTreeMap<u32, Word>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(Model),
    Unsat,
    Unknown(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub propagations: u64,
    pub search_nodes: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub verdict: Verdict,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub deadline: Duration,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            deadline: MIN_DEADLINE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("malformed predicate: {0}")]
    Malformed(&'static str),
}

/// Per-call deadline for a phase budget shared by `frontier` targets.
pub fn per_call_deadline(budget: Duration, frontier: usize) -> Duration {
    (budget / frontier.max(1) as u32).max(MIN_DEADLINE)
}

/// Splits conjunctions, pushes negations into comparisons and evaluates
/// input-free conjuncts. `None` if some conjunct is constantly false.
pub fn normalize(conjuncts: &[(Sym, bool)]) -> Option<Vec<(Sym, bool)>> {
    fn push(e: &Sym, p: bool, out: &mut Vec<(Sym, bool)>) -> bool {
        if e.inputs().is_empty() {
            return e.eval(&|_| 0).is_ok_and(|v| (v != 0) == p);
        }
        match e.node() {
            SymNode::Unary(UnOp::Not, a) => push(a, !p, out),
            SymNode::Binary(BinOp::And, a, b) if p => push(a, true, out) && push(b, true, out),
            SymNode::Binary(BinOp::Or, a, b) if !p => push(a, false, out) && push(b, false, out),
            SymNode::Binary(op, a, b) if op.is_comparison() && !p => {
                let neg = op.negated_comparison().expect("comparison");
                out.push((Sym::binary(neg, a.clone(), b.clone()), true));
                true
            }
            _ => {
                out.push((e.clone(), p));
                true
            }
        }
    }
    let mut out = Vec::new();
    for (e, p) in conjuncts {
        if !push(e, *p, &mut out) {
            return None;
        }
    }
    Some(out)
}

struct Ctx<'a> {
    atoms: Vec<(Sym, bool)>,
    vars: Vec<u32>,
    doms: Vec<Interval>,
    env: Vec<Word>,
    cost: u64,
    clock: &'a dyn Clock,
    start: Duration,
    deadline: Duration,
    stats: SolverStats,
    /// Set when exhaustive search covered the whole domain without a model.
    exhausted_single: bool,
}

impl Ctx<'_> {
    fn expired(&self) -> bool {
        self.clock.now().saturating_sub(self.start) >= self.deadline
    }

    fn fitness(&mut self, env: &[Word]) -> Fitness {
        self.stats.search_nodes += 1;
        self.clock.charge(self.cost);
        Fitness::of(&self.atoms, env)
    }

    fn model(&self, env: &[Word]) -> Model {
        self.vars.iter().map(|v| (*v, env[*v as usize])).collect()
    }
}

/// Decides `pred` starting from the concrete witness `base`.
pub fn solve(
    pred: &PathPredicate,
    base: &[Word],
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<SolveResult, SolverError> {
    if pred.conjuncts.is_empty() {
        return Err(SolverError::Malformed("empty predicate"));
    }
    let start = clock.now();
    let mut stats = SolverStats::default();
    let finish = |verdict, mut stats: SolverStats| {
        stats.elapsed = clock.now().saturating_sub(start);
        Ok(SolveResult { verdict, stats })
    };

    let Some(atoms) = normalize(&pred.conjuncts) else {
        return finish(Verdict::Unsat, stats);
    };
    let mut vars: Vec<u32> = atoms.iter().flat_map(|(e, _)| e.inputs()).collect();
    vars.sort_unstable();
    vars.dedup();
    let width = vars.last().map_or(0, |v| *v as usize + 1).max(base.len());
    let mut env: Vec<Word> = (0..width).map(|i| base.get(i).copied().unwrap_or(0)).collect();

    // interval propagation to a fixpoint
    let mut doms = vec![Interval::FULL; width];
    for _ in 0..64 {
        let mut changed = false;
        for (e, p) in &atoms {
            stats.propagations += 1;
            match interval::narrow_atom(e, *p, &mut doms) {
                None => return finish(Verdict::Unsat, stats),
                Some(c) => changed |= c,
            }
        }
        if !changed {
            break;
        }
    }
    if atoms.iter().any(|(e, p)| !interval::atom_feasible(e, *p, &doms)) {
        return finish(Verdict::Unsat, stats);
    }
    for v in &vars {
        let d = doms[*v as usize];
        let x = &mut env[*v as usize];
        *x = (*x).clamp(d.lo, d.hi);
    }

    let cost = pred.size().max(1);
    let mut ctx = Ctx {
        atoms,
        vars,
        doms,
        env: Vec::new(),
        cost,
        clock,
        start,
        deadline: opts.deadline,
        stats,
        exhausted_single: false,
    };

    let found = search::propagate_inversions(&mut ctx, &mut env)
        || exhaustive(&mut ctx, &mut env)
        || (!ctx.exhausted_single && {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            search::local_search(&mut ctx, &mut env, &mut rng)
        });
    ctx.env = env;

    let verdict = if found {
        let model = ctx.model(&ctx.env);
        if pred.holds(&ctx.env) {
            Verdict::Sat(model)
        } else {
            Verdict::Unknown("model failed verification".into())
        }
    } else if ctx.exhausted_single {
        Verdict::Unknown("exhaustive search found no model".into())
    } else {
        Verdict::Unknown("deadline".into())
    };
    finish(verdict, ctx.stats)
}

fn exhaustive(ctx: &mut Ctx<'_>, env: &mut [Word]) -> bool {
    if ctx.vars.len() != 1 {
        return false;
    }
    let v = ctx.vars[0] as usize;
    let d = ctx.doms[v];
    if d.width() > EXHAUSTIVE_WIDTH {
        return false;
    }
    let keep = env[v];
    for x in d.lo..=d.hi {
        env[v] = x;
        if ctx.fitness(env).is_sat() {
            return true;
        }
        if ctx.expired() {
            env[v] = keep;
            return false;
        }
    }
    env[v] = keep;
    ctx.exhausted_single = true;
    false
}
