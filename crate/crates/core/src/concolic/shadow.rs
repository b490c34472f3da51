// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use super::sym::Sym;
use crate::dsl::{BranchId, Design};
use crate::exec::{execute_with, ExecutionTrace, Shadow};
use crate::ops::{BinOp, UnOp};
use crate::Word;

/// Expressions larger than this are dropped to concrete values, with the
/// inputs they read pinned to their current values.
pub const SYM_SIZE_LIMIT: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionRecord {
    pub branch: BranchId,
    /// How many earlier decisions of the same branch precede this one.
    pub occurrence: u32,
    /// `None` when the condition does not depend on the input.
    pub cond: Option<Sym>,
    pub taken: bool,
    /// Expressions that must stay nonzero for execution to reach this
    /// decision without faulting (symbolic divisors, concretization pins).
    pub guards: Vec<Sym>,
}

struct SymbolicShadow<'a> {
    words: &'a [Word],
    records: Vec<ConditionRecord>,
    occurrences: Vec<u32>,
    pending: Vec<Sym>,
    pinned: BTreeSet<u32>,
}

impl SymbolicShadow<'_> {
    fn limit(&mut self, s: Sym) -> Option<Sym> {
        if s.size() <= SYM_SIZE_LIMIT {
            return Some(s);
        }
        for i in s.inputs() {
            if self.pinned.insert(i) {
                let current = self.words.get(i as usize).copied().unwrap_or(0);
                self.pending
                    .push(Sym::binary(BinOp::Eq, Sym::input(i), Sym::constant(current)));
            }
        }
        None
    }
}

fn is_const(v: &Option<Sym>) -> bool {
    v.as_ref().is_none_or(|s| s.as_const().is_some())
}

fn lift(v: &Option<Sym>, concrete: Word) -> Sym {
    v.clone().unwrap_or_else(|| Sym::constant(concrete))
}

impl Shadow for SymbolicShadow<'_> {
    type Value = Option<Sym>;

    fn concrete(&mut self) -> Option<Sym> {
        None
    }

    fn input(&mut self, index: u32) -> Option<Sym> {
        Some(Sym::input(index))
    }

    fn unary(&mut self, op: UnOp, a: (&Option<Sym>, Word)) -> Option<Sym> {
        if is_const(a.0) {
            return None;
        }
        self.limit(Sym::unary(op, lift(a.0, a.1)))
    }

    fn binary(&mut self, op: BinOp, a: (&Option<Sym>, Word), b: (&Option<Sym>, Word)) -> Option<Sym> {
        if is_const(a.0) && is_const(b.0) {
            return None;
        }
        self.limit(Sym::binary(op, lift(a.0, a.1), lift(b.0, b.1)))
    }

    fn divisor(&mut self, b: (&Option<Sym>, Word)) {
        if let Some(s) = b.0 {
            self.pending.push(s.clone());
        }
    }

    fn decision(&mut self, branch: BranchId, cond: &Option<Sym>, taken: bool) {
        let slot = &mut self.occurrences[branch.0 as usize];
        let occurrence = *slot;
        *slot += 1;
        self.records.push(ConditionRecord {
            branch,
            occurrence,
            cond: cond.clone(),
            taken,
            guards: std::mem::take(&mut self.pending),
        });
    }
}

/// Concrete execution with a symbolic shadow store. The returned trace is
/// identical to [`crate::exec::execute`]; records line up with its decisions.
pub fn shadow_execute(design: &Design, words: &[Word], step_limit: u64) -> (ExecutionTrace, Vec<ConditionRecord>) {
    let mut shadow = SymbolicShadow {
        words,
        records: Vec::new(),
        occurrences: vec![0; design.branch_count],
        pending: Vec::new(),
        pinned: BTreeSet::new(),
    };
    let trace = execute_with(design, words, step_limit, &mut shadow);
    (trace, shadow.records)
}
