// SPDX-License-Identifier: Apache-2.0

//! Concrete interpreter with branch instrumentation.
//!
//! The interpreter is generic over a [`Shadow`] domain that receives every
//! value computation in lock-step with the concrete evaluation. The plain
//! executor uses the unit shadow; the concolic engine plugs in a symbolic one.
//! Control flow is always decided by concrete values.

mod coverage;

pub use coverage::{bucket_of, coverage_of, merge_coverage, Bucket, CoverageDelta, CoverageMap, PairKey, ENTRY_EDGE};

use serde::{Deserialize, Serialize};

use crate::dsl::{BranchEdge, BranchId, Design, Expr, Stmt};
use crate::ops::{apply_binary, apply_unary, BinOp, UnOp};
use crate::Word;

/// Default interpreter step budget per execution.
pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeFault {
    DivByZero,
    StepLimitExceeded,
}

/// One resolved conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision {
    pub branch: BranchId,
    pub taken: bool,
}

impl Decision {
    pub fn edge(self) -> BranchEdge {
        BranchEdge::new(self.branch, self.taken)
    }
}

/// Words emitted by `output()`, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputTrace {
    pub values: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub decisions: Vec<Decision>,
    pub outputs: OutputTrace,
    pub steps_used: u64,
    pub fault: Option<RuntimeFault>,
    /// Set when a read went past the end of the test case and yielded 0.
    pub input_exhausted: bool,
}

/// Observer domain run alongside the concrete interpreter.
pub trait Shadow {
    type Value: Clone;

    /// Value for anything that does not depend on the input.
    fn concrete(&mut self) -> Self::Value;
    /// Value for the input word at `index` (slot `k` is index `k`;
    /// the n-th `next_input()` read is index `input_arity + n`).
    fn input(&mut self, index: u32) -> Self::Value;
    fn unary(&mut self, op: UnOp, a: (&Self::Value, Word)) -> Self::Value;
    fn binary(&mut self, op: BinOp, a: (&Self::Value, Word), b: (&Self::Value, Word)) -> Self::Value;
    /// Called before a division whose concrete divisor is nonzero.
    fn divisor(&mut self, _b: (&Self::Value, Word)) {}
    /// Called once per evaluated conditional.
    fn decision(&mut self, _branch: BranchId, _cond: &Self::Value, _taken: bool) {}
}

impl Shadow for () {
    type Value = ();

    #[inline]
    fn concrete(&mut self) {}
    #[inline]
    fn input(&mut self, _index: u32) {}
    #[inline]
    fn unary(&mut self, _op: UnOp, _a: (&(), Word)) {}
    #[inline]
    fn binary(&mut self, _op: BinOp, _a: (&(), Word), _b: (&(), Word)) {}
}

enum Flow {
    Normal,
    Stop,
}

struct Machine<'a, S: Shadow> {
    design: &'a Design,
    words: &'a [Word],
    next_cursor: usize,
    vars: Vec<Word>,
    shadow_vars: Vec<S::Value>,
    shadow: &'a mut S,
    limit: u64,
    trace: ExecutionTrace,
}

impl<'a, S: Shadow> Machine<'a, S> {
    fn step(&mut self) -> bool {
        if self.trace.steps_used >= self.limit {
            self.trace.fault = Some(RuntimeFault::StepLimitExceeded);
            false
        } else {
            self.trace.steps_used += 1;
            true
        }
    }

    fn read(&mut self, index: usize) -> Word {
        match self.words.get(index) {
            Some(w) => *w,
            None => {
                self.trace.input_exhausted = true;
                0
            }
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<(Word, S::Value), RuntimeFault> {
        Ok(match e {
            Expr::Const(v) => (*v, self.shadow.concrete()),
            Expr::Bool(b) => (*b as Word, self.shadow.concrete()),
            Expr::Var(v) => {
                let i = v.0 as usize;
                (self.vars[i], self.shadow_vars[i].clone())
            }
            Expr::Input(k) => {
                let v = self.read(*k as usize);
                (v, self.shadow.input(*k))
            }
            Expr::NextInput => {
                let index = self.design.input_arity + self.next_cursor;
                self.next_cursor += 1;
                let v = self.read(index);
                (v, self.shadow.input(index as u32))
            }
            Expr::Unary(op, a) => {
                let (av, asym) = self.eval(a)?;
                let r = apply_unary(*op, av);
                (r, self.shadow.unary(*op, (&asym, av)))
            }
            Expr::Binary(op, a, b) => {
                let (av, asym) = self.eval(a)?;
                let (bv, bsym) = self.eval(b)?;
                if op.is_division() {
                    if bv == 0 {
                        return Err(RuntimeFault::DivByZero);
                    }
                    self.shadow.divisor((&bsym, bv));
                }
                let r = apply_binary(*op, av, bv).map_err(|_| RuntimeFault::DivByZero)?;
                (r, self.shadow.binary(*op, (&asym, av), (&bsym, bv)))
            }
        })
    }

    fn decide(&mut self, branch: BranchId, cond: &Expr) -> Option<bool> {
        match self.eval(cond) {
            Ok((v, sym)) => {
                let taken = v != 0;
                self.shadow.decision(branch, &sym, taken);
                self.trace.decisions.push(Decision { branch, taken });
                Some(taken)
            }
            Err(f) => {
                self.trace.fault = Some(f);
                None
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Flow {
        for s in stmts {
            if !self.step() {
                return Flow::Stop;
            }
            let flow = match s {
                Stmt::Assign(var, e) => match self.eval(e) {
                    Ok((v, sym)) => {
                        let i = var.0 as usize;
                        self.vars[i] = v;
                        self.shadow_vars[i] = sym;
                        Flow::Normal
                    }
                    Err(f) => {
                        self.trace.fault = Some(f);
                        Flow::Stop
                    }
                },
                Stmt::Output(e) => match self.eval(e) {
                    Ok((v, _)) => {
                        self.trace.outputs.values.push(v);
                        Flow::Normal
                    }
                    Err(f) => {
                        self.trace.fault = Some(f);
                        Flow::Stop
                    }
                },
                Stmt::Halt => Flow::Stop,
                Stmt::If {
                    branch,
                    cond,
                    then_body,
                    else_body,
                } => match self.decide(*branch, cond) {
                    Some(true) => self.block(then_body),
                    Some(false) => self.block(else_body),
                    None => Flow::Stop,
                },
                Stmt::While { branch, cond, body } => loop {
                    match self.decide(*branch, cond) {
                        Some(true) => {}
                        Some(false) => break Flow::Normal,
                        None => break Flow::Stop,
                    }
                    if let Flow::Stop = self.block(body) {
                        break Flow::Stop;
                    }
                    if !self.step() {
                        break Flow::Stop;
                    }
                },
            };
            if let Flow::Stop = flow {
                return Flow::Stop;
            }
        }
        Flow::Normal
    }
}

/// Runs `design` on `words` with a shadow domain attached.
pub fn execute_with<S: Shadow>(design: &Design, words: &[Word], step_limit: u64, shadow: &mut S) -> ExecutionTrace {
    let n = design.variables.len();
    let init = shadow.concrete();
    let mut m = Machine {
        design,
        words,
        next_cursor: 0,
        vars: vec![0; n],
        shadow_vars: vec![init; n],
        shadow,
        limit: step_limit,
        trace: ExecutionTrace {
            decisions: Vec::new(),
            outputs: OutputTrace::default(),
            steps_used: 0,
            fault: None,
            input_exhausted: false,
        },
    };
    m.block(&design.body);
    m.trace
}

/// Deterministic concrete execution.
pub fn execute(design: &Design, words: &[Word], step_limit: u64) -> ExecutionTrace {
    execute_with(design, words, step_limit, &mut ())
}
