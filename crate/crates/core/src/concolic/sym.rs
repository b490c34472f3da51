// SPDX-License-Identifier: Apache-2.0

//! Symbolic word expressions over input symbols.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::ops::{apply_binary, apply_unary, BinOp, DivByZero, UnOp};
use crate::Word;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymNode {
    Const(Word),
    /// Input word by position in the test case.
    Input(u32),
    Unary(UnOp, Sym),
    Binary(BinOp, Sym, Sym),
}

/// Shared, immutable symbolic expression.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Sym {
    node: Arc<SymNode>,
    size: u32,
}

impl Deref for Sym {
    type Target = SymNode;

    fn deref(&self) -> &SymNode {
        &self.node
    }
}

impl Sym {
    pub fn constant(v: Word) -> Sym {
        Sym {
            node: Arc::new(SymNode::Const(v)),
            size: 1,
        }
    }

    pub fn input(index: u32) -> Sym {
        Sym {
            node: Arc::new(SymNode::Input(index)),
            size: 1,
        }
    }

    pub fn unary(op: UnOp, a: Sym) -> Sym {
        let size = a.size.saturating_add(1);
        Sym {
            node: Arc::new(SymNode::Unary(op, a)),
            size,
        }
    }

    pub fn binary(op: BinOp, a: Sym, b: Sym) -> Sym {
        let size = a.size.saturating_add(b.size).saturating_add(1);
        Sym {
            node: Arc::new(SymNode::Binary(op, a, b)),
            size,
        }
    }

    pub fn node(&self) -> &SymNode {
        &self.node
    }

    /// Node count of the expression viewed as a tree.
    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn as_const(&self) -> Option<Word> {
        match *self.node {
            SymNode::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Evaluates with DSL semantics; `env` supplies input words.
    pub fn eval(&self, env: &impl Fn(u32) -> Word) -> Result<Word, DivByZero> {
        match &*self.node {
            SymNode::Const(v) => Ok(*v),
            SymNode::Input(i) => Ok(env(*i)),
            SymNode::Unary(op, a) => Ok(apply_unary(*op, a.eval(env)?)),
            SymNode::Binary(op, a, b) => apply_binary(*op, a.eval(env)?, b.eval(env)?),
        }
    }

    /// Evaluates against a word vector; positions past the end read 0.
    pub fn eval_words(&self, words: &[Word]) -> Result<Word, DivByZero> {
        self.eval(&|i| words.get(i as usize).copied().unwrap_or(0))
    }

    pub fn inputs(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.collect_inputs(&mut out);
        out
    }

    fn collect_inputs(&self, out: &mut BTreeSet<u32>) {
        match &*self.node {
            SymNode::Const(_) => {}
            SymNode::Input(i) => {
                out.insert(*i);
            }
            SymNode::Unary(_, a) => a.collect_inputs(out),
            SymNode::Binary(_, a, b) => {
                a.collect_inputs(out);
                b.collect_inputs(out);
            }
        }
    }

    /// True if the root is a comparison or logical operator.
    pub fn is_boolean(&self) -> bool {
        match &*self.node {
            SymNode::Unary(UnOp::Not, _) => true,
            SymNode::Binary(op, _, _) => op.is_comparison() || op.is_logical(),
            _ => false,
        }
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            SymNode::Const(v) => write!(f, "{v}"),
            SymNode::Input(i) => write!(f, "in[{i}]"),
            SymNode::Unary(op, a) => write!(f, "{}({a})", op.symbol()),
            SymNode::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}
