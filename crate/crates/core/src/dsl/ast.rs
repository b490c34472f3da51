// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ops::{BinOp, UnOp};
use crate::Word;

/// Identifier of a conditional site (`if`, `while`, or desugared ternary).
///
/// Ids are dense in `[0, branch_count)` and assigned in pre-order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchId(pub u32);

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Index into [`Design::variables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub u32);

/// One side of a conditional site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BranchEdge {
    pub branch: BranchId,
    pub taken: bool,
}

impl BranchEdge {
    pub fn new(branch: BranchId, taken: bool) -> Self {
        BranchEdge { branch, taken }
    }

    /// Dense index `2 * branch + taken`, used by coverage tables.
    pub fn index(self) -> usize {
        self.branch.0 as usize * 2 + self.taken as usize
    }

    pub fn from_index(index: usize) -> Self {
        BranchEdge {
            branch: BranchId((index / 2) as u32),
            taken: index % 2 == 1,
        }
    }
}

impl fmt::Display for BranchEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.branch, if self.taken { 'T' } else { 'F' })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(Word),
    Bool(bool),
    Var(VarId),
    /// `in[k]`: the k-th declared input slot.
    Input(u32),
    /// `next_input()`: the next unread word after the declared slots.
    NextInput,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign(VarId, Expr),
    If {
        branch: BranchId,
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    While {
        branch: BranchId,
        cond: Expr,
        body: Vec<Stmt>,
    },
    Output(Expr),
    Halt,
}

/// A parsed and validated design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    pub name: String,
    pub input_arity: usize,
    pub body: Vec<Stmt>,
    pub branch_count: usize,
    /// Variable names indexed by [`VarId`].
    pub variables: Vec<String>,
}

impl Design {
    /// Every branch edge of the design, ordered by branch id then polarity
    /// (false before true).
    pub fn all_edges(&self) -> Vec<BranchEdge> {
        (0..self.branch_count * 2).map(BranchEdge::from_index).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.branch_count * 2
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.variables[var.0 as usize]
    }

    /// Every integer literal appearing in the design, sorted and deduplicated.
    pub fn literals(&self) -> Vec<Word> {
        fn expr(e: &Expr, out: &mut Vec<Word>) {
            match e {
                Expr::Const(v) => out.push(*v),
                Expr::Unary(_, a) => expr(a, out),
                Expr::Binary(_, a, b) => {
                    expr(a, out);
                    expr(b, out);
                }
                _ => {}
            }
        }
        fn block(stmts: &[Stmt], out: &mut Vec<Word>) {
            for s in stmts {
                match s {
                    Stmt::Assign(_, e) | Stmt::Output(e) => expr(e, out),
                    Stmt::If {
                        cond,
                        then_body,
                        else_body,
                        ..
                    } => {
                        expr(cond, out);
                        block(then_body, out);
                        block(else_body, out);
                    }
                    Stmt::While { cond, body, .. } => {
                        expr(cond, out);
                        block(body, out);
                    }
                    Stmt::Halt => {}
                }
            }
        }
        let mut out = Vec::new();
        block(&self.body, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Branch ids in the order they appear in the source.
    pub fn branch_sites(&self) -> Vec<BranchId> {
        fn block(stmts: &[Stmt], out: &mut Vec<BranchId>) {
            for s in stmts {
                match s {
                    Stmt::If {
                        branch,
                        then_body,
                        else_body,
                        ..
                    } => {
                        out.push(*branch);
                        block(then_body, out);
                        block(else_body, out);
                    }
                    Stmt::While { branch, body, .. } => {
                        out.push(*branch);
                        block(body, out);
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        block(&self.body, &mut out);
        out
    }
}
