// SPDX-License-Identifier: Apache-2.0

//! The design language: a small imperative DSL standing in for high-level
//! synthesized hardware descriptions.
//!
//! ```text
//! design <name> { inputs <n>;  <stmt>* }
//! stmt := <var> = <expr>; | if (<expr>) { <stmt>* } [else { <stmt>* }]
//!       | while (<expr>) { <stmt>* } | output(<expr>); | halt;
//! expr := literal | <var> | in[<k>] | next_input() | true | false
//!       | unary/binary ops with C precedence | <expr> ? <expr> : <expr> | (<expr>)
//! ```
//!
//! Every `if`, `while` and ternary receives a [`BranchId`] in pre-order.
//! Ternaries are desugared into `if`/`else` writing a temporary named
//! `__t<n>`; they may appear in assignments and `output()` only, and their
//! condition and arm are evaluated before the rest of the enclosing
//! statement. `and`/`or` evaluate both operands and introduce no branch.
//! Variables are zero-initialized and declared by their first assignment in
//! source order.

mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::{BranchEdge, BranchId, Design, Expr, Stmt, VarId};
pub use parser::parse_design;
pub use pretty::pretty_print;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("semantic error at line {line}: {message}")]
    Semantic {
        line: usize,
        col: Option<usize>,
        message: String,
    },
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(line: usize, message: impl Into<String>) -> Self {
        ParseError::Semantic {
            line,
            col: None,
            message: message.into(),
        }
    }

    pub(crate) fn semantic_at(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError::Semantic {
            line,
            col: Some(col),
            message: message.into(),
        }
    }
}

/// Universe of branch edges for a design: `2 * branch_count` entries.
pub fn all_edges(design: &Design) -> Vec<BranchEdge> {
    design.all_edges()
}
