// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::ast::{Design, Expr, Stmt};

/// Renders a design back to DSL source in canonical form.
///
/// Nested operands are fully parenthesized; desugared ternaries come out as
/// the `if`/`else` statements they were lowered to, so re-parsing the output
/// yields the same design with the same branch ids.
pub fn pretty_print(design: &Design) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "design {} {{", design.name);
    let _ = writeln!(out, "  inputs {};", design.input_arity);
    block(design, &design.body, 1, &mut out);
    out.push_str("}\n");
    out
}

fn block(d: &Design, stmts: &[Stmt], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match s {
            Stmt::Assign(v, e) => {
                let _ = writeln!(out, "{pad}{} = {};", d.var_name(*v), expr(d, e, true));
            }
            Stmt::Output(e) => {
                let _ = writeln!(out, "{pad}output({});", expr(d, e, true));
            }
            Stmt::Halt => {
                let _ = writeln!(out, "{pad}halt;");
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                let _ = writeln!(out, "{pad}if ({}) {{", expr(d, cond, true));
                block(d, then_body, depth + 1, out);
                if else_body.is_empty() {
                    let _ = writeln!(out, "{pad}}}");
                } else {
                    let _ = writeln!(out, "{pad}}} else {{");
                    block(d, else_body, depth + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
            }
            Stmt::While { cond, body, .. } => {
                let _ = writeln!(out, "{pad}while ({}) {{", expr(d, cond, true));
                block(d, body, depth + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

fn expr(d: &Design, e: &Expr, root: bool) -> String {
    match e {
        Expr::Const(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(v) => d.var_name(*v).to_string(),
        Expr::Input(k) => format!("in[{k}]"),
        Expr::NextInput => "next_input()".to_string(),
        Expr::Unary(op, a) => format!("{}{}", op.symbol(), expr(d, a, false)),
        Expr::Binary(op, a, b) => {
            let body = format!("{} {} {}", expr(d, a, false), op.symbol(), expr(d, b, false));
            if root {
                body
            } else {
                format!("({body})")
            }
        }
    }
}
