// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use super::ast::{BranchId, Design, Expr, Stmt, VarId};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::ops::{BinOp, UnOp};
use crate::Word;

const MAX_INPUT_SLOTS: u32 = 1 << 16;
const UNNUMBERED: BranchId = BranchId(u32::MAX);

#[derive(Debug, Clone)]
enum PExpr {
    Int(Word),
    Bool(bool),
    Var {
        name: String,
        line: usize,
        col: usize,
    },
    Input {
        slot: u32,
        line: usize,
        col: usize,
    },
    Next,
    Unary(UnOp, Box<PExpr>),
    Binary(BinOp, Box<PExpr>, Box<PExpr>),
    Ternary {
        cond: Box<PExpr>,
        then_e: Box<PExpr>,
        else_e: Box<PExpr>,
        line: usize,
        col: usize,
    },
}

#[derive(Debug, Clone)]
enum PStmt {
    Assign {
        name: String,
        value: PExpr,
        line: usize,
    },
    If {
        cond: PExpr,
        then_body: Vec<PStmt>,
        else_body: Vec<PStmt>,
        line: usize,
    },
    While {
        cond: PExpr,
        body: Vec<PStmt>,
        line: usize,
    },
    Output {
        value: PExpr,
        line: usize,
    },
    Halt,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::syntax(line, col, message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => Err(self.error(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn int(&mut self, what: &str) -> Result<Word, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            other => Err(self.error(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn design(&mut self) -> Result<(String, u32, Vec<PStmt>), ParseError> {
        self.expect(Tok::Design, "`design`")?;
        let name = self.ident("design name")?;
        self.expect(Tok::LBrace, "`{`")?;
        self.expect(Tok::Inputs, "`inputs` declaration")?;
        let arity = self.int("input count")?;
        if arity > MAX_INPUT_SLOTS {
            return Err(self.error(format!("at most {MAX_INPUT_SLOTS} input slots are supported")));
        }
        self.expect(Tok::Semi, "`;`")?;
        let body = self.block_body()?;
        self.expect(Tok::RBrace, "`}`")?;
        if *self.peek() != Tok::Eof {
            return Err(self.error("unexpected text after the design"));
        }
        Ok((name, arity, body))
    }

    /// Statements up to (not including) the closing brace.
    fn block_body(&mut self) -> Result<Vec<PStmt>, ParseError> {
        let mut out = Vec::new();
        while !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn braced(&mut self) -> Result<Vec<PStmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let body = self.block_body()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(body)
    }

    fn stmt(&mut self) -> Result<PStmt, ParseError> {
        let (line, _) = self.here();
        match self.peek().clone() {
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let then_body = self.braced()?;
                let else_body = if *self.peek() == Tok::Else {
                    self.bump();
                    if *self.peek() == Tok::If {
                        vec![self.stmt()?]
                    } else {
                        self.braced()?
                    }
                } else {
                    Vec::new()
                };
                Ok(PStmt::If {
                    cond,
                    then_body,
                    else_body,
                    line,
                })
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.braced()?;
                Ok(PStmt::While { cond, body, line })
            }
            Tok::Output => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let value = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(PStmt::Output { value, line })
            }
            Tok::Halt => {
                self.bump();
                self.expect(Tok::Semi, "`;`")?;
                Ok(PStmt::Halt)
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(PStmt::Assign { name, value, line })
            }
            other => Err(self.error(format!("expected a statement, found {}", describe(&other)))),
        }
    }

    fn expr(&mut self) -> Result<PExpr, ParseError> {
        let (line, col) = self.here();
        let cond = self.binary(0)?;
        if *self.peek() == Tok::Question {
            self.bump();
            let then_e = self.expr()?;
            self.expect(Tok::Colon, "`:`")?;
            let else_e = self.expr()?;
            return Ok(PExpr::Ternary {
                cond: Box::new(cond),
                then_e: Box::new(then_e),
                else_e: Box::new(else_e),
                line,
                col,
            });
        }
        Ok(cond)
    }

    /// Precedence climbing over the C-like binary operator table.
    fn binary(&mut self, min_prec: u8) -> Result<PExpr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = binary_op(self.peek()) {
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = PExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PExpr, ParseError> {
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Tilde => UnOp::BitNot,
            Tok::Bang | Tok::Not => UnOp::Not,
            _ => return self.primary(),
        };
        self.bump();
        let inner = self.unary()?;
        Ok(PExpr::Unary(op, Box::new(inner)))
    }

    fn primary(&mut self) -> Result<PExpr, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Int(v) => Ok(PExpr::Int(v)),
            Tok::True => Ok(PExpr::Bool(true)),
            Tok::False => Ok(PExpr::Bool(false)),
            Tok::Ident(name) => Ok(PExpr::Var { name, line, col }),
            Tok::In => {
                self.expect(Tok::LBracket, "`[`")?;
                let slot = self.int("input slot index")?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(PExpr::Input { slot, line, col })
            }
            Tok::NextInput => {
                self.expect(Tok::LParen, "`(`")?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(PExpr::Next)
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            other => Err(ParseError::syntax(
                line,
                col,
                format!("expected an expression, found {}", describe(&other)),
            )),
        }
    }
}

fn binary_op(t: &Tok) -> Option<(BinOp, u8)> {
    Some(match t {
        Tok::Or | Tok::OrOr => (BinOp::Or, 1),
        Tok::And | Tok::AndAnd => (BinOp::And, 2),
        Tok::Pipe => (BinOp::BitOr, 3),
        Tok::Caret => (BinOp::BitXor, 4),
        Tok::Amp => (BinOp::BitAnd, 5),
        Tok::EqEq => (BinOp::Eq, 6),
        Tok::Ne => (BinOp::Ne, 6),
        Tok::Lt => (BinOp::Lt, 7),
        Tok::Le => (BinOp::Le, 7),
        Tok::Gt => (BinOp::Gt, 7),
        Tok::Ge => (BinOp::Ge, 7),
        Tok::Shl => (BinOp::Shl, 8),
        Tok::Shr => (BinOp::Shr, 8),
        Tok::Plus => (BinOp::Add, 9),
        Tok::Minus => (BinOp::Sub, 9),
        Tok::Star => (BinOp::Mul, 10),
        Tok::Slash => (BinOp::Div, 10),
        Tok::Percent => (BinOp::Rem, 10),
        _ => return None,
    })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Int(v) => format!("integer `{v}`"),
        Tok::Eof => "end of input".to_string(),
        other => format!("{other:?}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Word,
    Bool,
}

struct Lowerer {
    arity: u32,
    line: usize,
    vars: HashMap<String, VarId>,
    names: Vec<String>,
    temps: usize,
}

impl Lowerer {
    fn declare(&mut self, name: &str) -> VarId {
        if let Some(v) = self.vars.get(name) {
            return *v;
        }
        let id = VarId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.vars.insert(name.to_string(), id);
        id
    }

    fn fresh_temp(&mut self) -> VarId {
        loop {
            let name = format!("__t{}", self.temps);
            self.temps += 1;
            if !self.vars.contains_key(&name) {
                return self.declare(&name);
            }
        }
    }

    fn block(&mut self, stmts: Vec<PStmt>) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, &mut out)?;
        }
        Ok(out)
    }

    fn stmt(&mut self, s: PStmt, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        if let PStmt::Assign { line, .. }
        | PStmt::Output { line, .. }
        | PStmt::If { line, .. }
        | PStmt::While { line, .. } = &s
        {
            self.line = *line;
        }
        match s {
            PStmt::Assign { name, value, line } => {
                let (e, ty) = self.expr(value, Some(out))?;
                if ty != Ty::Word {
                    return Err(ParseError::semantic(
                        line,
                        format!("cannot assign a boolean to `{name}`; variables hold words"),
                    ));
                }
                let var = self.declare(&name);
                out.push(Stmt::Assign(var, e));
            }
            PStmt::Output { value, line } => {
                let (e, ty) = self.expr(value, Some(out))?;
                if ty != Ty::Word {
                    return Err(ParseError::semantic(line, "output() takes a word, not a boolean"));
                }
                out.push(Stmt::Output(e));
            }
            PStmt::If {
                cond,
                then_body,
                else_body,
                line,
            } => {
                let cond = self.condition(cond, line)?;
                let then_body = self.block(then_body)?;
                let else_body = self.block(else_body)?;
                out.push(Stmt::If {
                    branch: UNNUMBERED,
                    cond,
                    then_body,
                    else_body,
                });
            }
            PStmt::While { cond, body, line } => {
                let cond = self.condition(cond, line)?;
                let body = self.block(body)?;
                out.push(Stmt::While {
                    branch: UNNUMBERED,
                    cond,
                    body,
                });
            }
            PStmt::Halt => out.push(Stmt::Halt),
        }
        Ok(())
    }

    fn type_error(&self, op: &str, want: Ty) -> ParseError {
        let what = match want {
            Ty::Word => "word",
            Ty::Bool => "boolean",
        };
        ParseError::semantic(self.line, format!("operator `{op}` expects {what} operands"))
    }

    fn condition(&mut self, cond: PExpr, line: usize) -> Result<Expr, ParseError> {
        let (e, ty) = self.expr(cond, None)?;
        if ty != Ty::Bool {
            return Err(ParseError::semantic(
                line,
                "condition must be a comparison or logical expression",
            ));
        }
        Ok(e)
    }

    /// Lowers an expression. Ternaries are hoisted into `hoist` as if/else
    /// statements writing a fresh temporary; `None` forbids them.
    fn expr(&mut self, e: PExpr, mut hoist: Option<&mut Vec<Stmt>>) -> Result<(Expr, Ty), ParseError> {
        Ok(match e {
            PExpr::Int(v) => (Expr::Const(v), Ty::Word),
            PExpr::Bool(b) => (Expr::Bool(b), Ty::Bool),
            PExpr::Var { name, line, col } => match self.vars.get(&name) {
                Some(v) => (Expr::Var(*v), Ty::Word),
                None => {
                    return Err(ParseError::semantic_at(
                        line,
                        col,
                        format!("undeclared variable `{name}`"),
                    ))
                }
            },
            PExpr::Input { slot, line, col } => {
                if slot >= self.arity {
                    return Err(ParseError::semantic_at(
                        line,
                        col,
                        format!(
                            "input slot in[{slot}] is out of range (design declares {} inputs)",
                            self.arity
                        ),
                    ));
                }
                (Expr::Input(slot), Ty::Word)
            }
            PExpr::Next => (Expr::NextInput, Ty::Word),
            PExpr::Unary(op, inner) => {
                let (a, ty) = self.expr(*inner, hoist)?;
                let want = if op == UnOp::Not { Ty::Bool } else { Ty::Word };
                if ty != want {
                    return Err(self.type_error(op.symbol().trim(), want));
                }
                (Expr::Unary(op, Box::new(a)), want)
            }
            PExpr::Binary(op, l, r) => {
                let (a, ta) = self.expr(*l, hoist.as_deref_mut())?;
                let (b, tb) = self.expr(*r, hoist)?;
                let result = if op.is_logical() {
                    if ta != Ty::Bool || tb != Ty::Bool {
                        return Err(self.type_error(op.symbol(), Ty::Bool));
                    }
                    Ty::Bool
                } else if op.is_comparison() {
                    let equality = matches!(op, BinOp::Eq | BinOp::Ne);
                    if ta != tb || (!equality && ta != Ty::Word) {
                        return Err(self.type_error(op.symbol(), Ty::Word));
                    }
                    Ty::Bool
                } else {
                    if ta != Ty::Word || tb != Ty::Word {
                        return Err(self.type_error(op.symbol(), Ty::Word));
                    }
                    Ty::Word
                };
                (Expr::Binary(op, Box::new(a), Box::new(b)), result)
            }
            PExpr::Ternary {
                cond,
                then_e,
                else_e,
                line,
                col,
            } => {
                let Some(hoist) = hoist else {
                    return Err(ParseError::semantic_at(
                        line,
                        col,
                        "`?:` is only allowed in assignments and output()",
                    ));
                };
                let (c, tc) = self.expr(*cond, Some(hoist))?;
                if tc != Ty::Bool {
                    return Err(ParseError::semantic_at(line, col, "`?:` condition must be boolean"));
                }
                let mut then_body = Vec::new();
                let (t, tt) = self.expr(*then_e, Some(&mut then_body))?;
                let mut else_body = Vec::new();
                let (f, tf) = self.expr(*else_e, Some(&mut else_body))?;
                if tt != Ty::Word || tf != Ty::Word {
                    return Err(ParseError::semantic_at(line, col, "`?:` arms must be words"));
                }
                let tmp = self.fresh_temp();
                then_body.push(Stmt::Assign(tmp, t));
                else_body.push(Stmt::Assign(tmp, f));
                hoist.push(Stmt::If {
                    branch: UNNUMBERED,
                    cond: c,
                    then_body,
                    else_body,
                });
                (Expr::Var(tmp), Ty::Word)
            }
        })
    }
}

/// Assigns branch ids in pre-order: a conditional's id precedes every id in
/// its bodies, then-body before else-body.
fn number_branches(stmts: &mut [Stmt], next: &mut u32) {
    for s in stmts {
        match s {
            Stmt::If {
                branch,
                then_body,
                else_body,
                ..
            } => {
                *branch = BranchId(*next);
                *next += 1;
                number_branches(then_body, next);
                number_branches(else_body, next);
            }
            Stmt::While { branch, body, .. } => {
                *branch = BranchId(*next);
                *next += 1;
                number_branches(body, next);
            }
            _ => {}
        }
    }
}

pub fn parse_design(source: &str) -> Result<Design, ParseError> {
    let toks = tokenize(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let (name, arity, body) = parser.design()?;
    let mut lowerer = Lowerer {
        arity,
        line: 1,
        vars: HashMap::new(),
        names: Vec::new(),
        temps: 0,
    };
    let mut body = lowerer.block(body)?;
    let mut count = 0;
    number_branches(&mut body, &mut count);
    Ok(Design {
        name,
        input_arity: arity as usize,
        body,
        branch_count: count as usize,
        variables: lowerer.names,
    })
}
