// SPDX-License-Identifier: Apache-2.0

//! Branch-distance fitness and the search stages built on it.

use rand::seq::SliceRandom;
use rand::Rng;

use super::invert::invert;
use super::Ctx;
use crate::concolic::{Sym, SymNode};
use crate::ops::{BinOp, UnOp};
use crate::Word;

/// Distance charged for an atom whose evaluation faults.
const FAULT_DISTANCE: u128 = 1 << 40;

/// Lexicographic: fewer violated atoms first, then smaller total distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fitness {
    pub violated: u32,
    pub distance: u128,
}

impl Fitness {
    pub fn of(atoms: &[(Sym, bool)], env: &[Word]) -> Fitness {
        let get = |i: u32| env.get(i as usize).copied().unwrap_or(0);
        let mut f = Fitness {
            violated: 0,
            distance: 0,
        };
        for (e, p) in atoms {
            let holds = e.eval(&get).is_ok_and(|v| (v != 0) == *p);
            if !holds {
                f.violated += 1;
                f.distance += branch_distance(e, *p, env).max(1);
            }
        }
        f
    }

    pub fn is_sat(self) -> bool {
        self.violated == 0
    }
}

/// How far `(e != 0) == p` is from holding under `env`; 0 when it holds.
pub fn branch_distance(e: &Sym, p: bool, env: &[Word]) -> u128 {
    let get = |i: u32| env.get(i as usize).copied().unwrap_or(0);
    match e.node() {
        SymNode::Unary(UnOp::Not, a) => branch_distance(a, !p, env),
        SymNode::Binary(BinOp::And, a, b) if p => branch_distance(a, true, env) + branch_distance(b, true, env),
        SymNode::Binary(BinOp::And, a, b) => branch_distance(a, false, env).min(branch_distance(b, false, env)),
        SymNode::Binary(BinOp::Or, a, b) if p => branch_distance(a, true, env).min(branch_distance(b, true, env)),
        SymNode::Binary(BinOp::Or, a, b) => branch_distance(a, false, env) + branch_distance(b, false, env),
        SymNode::Binary(op, a, b) if op.is_comparison() => {
            let op = if p {
                *op
            } else {
                op.negated_comparison().expect("comparison")
            };
            let (Ok(x), Ok(y)) = (a.eval(&get), b.eval(&get)) else {
                return FAULT_DISTANCE;
            };
            let (x, y) = (x as u128, y as u128);
            match op {
                BinOp::Eq => x.abs_diff(y),
                BinOp::Ne => (x == y) as u128,
                BinOp::Lt => (x + 1).saturating_sub(y),
                BinOp::Le => x.saturating_sub(y),
                BinOp::Gt => (y + 1).saturating_sub(x),
                BinOp::Ge => y.saturating_sub(x),
                _ => unreachable!("comparison"),
            }
        }
        _ => match e.eval(&get) {
            Err(_) => FAULT_DISTANCE,
            Ok(v) => ((v != 0) != p) as u128,
        },
    }
}

fn try_value(ctx: &mut Ctx<'_>, env: &mut [Word], v: usize, x: Word, cur: &mut super::Fitness) -> bool {
    let old = env[v];
    if x == old {
        return false;
    }
    env[v] = x;
    let f = ctx.fitness(env);
    if f < *cur {
        *cur = f;
        true
    } else {
        env[v] = old;
        false
    }
}

fn inversion_moves(ctx: &mut Ctx<'_>, env: &mut [Word], cur: &mut Fitness, only: Option<u32>) -> bool {
    let get = |env: &[Word], i: u32| env.get(i as usize).copied().unwrap_or(0);
    let atoms = ctx.atoms.clone();
    let mut improved = false;
    for (e, p) in &atoms {
        if e.eval(&|i| get(env, i)).is_ok_and(|v| (v != 0) == *p) {
            continue;
        }
        for v in e.inputs() {
            if only.is_some_and(|o| o != v) {
                continue;
            }
            ctx.stats.propagations += 1;
            if let Some(x) = invert(e, v, *p as Word, env) {
                if try_value(ctx, env, v as usize, x, cur) {
                    improved = true;
                    break;
                }
            }
            if ctx.expired() {
                return improved;
            }
        }
    }
    improved
}

/// Repeated direct inversion of violated atoms while it makes progress.
pub(super) fn propagate_inversions(ctx: &mut Ctx<'_>, env: &mut [Word]) -> bool {
    let mut cur = ctx.fitness(env);
    for _ in 0..8 {
        if cur.is_sat() || ctx.expired() {
            break;
        }
        if !inversion_moves(ctx, env, &mut cur, None) {
            break;
        }
    }
    cur.is_sat()
}

fn climb(ctx: &mut Ctx<'_>, env: &mut [Word], cur: &mut Fitness, order: &[u32]) -> bool {
    for &v in order {
        let vi = v as usize;
        for dir in [1u32, u32::MAX] {
            let x = env[vi];
            if try_value(ctx, env, vi, x.wrapping_add(dir), cur) {
                let mut step: u32 = 2;
                while step != 0 {
                    let x = env[vi];
                    if !try_value(ctx, env, vi, x.wrapping_add(dir.wrapping_mul(step)), cur) {
                        break;
                    }
                    step = step.wrapping_mul(2);
                    if ctx.expired() {
                        break;
                    }
                }
                return true;
            }
            if ctx.expired() {
                return false;
            }
        }
        for bit in 0..32 {
            let x = env[vi] ^ (1 << bit);
            if try_value(ctx, env, vi, x, cur) {
                return true;
            }
        }
        if inversion_moves(ctx, env, cur, Some(v)) {
            return true;
        }
        if ctx.expired() {
            return false;
        }
    }
    false
}

fn constants(atoms: &[(Sym, bool)]) -> Vec<Word> {
    fn walk(e: &Sym, out: &mut Vec<Word>) {
        match e.node() {
            SymNode::Const(c) => out.extend([*c, c.wrapping_add(1), c.wrapping_sub(1)]),
            SymNode::Input(_) => {}
            SymNode::Unary(_, a) => walk(a, out),
            SymNode::Binary(_, a, b) => {
                walk(a, out);
                walk(b, out);
            }
        }
    }
    let mut out = vec![0, 1, Word::MAX];
    for (e, _) in atoms {
        walk(e, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Alternating-variable hill climbing with bit flips and inversion moves,
/// restarting from perturbed points when stuck.
pub(super) fn local_search<R: Rng>(ctx: &mut Ctx<'_>, env: &mut [Word], rng: &mut R) -> bool {
    let pool = constants(&ctx.atoms);
    let vars = ctx.vars.clone();
    if vars.is_empty() {
        return ctx.fitness(env).is_sat();
    }
    let mut cur = ctx.fitness(env);
    let mut order = vars.clone();
    loop {
        if cur.is_sat() {
            return true;
        }
        if ctx.expired() {
            return false;
        }
        order.shuffle(rng);
        if climb(ctx, env, &mut cur, &order) {
            continue;
        }
        for &v in &vars {
            if rng.gen_bool(0.5) {
                let d = ctx.doms[v as usize];
                env[v as usize] = match rng.gen_range(0..3) {
                    0 => rng.gen(),
                    1 => rng.gen_range(d.lo..=d.hi),
                    _ => *pool.choose(rng).expect("non-empty pool"),
                };
            }
        }
        cur = ctx.fitness(env);
    }
}
