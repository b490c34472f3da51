// SPDX-License-Identifier: Apache-2.0

//! Solving one input at a time by inverting the operators on its path.

use crate::concolic::{Sym, SymNode};
use crate::ops::{BinOp, UnOp};
use crate::Word;

fn mentions(e: &Sym, v: u32) -> bool {
    match e.node() {
        SymNode::Const(_) => false,
        SymNode::Input(i) => *i == v,
        SymNode::Unary(_, a) => mentions(a, v),
        SymNode::Binary(_, a, b) => mentions(a, v) || mentions(b, v),
    }
}

/// Multiplicative inverse of an odd word modulo 2^32.
pub fn inverse_odd(m: Word) -> Word {
    debug_assert!(m & 1 == 1);
    let mut x = m;
    for _ in 0..5 {
        x = x.wrapping_mul(2u32.wrapping_sub(m.wrapping_mul(x)));
    }
    x
}

/// Some `x` with `x * c == t` (mod 2^32), if one exists.
pub fn solve_mul(c: Word, t: Word) -> Option<Word> {
    if c == 0 {
        return None;
    }
    let k = c.trailing_zeros();
    if t & ((1u32 << k) - 1) != 0 {
        return None;
    }
    Some((t >> k).wrapping_mul(inverse_odd(c >> k)))
}

/// A value `x` with `x op c` equal to `want`.
fn pick_comparison(op: BinOp, c: Word, want: bool) -> Option<Word> {
    let op = if want { op } else { op.negated_comparison()? };
    match op {
        BinOp::Eq | BinOp::Le | BinOp::Ge => Some(c),
        BinOp::Ne => Some(c.wrapping_add(1)),
        BinOp::Lt => c.checked_sub(1),
        BinOp::Gt => c.checked_add(1),
        _ => None,
    }
}

/// Value for input `v` that makes `e` evaluate to `t`, with every other
/// input read from `env`. The result is a candidate; callers re-evaluate.
pub fn invert(e: &Sym, v: u32, t: Word, env: &[Word]) -> Option<Word> {
    let get = |i: u32| env.get(i as usize).copied().unwrap_or(0);
    match e.node() {
        SymNode::Input(i) if *i == v => Some(t),
        SymNode::Const(_) | SymNode::Input(_) => None,
        SymNode::Unary(op, a) => match op {
            UnOp::BitNot => invert(a, v, !t, env),
            UnOp::Neg => invert(a, v, t.wrapping_neg(), env),
            UnOp::Not => match t {
                0 => invert(a, v, 1, env),
                1 => invert(a, v, 0, env),
                _ => None,
            },
        },
        SymNode::Binary(op, a, b) => {
            let (in_a, in_b) = (mentions(a, v), mentions(b, v));
            if in_a == in_b {
                return None;
            }
            let (side, other) = if in_a { (a, b) } else { (b, a) };
            let o = other.eval(&get).ok()?;
            let cur = side.eval(&get).ok()?;
            let want = match op {
                BinOp::Add => t.wrapping_sub(o),
                BinOp::Sub if in_a => t.wrapping_add(o),
                BinOp::Sub => o.wrapping_sub(t),
                BinOp::BitXor => t ^ o,
                BinOp::Mul => solve_mul(o, t)?,
                BinOp::Shl if in_a => {
                    if o >= 32 || t & ((1u32 << o) - 1) != 0 {
                        return None;
                    }
                    (t >> o) | (cur & !(Word::MAX >> o))
                }
                BinOp::Shr if in_a => {
                    if o >= 32 || (o > 0 && t >> (32 - o) != 0) {
                        return None;
                    }
                    (t << o) | (cur & ((1u32 << o) - 1))
                }
                BinOp::BitAnd => {
                    if t & !o != 0 {
                        return None;
                    }
                    (cur & !o) | t
                }
                BinOp::BitOr => {
                    if t & o != o {
                        return None;
                    }
                    (t & !o) | (cur & o)
                }
                BinOp::Rem if in_a => {
                    if o == 0 || t >= o {
                        return None;
                    }
                    (cur - cur % o).checked_add(t).unwrap_or(t)
                }
                BinOp::Div if in_a => {
                    if o == 0 {
                        return None;
                    }
                    t.checked_mul(o)?
                }
                op if op.is_comparison() => {
                    let op = if in_a { *op } else { op.mirrored_comparison()? };
                    let truth = match t {
                        0 => false,
                        1 => true,
                        _ => return None,
                    };
                    pick_comparison(op, o, truth)?
                }
                BinOp::And => match t {
                    1 if o != 0 => 1,
                    0 if o != 0 => 0,
                    _ => return None,
                },
                BinOp::Or => match t {
                    1 if o == 0 => 1,
                    0 if o == 0 => 0,
                    _ => return None,
                },
                _ => return None,
            };
            invert(side, v, want, env)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn i(k: u32) -> Sym {
        Sym::input(k)
    }
    fn c(v: Word) -> Sym {
        Sym::constant(v)
    }
    fn bin(op: BinOp, a: Sym, b: Sym) -> Sym {
        Sym::binary(op, a, b)
    }

    #[test]
    fn inverts_affine_chains() {
        // 3*x0 + 5*x1 == 1592594996 solved for x0
        let e = bin(BinOp::Add, bin(BinOp::Mul, c(3), i(0)), bin(BinOp::Mul, c(5), i(1)));
        let env = [0, 11];
        let x = invert(&e, 0, 1_592_594_996, &env).unwrap();
        assert_eq!(e.eval_words(&[x, 11]), Ok(1_592_594_996));
    }

    #[test]
    fn inverts_comparisons_and_masks() {
        let e = bin(BinOp::Eq, bin(BinOp::BitAnd, i(0), c(0xff)), c(0x42));
        let x = invert(&e, 0, 1, &[0x1234_5600]).unwrap();
        assert_eq!(x, 0x1234_5642);
        let lt = bin(BinOp::Lt, c(10), i(0));
        let x = invert(&lt, 0, 1, &[0]).unwrap();
        assert!(x > 10);
        assert_eq!(invert(&bin(BinOp::Lt, i(0), c(0)), 0, 1, &[5]), None);
    }

    #[test]
    fn refuses_shared_variables() {
        let e = bin(BinOp::Add, i(0), i(0));
        assert_eq!(invert(&e, 0, 4, &[0]), None);
    }

    proptest! {
        #[test]
        fn mul_inverse_is_exact(c in any::<u32>(), x in any::<u32>()) {
            let t = x.wrapping_mul(c);
            if let Some(y) = solve_mul(c, t) {
                prop_assert_eq!(y.wrapping_mul(c), t);
            } else {
                prop_assert_eq!(c, 0);
            }
        }

        #[test]
        fn successful_inversions_are_exact(
            op in 0usize..10, k in any::<u32>(), t in any::<u32>(), x in any::<u32>(), left in any::<bool>()
        ) {
            let ops = [BinOp::Add, BinOp::Sub, BinOp::BitXor, BinOp::Mul, BinOp::Shl,
                       BinOp::Shr, BinOp::BitAnd, BinOp::BitOr, BinOp::Rem, BinOp::Div];
            let op = ops[op];
            let k = if matches!(op, BinOp::Shl | BinOp::Shr) { k % 40 } else { k };
            let e = if left { bin(op, i(0), c(k)) } else { bin(op, c(k), i(0)) };
            if let Some(y) = invert(&e, 0, t, &[x]) {
                prop_assert_eq!(e.eval_words(&[y]), Ok(t));
            }
        }
    }
}
