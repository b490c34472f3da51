// SPDX-License-Identifier: Apache-2.0

//! Sound unsigned interval arithmetic and domain narrowing.

use crate::concolic::{Sym, SymNode};
use crate::ops::{BinOp, UnOp};
use crate::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: Word,
    pub hi: Word,
}

impl Interval {
    pub const FULL: Interval = Interval { lo: 0, hi: Word::MAX };
    pub const BOOL: Interval = Interval { lo: 0, hi: 1 };

    pub fn point(v: Word) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn truth(b: bool) -> Self {
        Interval::point(b as Word)
    }

    pub fn width(self) -> u64 {
        self.hi as u64 - self.lo as u64 + 1
    }

    pub fn contains(self, v: Word) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_point(self) -> bool {
        self.lo == self.hi
    }

    /// Intersection; `None` when empty.
    pub fn meet(self, other: Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Smallest all-ones mask covering `v`.
fn ones_cover(v: Word) -> Word {
    if v == 0 {
        0
    } else {
        Word::MAX >> v.leading_zeros()
    }
}

fn wrap_range(lo: u64, hi: u64) -> Interval {
    const M: u64 = 1 << 32;
    if hi < M {
        Interval {
            lo: lo as Word,
            hi: hi as Word,
        }
    } else if lo >= M && hi < 2 * M {
        Interval {
            lo: (lo - M) as Word,
            hi: (hi - M) as Word,
        }
    } else {
        Interval::FULL
    }
}

/// Over-approximates the values of `e` over `doms` (indexed by input).
/// `None` means every evaluation faults.
pub fn eval_interval(e: &Sym, doms: &[Interval]) -> Option<Interval> {
    Some(match e.node() {
        SymNode::Const(v) => Interval::point(*v),
        SymNode::Input(i) => doms.get(*i as usize).copied().unwrap_or(Interval::FULL),
        SymNode::Unary(op, a) => {
            let a = eval_interval(a, doms)?;
            match op {
                UnOp::BitNot => Interval { lo: !a.hi, hi: !a.lo },
                UnOp::Neg => {
                    if a == Interval::point(0) {
                        a
                    } else if a.lo >= 1 {
                        Interval {
                            lo: a.hi.wrapping_neg(),
                            hi: a.lo.wrapping_neg(),
                        }
                    } else {
                        Interval::FULL
                    }
                }
                UnOp::Not => {
                    if a.lo > 0 {
                        Interval::truth(false)
                    } else if a.hi == 0 {
                        Interval::truth(true)
                    } else {
                        Interval::BOOL
                    }
                }
            }
        }
        SymNode::Binary(op, a, b) => {
            let a = eval_interval(a, doms)?;
            let b = eval_interval(b, doms)?;
            binary(*op, a, b)?
        }
    })
}

fn binary(op: BinOp, a: Interval, b: Interval) -> Option<Interval> {
    let (al, ah, bl, bh) = (a.lo as u64, a.hi as u64, b.lo as u64, b.hi as u64);
    Some(match op {
        BinOp::Add => wrap_range(al + bl, ah + bh),
        BinOp::Sub => {
            if al >= bh {
                Interval {
                    lo: (al - bh) as Word,
                    hi: (ah - bl) as Word,
                }
            } else if ah < bl {
                wrap_range(al + (1 << 32) - bh, ah + (1 << 32) - bl)
            } else {
                Interval::FULL
            }
        }
        BinOp::Mul => {
            if ah * bh <= Word::MAX as u64 {
                Interval {
                    lo: (al * bl) as Word,
                    hi: (ah * bh) as Word,
                }
            } else {
                Interval::FULL
            }
        }
        BinOp::Div => {
            if bh == 0 {
                return None;
            }
            let bl = bl.max(1);
            Interval {
                lo: (al / bh) as Word,
                hi: (ah / bl) as Word,
            }
        }
        BinOp::Rem => {
            if bh == 0 {
                return None;
            }
            if ah < bl {
                a
            } else {
                Interval {
                    lo: 0,
                    hi: a.hi.min(b.hi - 1),
                }
            }
        }
        BinOp::BitAnd => Interval {
            lo: 0,
            hi: a.hi.min(b.hi),
        },
        BinOp::BitOr => Interval {
            lo: a.lo.max(b.lo),
            hi: ones_cover(a.hi.max(b.hi)),
        },
        BinOp::BitXor => Interval {
            lo: 0,
            hi: ones_cover(a.hi.max(b.hi)),
        },
        BinOp::Shl => {
            if b.is_point() && bl < 32 && ah <= (Word::MAX >> bl) as u64 {
                Interval {
                    lo: a.lo << bl,
                    hi: a.hi << bl,
                }
            } else {
                Interval::FULL
            }
        }
        BinOp::Shr => {
            if b.is_point() {
                if bl >= 32 {
                    Interval::point(0)
                } else {
                    Interval {
                        lo: a.lo >> bl,
                        hi: a.hi >> bl,
                    }
                }
            } else {
                Interval { lo: 0, hi: a.hi }
            }
        }
        BinOp::Eq => {
            if a.is_point() && a == b {
                Interval::truth(true)
            } else if a.meet(b).is_none() {
                Interval::truth(false)
            } else {
                Interval::BOOL
            }
        }
        BinOp::Ne => {
            let eq = binary(BinOp::Eq, a, b)?;
            Interval {
                lo: 1 - eq.hi,
                hi: 1 - eq.lo,
            }
        }
        BinOp::Lt => decide(ah < bl, al >= bh),
        BinOp::Le => decide(ah <= bl, al > bh),
        BinOp::Gt => decide(al > bh, ah <= bl),
        BinOp::Ge => decide(al >= bh, ah < bl),
        BinOp::And => {
            if a.lo > 0 && b.lo > 0 {
                Interval::truth(true)
            } else if a.hi == 0 || b.hi == 0 {
                Interval::truth(false)
            } else {
                Interval::BOOL
            }
        }
        BinOp::Or => {
            if a.lo > 0 || b.lo > 0 {
                Interval::truth(true)
            } else if a.hi == 0 && b.hi == 0 {
                Interval::truth(false)
            } else {
                Interval::BOOL
            }
        }
    })
}

fn decide(always: bool, never: bool) -> Interval {
    if always {
        Interval::truth(true)
    } else if never {
        Interval::truth(false)
    } else {
        Interval::BOOL
    }
}

/// Whether atom `(e, polarity)` can still hold under `doms`.
pub fn atom_feasible(e: &Sym, polarity: bool, doms: &[Interval]) -> bool {
    match eval_interval(e, doms) {
        None => false,
        Some(iv) => {
            if polarity {
                iv.hi > 0
            } else {
                iv.lo == 0
            }
        }
    }
}

/// Narrows the domain of an input compared directly against another
/// expression. Returns `None` if a domain becomes empty, otherwise whether
/// anything changed.
pub fn narrow_atom(e: &Sym, polarity: bool, doms: &mut [Interval]) -> Option<bool> {
    if !polarity {
        return Some(false);
    }
    let SymNode::Binary(op, a, b) = e.node() else {
        return Some(false);
    };
    if !op.is_comparison() {
        return Some(false);
    }
    let mut changed = false;
    for (var_side, other, op) in [(a, b, *op), (b, a, op.mirrored_comparison().expect("comparison"))] {
        let SymNode::Input(i) = var_side.node() else {
            continue;
        };
        // an empty operand range means the atom cannot hold
        let o = eval_interval(other, doms)?;
        let Some(slot) = doms.get_mut(*i as usize) else {
            continue;
        };
        let cur = *slot;
        let bound = match op {
            BinOp::Eq => Some(o),
            BinOp::Ne => {
                if o.is_point() && cur.is_point() && cur.lo == o.lo {
                    return None;
                } else if o.is_point() && cur.lo == o.lo {
                    Some(Interval {
                        lo: cur.lo + 1,
                        hi: cur.hi,
                    })
                } else if o.is_point() && cur.hi == o.lo {
                    Some(Interval {
                        lo: cur.lo,
                        hi: cur.hi - 1,
                    })
                } else {
                    None
                }
            }
            BinOp::Lt => {
                if o.hi == 0 {
                    return None;
                }
                Some(Interval { lo: 0, hi: o.hi - 1 })
            }
            BinOp::Le => Some(Interval { lo: 0, hi: o.hi }),
            BinOp::Gt => {
                if o.lo == Word::MAX {
                    return None;
                }
                Some(Interval {
                    lo: o.lo + 1,
                    hi: Word::MAX,
                })
            }
            BinOp::Ge => Some(Interval {
                lo: o.lo,
                hi: Word::MAX,
            }),
            _ => None,
        };
        if let Some(bound) = bound {
            let next = cur.meet(bound)?;
            if next != cur {
                *slot = next;
                changed = true;
            }
        }
    }
    Some(changed)
}
