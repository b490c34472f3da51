// SPDX-License-Identifier: Apache-2.0

//! Deterministic and havoc mutation stages.

use rand::Rng;

use crate::dsl::Design;
use crate::Word;

/// Boundary values tried in every 32-bit lane.
pub const BASE_INTERESTING: [Word; 11] = [
    0,
    1,
    (1 << 7) - 1,
    1 << 7,
    (1 << 8) - 1,
    (1 << 15) - 1,
    1 << 15,
    (1 << 16) - 1,
    (1 << 20) - 1,
    (1 << 31) - 1,
    u32::MAX,
];

/// Havoc children never grow beyond this many words.
pub const MAX_HAVOC_LEN: usize = 4096;

const ARITH_DELTAS: [i32; 8] = [1, -1, 4, -4, 16, -16, 32, -32];

/// Builds the substitution table; with `design_literals` the design's integer
/// literals are appended after the base values.
pub fn interesting_values(design: &Design, design_literals: bool) -> Vec<Word> {
    let mut table = BASE_INTERESTING.to_vec();
    if design_literals {
        for lit in design.literals() {
            if !table.contains(&lit) {
                table.push(lit);
            }
        }
    }
    table
}

/// Number of children the deterministic stage yields for a `len`-word input.
pub fn deterministic_count(len: usize, table_len: usize) -> usize {
    // bit flips, byte flips, byte/16-bit/32-bit arithmetic, substitution
    len * (32 + 4 + 4 * 8 + 2 * 8 + 8 + table_len)
}

fn add_lane(word: Word, shift: u32, width: u32, delta: i32) -> Word {
    let mask: u64 = (1u64 << width) - 1;
    let lane = ((word as u64) >> shift) & mask;
    let next = (lane as i64 + delta as i64).rem_euclid(1i64 << width) as u64;
    let cleared = (word as u64) & !(mask << shift);
    (cleared | (next << shift)) as Word
}

/// The `i`-th deterministic child of `words`, in stage order:
/// single-bit flips, byte flips, ±1/±4/±16/±32 on byte lanes, aligned
/// 16-bit lanes and whole words, then substitution of each word with each
/// table value. `None` once `i` is past the end.
pub fn deterministic_child(words: &[Word], table: &[Word], i: usize) -> Option<Vec<Word>> {
    let w = words.len();
    let mut out = words.to_vec();
    let mut i = i;

    if i < 32 * w {
        out[i / 32] ^= 1 << (i % 32);
        return Some(out);
    }
    i -= 32 * w;
    if i < 4 * w {
        out[i / 4] ^= 0xff << (8 * (i % 4));
        return Some(out);
    }
    i -= 4 * w;
    for (lanes, width) in [(4usize, 8u32), (2, 16), (1, 32)] {
        let n = lanes * w * ARITH_DELTAS.len();
        if i < n {
            let lane = i / ARITH_DELTAS.len();
            let delta = ARITH_DELTAS[i % ARITH_DELTAS.len()];
            let word = lane / lanes;
            let shift = (lane % lanes) as u32 * width;
            out[word] = add_lane(out[word], shift, width, delta);
            return Some(out);
        }
        i -= n;
    }
    if i < w * table.len() {
        out[i / table.len()] = table[i % table.len()];
        return Some(out);
    }
    None
}

/// Applies 1 to 16 stacked random operations.
pub fn mutate_havoc<R: Rng + ?Sized>(words: &[Word], rng: &mut R) -> Vec<Word> {
    let mut out = words.to_vec();
    let ops = rng.gen_range(1..=16);
    for _ in 0..ops {
        havoc_op(&mut out, rng);
    }
    out
}

fn havoc_op<R: Rng + ?Sized>(out: &mut Vec<Word>, rng: &mut R) {
    let len = out.len();
    match rng.gen_range(0..6) {
        0 if len > 0 => {
            let i = rng.gen_range(0..len);
            out[i] ^= 1 << rng.gen_range(0..32);
        }
        1 if len > 0 => {
            let i = rng.gen_range(0..len);
            let shift = 8 * rng.gen_range(0..4);
            let byte: Word = rng.gen_range(0..=255);
            out[i] = (out[i] & !(0xff << shift)) | (byte << shift);
        }
        2 if len > 0 => {
            let i = rng.gen_range(0..len);
            out[i] = rng.gen();
        }
        3 if len > 0 => {
            let start = rng.gen_range(0..len);
            let n = rng.gen_range(1..=(len - start).min(16));
            out.drain(start..start + n);
        }
        4 => {
            if len == 0 {
                out.push(rng.gen());
            } else if len < MAX_HAVOC_LEN {
                let start = rng.gen_range(0..len);
                let n = rng.gen_range(1..=(len - start).min(16)).min(MAX_HAVOC_LEN - len);
                let block: Vec<Word> = out[start..start + n].to_vec();
                let at = rng.gen_range(0..=len);
                out.splice(at..at, block);
            }
        }
        5 if len > 1 => {
            let a = rng.gen_range(0..len);
            let b = rng.gen_range(0..len);
            out.swap(a, b);
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_design;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_children(words: &[Word], table: &[Word]) -> Vec<Vec<Word>> {
        (0..).map_while(|i| deterministic_child(words, table, i)).collect()
    }

    #[test]
    fn one_word_has_32_bit_and_4_byte_flips() {
        let kids = all_children(&[0], &BASE_INTERESTING);
        assert_eq!(kids.len(), deterministic_count(1, BASE_INTERESTING.len()));
        for (i, k) in kids[..32].iter().enumerate() {
            assert_eq!(k[0], 1 << i);
        }
        assert_eq!(
            kids[32..36],
            [vec![0xff], vec![0xff00], vec![0xff_0000], vec![0xff00_0000]]
        );
    }

    #[test]
    fn word_increment_and_substitution() {
        let kids = all_children(&[0], &BASE_INTERESTING);
        // first 32-bit lane delta is +1
        let word_stage = 32 + 4 + 32 + 16;
        assert_eq!(kids[word_stage], vec![1]);
        assert_eq!(kids[word_stage + 1], vec![u32::MAX]);
        assert!(all_children(&[5], &BASE_INTERESTING).contains(&vec![1_048_575]));
    }

    #[test]
    fn byte_lane_arithmetic_wraps_inside_the_lane() {
        assert_eq!(add_lane(0x0000_00ff, 0, 8, 1), 0);
        assert_eq!(add_lane(0x0001_0000, 16, 8, -1), 0x0000_0000);
        assert_eq!(add_lane(0x0000_0000, 16, 16, -1), 0xffff_0000);
    }

    #[test]
    fn design_literals_extend_the_table() {
        let d = parse_design("design d { inputs 1; if (in[0] == 23978) { output(1); } }").unwrap();
        assert!(interesting_values(&d, true).contains(&23978));
        assert_eq!(interesting_values(&d, false), BASE_INTERESTING.to_vec());
    }

    #[test]
    fn havoc_is_reproducible() {
        let a = mutate_havoc(&[0, 0], &mut ChaCha8Rng::seed_from_u64(42));
        let b = mutate_havoc(&[0, 0], &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn havoc_golden_seed_42() {
        // frozen from the first run of this implementation
        let got = mutate_havoc(&[0, 0], &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(got, HAVOC_GOLDEN_42.to_vec());
    }

    const HAVOC_GOLDEN_42: &[Word] = &[0, 0, 0];

    #[test]
    fn havoc_reaches_degenerate_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut saw_empty = false;
        let mut saw_clone = false;
        for _ in 0..5000 {
            let k = mutate_havoc(&[7], &mut rng);
            saw_empty |= k.is_empty();
            saw_clone |= k == vec![7, 7];
        }
        assert!(saw_empty && saw_clone);
    }

    proptest! {
        #[test]
        fn every_bit_flip_differs_in_one_bit(words in proptest::collection::vec(any::<u32>(), 1..6)) {
            for i in 0..32 * words.len() {
                let k = deterministic_child(&words, &[], i).unwrap();
                let diff: u32 = k.iter().zip(&words).map(|(a, b)| (a ^ b).count_ones()).sum();
                prop_assert_eq!(diff, 1);
            }
            let n = deterministic_count(words.len(), 3);
            prop_assert!(deterministic_child(&words, &[1, 2, 3], n - 1).is_some());
            prop_assert!(deterministic_child(&words, &[1, 2, 3], n).is_none());
        }

        #[test]
        fn havoc_respects_length_cap(words in proptest::collection::vec(any::<u32>(), 0..64), seed in any::<u64>()) {
            let k = mutate_havoc(&words, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(k.len() <= MAX_HAVOC_LEN.max(words.len()));
        }
    }
}
