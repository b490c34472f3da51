// SPDX-License-Identifier: Apache-2.0

use fuce_core::corpus::{builtin_suite, controller, CycleScale};
use fuce_core::dsl::pretty_print;
use fuce_core::exec::execute;
use fuce_core::parse_design;
use proptest::prelude::*;

#[test]
fn corpus_designs_survive_pretty_printing() {
    for e in builtin_suite() {
        let printed = pretty_print(&e.dut);
        let again = parse_design(&printed).unwrap_or_else(|err| panic!("{}: {err}\n{printed}", e.name));
        assert_eq!(again, e.dut, "{}", e.name);
        assert_eq!(pretty_print(&again), printed);
    }
}

#[test]
fn parsing_is_deterministic() {
    let c = controller(CycleScale::Desk);
    for _ in 0..3 {
        assert_eq!(parse_design(&c.dut_source).unwrap(), c.dut);
    }
}

#[test]
fn every_branch_site_contributes_two_edges() {
    for e in builtin_suite() {
        assert_eq!(e.dut.all_edges().len(), 2 * e.dut.branch_count, "{}", e.name);
        assert_eq!(e.dut.edge_count(), 2 * e.dut.branch_count);
    }
}

#[test]
fn ternaries_get_their_own_branch() {
    let d = parse_design("design t { inputs 1; x = in[0] > 3 ? 1 : 2; output(x); }").unwrap();
    assert_eq!(d.branch_count, 1);
    assert_eq!(execute(&d, &[9], 100).outputs.values, vec![1]);
    assert_eq!(execute(&d, &[0], 100).outputs.values, vec![2]);
}

#[test]
fn type_errors_are_rejected() {
    for src in [
        "design t { inputs 1; x = in[0] < 2; }",
        "design t { inputs 1; if (in[0]) { halt; } }",
        "design t { inputs 1; output(y); }",
        "design t { inputs 1; x = in[1]; }",
    ] {
        assert!(parse_design(src).is_err(), "{src}");
    }
}

proptest! {
    #[test]
    fn printed_designs_execute_identically(words in prop::collection::vec(any::<u32>(), 0..16)) {
        for e in builtin_suite() {
            let again = parse_design(&pretty_print(&e.dut)).unwrap();
            prop_assert_eq!(execute(&e.dut, &words, 20_000), execute(&again, &words, 20_000));
        }
    }
}
