// SPDX-License-Identifier: Apache-2.0

//! Hybrid fuzzing and concolic test generation for trojan detection in
//! small imperative hardware designs.
//!
//! Designs are written in a tiny DSL ([`dsl`]), executed by an instrumented
//! interpreter ([`exec`]), explored by a coverage-guided fuzzer ([`fuzz`]) and
//! a concolic engine ([`concolic`], [`solver`]), and checked against a golden
//! model ([`detector`]). [`orchestrator`] alternates the two generators and
//! [`report`] serializes the outcome.

/// Machine word of the design language. All arithmetic wraps modulo 2^32.
pub type Word = u32;

pub mod clock;
pub mod concolic;
pub mod corpus;
pub mod detector;
pub mod dsl;
pub mod exec;
pub mod fuzz;
pub mod ops;
pub mod orchestrator;
pub mod report;
pub mod solver;
pub mod testcase;

pub use dsl::{parse_design, BranchEdge, BranchId, Design};
pub use testcase::{Origin, PhaseId, PhaseKind, TestCase, TestId};
