// SPDX-License-Identifier: Apache-2.0

//! Differential oracle: any deviation of the design under test from the
//! golden model on the same test case is reported as a detection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Design;
use crate::exec::{execute, ExecutionTrace, RuntimeFault};
use crate::testcase::TestId;
use crate::Word;

/// Trusted reference behaviour.
#[derive(Debug, Clone)]
pub enum GoldenModel {
    Reference(Design),
    /// Exact input-to-output table.
    Table(HashMap<Vec<Word>, Vec<Word>>),
}

/// Golden-side result for one test case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenRun {
    pub outputs: Vec<Word>,
    pub fault: Option<RuntimeFault>,
    pub steps_used: u64,
}

impl GoldenModel {
    pub fn run(&self, words: &[Word], step_limit: u64) -> Result<GoldenRun, DetectorError> {
        match self {
            GoldenModel::Reference(d) => {
                let t = execute(d, words, step_limit);
                Ok(GoldenRun {
                    outputs: t.outputs.values,
                    fault: t.fault,
                    steps_used: t.steps_used,
                })
            }
            GoldenModel::Table(t) => t
                .get(words)
                .map(|o| GoldenRun {
                    outputs: o.clone(),
                    fault: None,
                    steps_used: 0,
                })
                .ok_or(DetectorError::GoldenUnavailable),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectorError {
    #[error("golden table has no entry for this test case")]
    GoldenUnavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub test_id: Option<TestId>,
    pub words: Vec<Word>,
    /// First output position where the traces disagree; equal to the common
    /// length when only the lengths or the fault tags differ.
    pub divergence_index: usize,
    pub dut_value: Option<Word>,
    pub golden_value: Option<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub detected: bool,
    pub witness: Option<Witness>,
}

/// First divergence between two output traces with their fault tags.
pub fn first_divergence(
    dut: &[Word],
    dut_fault: Option<RuntimeFault>,
    golden: &[Word],
    golden_fault: Option<RuntimeFault>,
) -> Option<(usize, Option<Word>, Option<Word>)> {
    let common = dut.len().min(golden.len());
    if let Some(i) = (0..common).find(|i| dut[*i] != golden[*i]) {
        return Some((i, Some(dut[i]), Some(golden[i])));
    }
    if dut.len() != golden.len() || dut_fault != golden_fault {
        return Some((common, dut.get(common).copied(), golden.get(common).copied()));
    }
    None
}

/// Compares an already computed DUT trace against the golden model.
pub fn check_trace(
    dut_trace: &ExecutionTrace,
    golden: &GoldenModel,
    words: &[Word],
    test_id: Option<TestId>,
    step_limit: u64,
) -> Result<(DetectionVerdict, GoldenRun), DetectorError> {
    let g = golden.run(words, step_limit)?;
    let verdict = match first_divergence(&dut_trace.outputs.values, dut_trace.fault, &g.outputs, g.fault) {
        None => DetectionVerdict {
            detected: false,
            witness: None,
        },
        Some((i, dv, gv)) => DetectionVerdict {
            detected: true,
            witness: Some(Witness {
                test_id,
                words: words.to_vec(),
                divergence_index: i,
                dut_value: dv,
                golden_value: gv,
            }),
        },
    };
    Ok((verdict, g))
}

/// Runs both models on `words` and compares their full output traces.
pub fn check(
    dut: &Design,
    golden: &GoldenModel,
    words: &[Word],
    step_limit: u64,
) -> Result<DetectionVerdict, DetectorError> {
    let t = execute(dut, words, step_limit);
    check_trace(&t, golden, words, None, step_limit).map(|(v, _)| v)
}

/// Debug dump of a detection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessDump {
    pub test: Vec<Word>,
    pub dut_trace: Vec<Word>,
    pub golden_trace: Vec<Word>,
    pub divergence_index: usize,
}

pub fn witness_dump(
    dut: &Design,
    golden: &GoldenModel,
    witness: &Witness,
    step_limit: u64,
) -> Result<WitnessDump, DetectorError> {
    let d = execute(dut, &witness.words, step_limit);
    let g = golden.run(&witness.words, step_limit)?;
    Ok(WitnessDump {
        test: witness.words.clone(),
        dut_trace: d.outputs.values,
        golden_trace: g.outputs,
        divergence_index: witness.divergence_index,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

fn parse_word(tok: &str) -> Option<Word> {
    let tok = tok.trim_end_matches(',');
    if let Some(h) = tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")) {
        Word::from_str_radix(h, 16).ok()
    } else {
        tok.parse().ok()
    }
}

/// Parses a golden table: one `<input words> => <output words>` line per
/// entry, `#` starts a comment, words are decimal or `0x` hex.
pub fn parse_table(text: &str) -> Result<HashMap<Vec<Word>, Vec<Word>>, TableError> {
    let mut out = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| TableError {
            line: n + 1,
            message: message.to_string(),
        };
        let (lhs, rhs) = line.split_once("=>").ok_or_else(|| err("missing `=>`"))?;
        let words = |s: &str| -> Result<Vec<Word>, TableError> {
            s.split_whitespace()
                .map(|t| parse_word(t).ok_or_else(|| err(&format!("bad word `{t}`"))))
                .collect()
        };
        let input = words(lhs)?;
        if out.insert(input, words(rhs)?).is_some() {
            return Err(err("duplicate input"));
        }
    }
    Ok(out)
}
