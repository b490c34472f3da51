// SPDX-License-Identifier: Apache-2.0

//! Test cases and their on-disk forms.
//!
//! The binary `.tc` form is a raw sequence of little-endian 32-bit words.
//! The JSON debug form is `{"words":[...]}`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Word;

/// Position of a test case in the campaign queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestId(pub u64);

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Seed,
    FuzzDeterministic,
    FuzzHavoc,
    Concolic,
}

impl Origin {
    /// Short tag used in queue file names.
    pub fn tag(self) -> &'static str {
        match self {
            Origin::Seed => "seed",
            Origin::FuzzDeterministic => "det",
            Origin::FuzzHavoc => "havoc",
            Origin::Concolic => "concolic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Fuzz,
    Conc,
}

/// A phase of a campaign: `fuzz_1`, `conc_1`, `fuzz_2`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseId {
    pub kind: PhaseKind,
    pub index: u32,
}

impl PhaseId {
    pub const FIRST: PhaseId = PhaseId {
        kind: PhaseKind::Fuzz,
        index: 1,
    };

    pub fn fuzz(index: u32) -> Self {
        PhaseId {
            kind: PhaseKind::Fuzz,
            index,
        }
    }

    pub fn conc(index: u32) -> Self {
        PhaseId {
            kind: PhaseKind::Conc,
            index,
        }
    }

    /// The phase that follows this one in strict alternation.
    pub fn next(self) -> Self {
        match self.kind {
            PhaseKind::Fuzz => PhaseId::conc(self.index),
            PhaseKind::Conc => PhaseId::fuzz(self.index + 1),
        }
    }

    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PhaseKind::Fuzz => "fuzz",
            PhaseKind::Conc => "conc",
        };
        write!(f, "{kind}_{}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub words: Vec<Word>,
    pub origin: Origin,
    pub phase: PhaseId,
    pub parent: Option<TestId>,
}

impl TestCase {
    pub fn new(words: Vec<Word>, origin: Origin, phase: PhaseId, parent: Option<TestId>) -> Self {
        TestCase {
            words,
            origin,
            phase,
            parent,
        }
    }

    pub fn seed(words: Vec<Word>) -> Self {
        TestCase::new(words, Origin::Seed, PhaseId::FIRST, None)
    }
}

#[derive(Debug, Error)]
pub enum TestCaseError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: length {len} is not a multiple of 4 bytes")]
    Truncated { path: PathBuf, len: usize },
    #[error("{path}: invalid JSON test case: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct JsonForm {
    words: Vec<Word>,
}

pub fn encode_words(words: &[Word]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

pub fn decode_words(bytes: &[u8]) -> Option<Vec<Word>> {
    if !bytes.len().is_multiple_of(4) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| Word::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    )
}

pub fn words_to_json(words: &[Word]) -> String {
    serde_json::to_string(&JsonForm { words: words.to_vec() }).expect("word vectors always serialize")
}

pub fn words_from_json(text: &str) -> Result<Vec<Word>, serde_json::Error> {
    serde_json::from_str::<JsonForm>(text).map(|j| j.words)
}

/// Reads a `.tc` (binary) or `.json` test case.
pub fn read_words(path: &Path) -> Result<Vec<Word>, TestCaseError> {
    let io = |source| TestCaseError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(io)?;
        words_from_json(&text).map_err(|source| TestCaseError::Json {
            path: path.to_path_buf(),
            source,
        })
    } else {
        let bytes = fs::read(path).map_err(io)?;
        decode_words(&bytes).ok_or(TestCaseError::Truncated {
            path: path.to_path_buf(),
            len: bytes.len(),
        })
    }
}

pub fn write_words(path: &Path, words: &[Word]) -> Result<(), TestCaseError> {
    fs::write(path, encode_words(words)).map_err(|source| TestCaseError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every `.tc` and `.json` file in `dir` as a seed, in file-name order.
pub fn load_seed_dir(dir: &Path) -> Result<Vec<TestCase>, TestCaseError> {
    let io = |source| TestCaseError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "tc" || e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_words(p).map(TestCase::seed)).collect()
}
