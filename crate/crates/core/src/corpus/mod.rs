// SPDX-License-Identifier: Apache-2.0

//! Built-in trojan benchmarks with golden counterparts.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::GoldenModel;
use crate::dsl::{parse_design, BranchEdge, BranchId, Design};
use crate::exec::execute;
use crate::testcase::{write_words, TestCase};
use crate::Word;

/// Trigger kind (combinational or sequential) and whether the payload
/// persists after the trigger condition goes away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrojanType {
    #[serde(rename = "CWOM")]
    Cwom,
    #[serde(rename = "CWM")]
    Cwm,
    #[serde(rename = "SWOM")]
    Swom,
    #[serde(rename = "SWM")]
    Swm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    High,
}

impl TrojanType {
    pub fn severity(self) -> Severity {
        match self {
            TrojanType::Cwm | TrojanType::Swm => Severity::High,
            TrojanType::Cwom | TrojanType::Swom => Severity::Low,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrojanType::Cwom => "CWOM",
            TrojanType::Cwm => "CWM",
            TrojanType::Swom => "SWOM",
            TrojanType::Swm => "SWM",
        }
    }
}

impl fmt::Display for TrojanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cycle threshold of the controller's bomb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleScale {
    /// 2^12 - 1, reachable in seconds.
    Desk,
    /// 2^20 - 1.
    Faithful,
}

impl CycleScale {
    pub fn limit(self) -> Word {
        match self {
            CycleScale::Desk => (1 << 12) - 1,
            CycleScale::Faithful => (1 << 20) - 1,
        }
    }
}

/// Planted trojan: where it fires and a test that fires it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trojan {
    pub kind: TrojanType,
    /// The trigger condition; its true edge fires the trojan.
    pub trigger_branch: BranchId,
    pub trigger_test: Vec<Word>,
    pub note: &'static str,
}

impl Trojan {
    pub fn severity(&self) -> Severity {
        self.kind.severity()
    }

    pub fn trigger_edge(&self) -> BranchEdge {
        BranchEdge::new(self.trigger_branch, true)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkEntry {
    pub name: &'static str,
    pub dut: Design,
    pub golden: GoldenModel,
    pub dut_source: String,
    pub golden_source: &'static str,
    /// `None` for the trojan-free control.
    pub trojan: Option<Trojan>,
    pub scale_params: Vec<(&'static str, Word)>,
}

const CONTROLLER: &str = include_str!("designs/controller.fd");
const CONTROLLER_GOLDEN: &str = include_str!("designs/controller.golden.fd");
const DESK_LIMIT_LINE: &str = "limit = 4095;";

/// Kind, trigger branch, trigger test and note.
type TrojanSpec = (TrojanType, u32, fn() -> Vec<Word>, &'static str);

struct Spec {
    name: &'static str,
    dut: &'static str,
    golden: &'static str,
    trojan: Option<TrojanSpec>,
}

const SPECS: &[Spec] = &[
    Spec {
        name: "fir_filter",
        dut: include_str!("designs/fir_filter.fd"),
        golden: include_str!("designs/fir_filter.golden.fd"),
        trojan: Some((
            TrojanType::Cwom,
            1,
            || vec![1_962_520_764, 0, 0, 0],
            "sum of products equal to 1592594996 forces the output",
        )),
    },
    Spec {
        name: "cipher",
        dut: include_str!("designs/cipher.fd"),
        golden: include_str!("designs/cipher.golden.fd"),
        trojan: Some((
            TrojanType::Cwom,
            2,
            || vec![0xdead_beef, 0x0bad_f00d, 0x1234_5678],
            "plaintext block deadbeef:0badf00d appends the key to the ciphertext",
        )),
    },
    Spec {
        name: "bubble_sort",
        dut: include_str!("designs/bubble_sort.fd"),
        golden: include_str!("designs/bubble_sort.golden.fd"),
        trojan: Some((
            TrojanType::Cwom,
            4,
            || vec![10, 9, 7, 8],
            "exactly five swaps with minimum 7 flips bit 7 of the minimum",
        )),
    },
    Spec {
        name: "sort_stream",
        dut: include_str!("designs/sort_stream.fd"),
        golden: include_str!("designs/sort_stream.golden.fd"),
        trojan: Some((
            TrojanType::Swm,
            2,
            || [1, 2].repeat(12),
            "twelfth pair latches a flag that duplicates the low word",
        )),
    },
    Spec {
        name: "adpcm",
        dut: include_str!("designs/adpcm.fd"),
        golden: include_str!("designs/adpcm.golden.fd"),
        trojan: Some((
            TrojanType::Swm,
            9,
            || vec![1000; 40],
            "fortieth sample latches a flag that inverts the magnitude bits",
        )),
    },
    Spec {
        name: "fir_stream",
        dut: include_str!("designs/fir_stream.fd"),
        golden: include_str!("designs/fir_stream.golden.fd"),
        trojan: Some((TrojanType::Swom, 2, || vec![2; 25], "twenty-fifth output is zeroed")),
    },
    Spec {
        name: "control",
        dut: include_str!("designs/control.fd"),
        golden: include_str!("designs/control.fd"),
        trojan: None,
    },
];

fn parse_builtin(src: &str) -> Design {
    parse_design(src).unwrap_or_else(|e| panic!("built-in design does not parse: {e}"))
}

/// The state-machine controller with its cycle bomb set to `scale`.
pub fn controller(scale: CycleScale) -> BenchmarkEntry {
    let limit = scale.limit();
    let source = CONTROLLER.replace(DESK_LIMIT_LINE, &format!("limit = {limit};"));
    // 511 per command after the two state words
    let cmds = (limit as usize).div_ceil(511) + 1;
    let mut trigger = vec![23978, 5678];
    trigger.extend(std::iter::repeat_n(511, cmds));
    BenchmarkEntry {
        name: "controller",
        dut: parse_builtin(&source),
        golden: GoldenModel::Reference(parse_builtin(CONTROLLER_GOLDEN)),
        dut_source: source,
        golden_source: CONTROLLER_GOLDEN,
        trojan: Some(Trojan {
            kind: TrojanType::Swm,
            trigger_branch: BranchId(5),
            trigger_test: trigger,
            note: "state guard 23978/5678, then accumulated command weight reaches the limit",
        }),
        scale_params: vec![("cycle_limit", limit)],
    }
}

/// Every built-in benchmark; the controller comes first at desk scale.
pub fn builtin_suite() -> Vec<BenchmarkEntry> {
    let mut out = vec![controller(CycleScale::Desk)];
    for s in SPECS {
        out.push(BenchmarkEntry {
            name: s.name,
            dut: parse_builtin(s.dut),
            golden: GoldenModel::Reference(parse_builtin(s.golden)),
            dut_source: s.dut.to_string(),
            golden_source: s.golden,
            trojan: s.trojan.map(|(kind, b, test, note)| Trojan {
                kind,
                trigger_branch: BranchId(b),
                trigger_test: test(),
                note,
            }),
            scale_params: Vec::new(),
        });
    }
    out
}

pub fn find(name: &str) -> Option<BenchmarkEntry> {
    builtin_suite().into_iter().find(|e| e.name == name)
}

/// `count` random seeds of `input_arity + 4` words each.
pub fn random_seeds(design: &Design, count: usize, rng_seed: u64) -> Vec<TestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|_| TestCase::seed((0..design.input_arity + 4).map(|_| rng.gen()).collect()))
        .collect()
}

impl BenchmarkEntry {
    /// Whether `words` reaches the trigger's true edge on the DUT.
    pub fn fires(&self, words: &[Word], step_limit: u64) -> bool {
        let Some(t) = &self.trojan else {
            return false;
        };
        execute(&self.dut, words, step_limit)
            .decisions
            .iter()
            .any(|d| d.edge() == t.trigger_edge())
    }

    /// Random inputs that do not fire the trojan, between `input_arity` and
    /// `input_arity + max_extra` words long.
    pub fn stealth_inputs(&self, n: usize, max_extra: usize, rng_seed: u64, step_limit: u64) -> Vec<Vec<Word>> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let len = self.dut.input_arity + rng.gen_range(0..=max_extra);
            let w: Vec<Word> = (0..len).map(|_| rng.gen()).collect();
            if !self.fires(&w, step_limit) {
                out.push(w);
            }
        }
        out
    }
}

/// Writes `<name>.fd`, `<name>.golden.fd` and `<name>.trigger.tc` for every
/// entry into `dir`.
pub fn export(entries: &[BenchmarkEntry], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for e in entries {
        fs::write(dir.join(format!("{}.fd", e.name)), &e.dut_source)?;
        fs::write(dir.join(format!("{}.golden.fd", e.name)), e.golden_source)?;
        if let Some(t) = &e.trojan {
            write_words(&dir.join(format!("{}.trigger.tc", e.name)), &t.trigger_test).map_err(io::Error::other)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::check;
    use crate::exec::DEFAULT_STEP_LIMIT;

    #[test]
    fn suite_has_every_class_and_a_control() {
        let s = builtin_suite();
        assert!(s.len() >= 7);
        let kinds: Vec<Option<TrojanType>> = s.iter().map(|e| e.trojan.as_ref().map(|t| t.kind)).collect();
        for k in [TrojanType::Cwom, TrojanType::Swm, TrojanType::Swom] {
            assert!(kinds.contains(&Some(k)));
        }
        assert!(kinds.contains(&None));
        assert_eq!(s[0].name, "controller");
        assert_eq!(s[0].trojan.as_ref().unwrap().severity(), Severity::High);
    }

    #[test]
    fn controller_has_six_branch_sites() {
        let c = controller(CycleScale::Desk);
        assert_eq!(c.dut.branch_count, 6);
        assert_eq!(c.dut.all_edges().len(), 12);
        assert_eq!(c.scale_params, vec![("cycle_limit", 4095)]);
        let f = controller(CycleScale::Faithful);
        assert!(f.dut_source.contains("limit = 1048575;"));
    }

    #[test]
    fn trigger_tests_fire_and_are_detected() {
        for e in builtin_suite().into_iter().chain([controller(CycleScale::Faithful)]) {
            let Some(t) = &e.trojan else { continue };
            assert!(e.fires(&t.trigger_test, DEFAULT_STEP_LIMIT), "{}", e.name);
            let v = check(&e.dut, &e.golden, &t.trigger_test, DEFAULT_STEP_LIMIT).unwrap();
            assert!(v.detected, "{}", e.name);
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let c = controller(CycleScale::Desk);
        let a = random_seeds(&c.dut, 4, 9);
        assert_eq!(a, random_seeds(&c.dut, 4, 9));
        assert!(a.iter().all(|s| s.words.len() == 6));
    }

    #[test]
    fn export_writes_sources_and_triggers() {
        let dir = tempfile::tempdir().unwrap();
        export(&builtin_suite(), dir.path()).unwrap();
        let src = fs::read_to_string(dir.path().join("controller.fd")).unwrap();
        assert!(parse_design(&src).is_ok());
        assert!(dir.path().join("bubble_sort.trigger.tc").exists());
        assert!(!dir.path().join("control.trigger.tc").exists());
    }
}
