// SPDX-License-Identifier: Apache-2.0

//! Execution tree over all observed decision sequences.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write;
use std::sync::Arc;

use super::shadow::ConditionRecord;
use super::sym::Sym;
use crate::dsl::{BranchEdge, BranchId};
use crate::testcase::TestId;
use crate::Word;

/// Per branch, at most this many distinct occurrence levels are targeted.
pub const OCCURRENCE_CAP: usize = 4;

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub branch: BranchId,
    pub occurrence: u32,
    pub cond: Option<Sym>,
    pub guards: Vec<Sym>,
    pub parent: Option<(NodeId, bool)>,
    pub children: [Option<NodeId>; 2],
    /// Polarities observed at this node, indexed by `taken as usize`.
    pub seen: [bool; 2],
    /// Index of the first test case that reached this node.
    pub witness: usize,
    pub depth: usize,
}

/// A one-sided node together with the polarity never observed there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrontierEntry {
    pub node: NodeId,
    pub polarity: bool,
}

/// Conjunction of `(expr, polarity)` pairs; a pair holds when
/// `(expr != 0) == polarity`. The last pair is the flipped target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPredicate {
    pub conjuncts: Vec<(Sym, bool)>,
}

impl PathPredicate {
    pub fn holds(&self, words: &[Word]) -> bool {
        self.conjuncts
            .iter()
            .all(|(e, p)| e.eval_words(words).is_ok_and(|v| (v != 0) == *p))
    }

    pub fn size(&self) -> u64 {
        self.conjuncts.iter().map(|(e, _)| e.size() as u64).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecutionTree {
    nodes: Vec<TreeNode>,
    root: Option<NodeId>,
    witnesses: Vec<(Arc<[Word]>, Option<TestId>)>,
}

impl ExecutionTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn witness(&self, id: NodeId) -> &[Word] {
        &self.witnesses[self.nodes[id].witness].0
    }

    /// Queue id of the test case that first reached `id`, if known.
    pub fn witness_id(&self, id: NodeId) -> Option<TestId> {
        self.witnesses[self.nodes[id].witness].1
    }

    fn add_node(
        &mut self,
        r: &ConditionRecord,
        parent: Option<(NodeId, bool)>,
        witness: usize,
        depth: usize,
    ) -> NodeId {
        self.nodes.push(TreeNode {
            branch: r.branch,
            occurrence: r.occurrence,
            cond: r.cond.clone(),
            guards: r.guards.clone(),
            parent,
            children: [None, None],
            seen: [false, false],
            witness,
            depth,
        });
        self.nodes.len() - 1
    }

    /// Inserts one trace. Returns the number of nodes created.
    pub fn grow(&mut self, records: &[ConditionRecord], words: &[Word], id: Option<TestId>) -> usize {
        if records.is_empty() {
            return 0;
        }
        let witness = self.witnesses.len();
        let mut created = 0;
        let mut cur = match self.root {
            Some(r) => r,
            None => {
                created += 1;
                let r = self.add_node(&records[0], None, witness, 0);
                self.root = Some(r);
                r
            }
        };
        for (i, r) in records.iter().enumerate() {
            if self.nodes[cur].branch != r.branch {
                // cannot happen for deterministic designs; keep the tree sound
                break;
            }
            self.nodes[cur].seen[r.taken as usize] = true;
            let Some(next) = records.get(i + 1) else {
                break;
            };
            cur = match self.nodes[cur].children[r.taken as usize] {
                Some(c) => c,
                None => {
                    created += 1;
                    let c = self.add_node(next, Some((cur, r.taken)), witness, i + 1);
                    self.nodes[cur].children[r.taken as usize] = Some(c);
                    c
                }
            };
        }
        if created > 0 {
            self.witnesses.push((words.into(), id));
        }
        created
    }

    /// Unobserved polarities of input-dependent nodes, in depth-first
    /// pre-order with the true child visited first.
    pub fn one_sided(&self) -> Vec<FrontierEntry> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.cond.is_some() {
                for p in [true, false] {
                    if !n.seen[p as usize] {
                        out.push(FrontierEntry { node: id, polarity: p });
                    }
                }
            }
            for c in [n.children[0], n.children[1]].into_iter().flatten() {
                stack.push(c);
            }
        }
        out
    }

    /// Frontier for one phase: per branch only the lowest
    /// [`OCCURRENCE_CAP`] occurrence levels, then `attempted` targets removed,
    /// then targets whose static edge is globally uncovered moved first.
    pub fn frontier(
        &self,
        covered: &dyn Fn(BranchEdge) -> bool,
        attempted: &HashSet<FrontierEntry>,
    ) -> Vec<FrontierEntry> {
        let all = self.one_sided();
        let mut levels: BTreeMap<BranchId, BTreeSet<u32>> = BTreeMap::new();
        for e in &all {
            let n = &self.nodes[e.node];
            levels.entry(n.branch).or_default().insert(n.occurrence);
        }
        let allowed: BTreeMap<BranchId, u32> = levels
            .into_iter()
            .map(|(b, occ)| (b, *occ.iter().take(OCCURRENCE_CAP).next_back().expect("non-empty")))
            .collect();
        let mut out: Vec<FrontierEntry> = all
            .into_iter()
            .filter(|e| {
                let n = &self.nodes[e.node];
                n.occurrence <= allowed[&n.branch]
            })
            .filter(|e| !attempted.contains(e))
            .collect();
        out.sort_by_key(|e| covered(BranchEdge::new(self.nodes[e.node].branch, e.polarity)));
        out
    }

    /// Path prefix with taken polarities, then the target with the missing
    /// polarity. Guards along the way are required to be nonzero.
    pub fn build_predicate(&self, target: FrontierEntry) -> PathPredicate {
        let mut chain = Vec::new();
        let mut cur = target.node;
        while let Some((p, taken)) = self.nodes[cur].parent {
            chain.push((p, taken));
            cur = p;
        }
        chain.reverse();
        let mut conjuncts = Vec::new();
        for (id, taken) in chain.into_iter().chain([(target.node, target.polarity)]) {
            let n = &self.nodes[id];
            conjuncts.extend(n.guards.iter().map(|g| (g.clone(), true)));
            if let Some(c) = &n.cond {
                conjuncts.push((c.clone(), taken));
            }
        }
        PathPredicate { conjuncts }
    }

    /// Decision sequence from the root to `node` inclusive of `polarity`.
    pub fn path_to(&self, target: FrontierEntry) -> Vec<(BranchId, bool)> {
        let mut out = vec![(self.nodes[target.node].branch, target.polarity)];
        let mut cur = target.node;
        while let Some((p, taken)) = self.nodes[cur].parent {
            out.push((self.nodes[p].branch, taken));
            cur = p;
        }
        out.reverse();
        out
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph execution_tree {\n  node [shape=box, fontname=monospace];\n");
        for (id, n) in self.nodes.iter().enumerate() {
            let cond = n
                .cond
                .as_ref()
                .map_or_else(|| "concrete".to_string(), |c| c.to_string())
                .replace('"', "'");
            let cond: String = cond.chars().take(80).collect();
            let _ = writeln!(s, "  n{id} [label=\"{}#{}\\n{cond}\"];", n.branch, n.occurrence);
            for p in [true, false] {
                let tag = if p { "T" } else { "F" };
                match n.children[p as usize] {
                    Some(c) => {
                        let _ = writeln!(s, "  n{id} -> n{c} [label=\"{tag}\"];");
                    }
                    None if n.seen[p as usize] => {
                        let _ = writeln!(
                            s,
                            "  n{id}_{tag} [shape=point];\n  n{id} -> n{id}_{tag} [label=\"{tag}\"];"
                        );
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            "  n{id}_{tag} [label=\"?\", style=dashed];\n  n{id} -> n{id}_{tag} [label=\"{tag}\", style=dashed];"
                        );
                    }
                }
            }
        }
        s.push_str("}\n");
        s
    }
}
