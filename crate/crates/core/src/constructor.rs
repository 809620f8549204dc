//! Inductive construction of ⌊√(6m+9)/3⌋ edge-disjoint rainbow spanning trees.
//!
//! Round `k` starts from `k−1` trees `T_1..T_{k−1}` with roots `r_1..r_{k−1}`
//! and the set `L` of vertices that are root-adjacent leaves in every tree.
//! Two anchors `r_k, w_k ∈ L` are picked; `r_k` becomes the root of the new
//! tree. Each old tree `T_i` then gives up the pendant edges `r_i r_k` and
//! `r_i v_i` for a carefully chosen `v_i` and takes `r_k w_i`, `v_i v'_i` with
//! the same two colors. In lock step the star at `r_k` trades `r_k w_i` for
//! `w_i w'_i`, and a final trade of `r_k w_k` for `w_k w'_k` closes the color
//! cycle. Restrictions R1–R11 on `v_i` keep all trees edge-disjoint and the
//! new tree acyclic; the size of `L` guarantees a legal `v_i` always exists
//! while `k` stays within the bound.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{Color, ColoredEdge, EdgeColoring, Vertex};
use crate::forest::{base_star, Forest, RainbowTree, TreeError, TreeRecord};

/// ⌊√(6m+9)/3⌋, in exact integer arithmetic.
pub fn omega(m: usize) -> usize {
    // ⌊⌊√x⌋/3⌋ = ⌊√x/3⌋ for x ≥ 0.
    ((6 * m as u64 + 9).isqrt() / 3) as usize
}

/// Lower bound on the common leaf set at entry to round `k`: `2m − 3k² + 6k − 1`.
pub fn leaf_bound(m: usize, k: usize) -> i64 {
    let (m, k) = (m as i64, k as i64);
    2 * m - 3 * k * k + 6 * k - 1
}

/// How anchors, candidates and the first root are picked among legal choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionPolicy {
    #[default]
    MinIndex,
    MaxIndex,
    Random(u64),
}

impl std::fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionPolicy::MinIndex => write!(f, "min"),
            SelectionPolicy::MaxIndex => write!(f, "max"),
            SelectionPolicy::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

struct Selector {
    policy: SelectionPolicy,
    rng: ChaCha8Rng,
}

impl Selector {
    fn new(policy: SelectionPolicy) -> Self {
        let seed = match policy {
            SelectionPolicy::Random(seed) => seed,
            _ => 0,
        };
        Selector { policy, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn pick(&mut self, set: &BTreeSet<Vertex>) -> Option<Vertex> {
        match self.policy {
            SelectionPolicy::MinIndex => set.first().copied(),
            SelectionPolicy::MaxIndex => set.last().copied(),
            SelectionPolicy::Random(_) => {
                if set.is_empty() {
                    None
                } else {
                    let at = self.rng.gen_range(0..set.len());
                    set.iter().nth(at).copied()
                }
            }
        }
    }

    fn pick_root(&mut self, n: usize) -> Vertex {
        let all: BTreeSet<Vertex> = (0..n).map(Vertex).collect();
        self.pick(&all).expect("at least two vertices")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("round {k}: common leaf set has {available} vertices, need two anchors")]
    LeafSetExhausted { k: usize, available: usize },
    #[error("round {k}: common leaf set has {actual} vertices, below the bound {bound}")]
    LeafBoundViolated { k: usize, actual: usize, bound: i64 },
    #[error("round {k}, tree {i}: no vertex satisfies R1-R11")]
    EmptyCandidateSet { k: usize, i: usize },
    #[error("round {k}, step {i}: new edge of the k-th tree closes a cycle")]
    CycleDetected { k: usize, i: usize },
    #[error("round {k}: tree surgery failed: {source}")]
    Tree { k: usize, source: TreeError },
    #[error("round {k}: structural invariant failed: {detail}")]
    FValidationFailed { k: usize, detail: String },
    #[error("round {k} exceeds the guaranteed tree count {omega}")]
    BeyondOmega { k: usize, omega: usize },
    #[error("operation out of order: {0}")]
    OutOfOrder(String),
}

/// Vertices fixed during round `k`. Indices are 0-based in the vectors:
/// `v[i−1]` is `v_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub k: usize,
    pub r_k: Vertex,
    pub w_k: Vertex,
    pub v: Vec<Vertex>,
    pub w: Vec<Vertex>,
    pub v_prime: Vec<Vertex>,
    /// `w'_1..w'_k`; the last entry appears once the round is finalized.
    pub w_prime: Vec<Vertex>,
}

/// Per-rule rejections of the candidates in `L* = L \ {r_k, w_k}`. A vertex
/// may be listed under several rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEliminations {
    #[serde(rename = "R2")]
    pub r2: Vec<Vertex>,
    #[serde(rename = "R3")]
    pub r3: Vec<Vertex>,
    #[serde(rename = "R4")]
    pub r4: Vec<Vertex>,
    #[serde(rename = "R5")]
    pub r5: Vec<Vertex>,
    #[serde(rename = "R6")]
    pub r6: Vec<Vertex>,
    #[serde(rename = "R7")]
    pub r7: Vec<Vertex>,
    #[serde(rename = "R8")]
    pub r8: Vec<Vertex>,
    #[serde(rename = "R9")]
    pub r9: Vec<Vertex>,
    #[serde(rename = "R10")]
    pub r10: Vec<Vertex>,
    #[serde(rename = "R11")]
    pub r11: Vec<Vertex>,
}

impl RuleEliminations {
    pub fn rules(&self) -> [(&'static str, &Vec<Vertex>); 10] {
        [
            ("R2", &self.r2),
            ("R3", &self.r3),
            ("R4", &self.r4),
            ("R5", &self.r5),
            ("R6", &self.r6),
            ("R7", &self.r7),
            ("R8", &self.r8),
            ("R9", &self.r9),
            ("R10", &self.r10),
            ("R11", &self.r11),
        ]
    }

    pub fn union(&self) -> BTreeSet<Vertex> {
        self.rules().iter().flat_map(|(_, list)| list.iter().copied()).collect()
    }
}

/// Candidate filtering for one `(k, i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateReport {
    pub candidates_before: BTreeSet<Vertex>,
    pub eliminated: RuleEliminations,
    pub admissible: BTreeSet<Vertex>,
}

/// One `(k, i)` record of the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    pub k: usize,
    pub i: usize,
    /// `|L_{k−1}|`.
    pub leaf_count: usize,
    /// `L*_{k−1}`.
    pub candidates_before: Vec<Vertex>,
    pub eliminated: RuleEliminations,
    pub admissible: Vec<Vertex>,
    pub chosen: Option<Vertex>,
    pub w: Option<Vertex>,
    pub v_prime: Option<Vertex>,
    pub w_prime: Option<Vertex>,
    /// `|L*_{k−1}|`, which must exceed `bound_rhs`.
    pub bound_lhs: i64,
    /// `6k − 7`.
    pub bound_rhs: i64,
}

/// Everything recorded about round `k`, including snapshots of the trees on
/// entry and exit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub k: usize,
    pub r_k: Vertex,
    pub w_k: Vertex,
    pub w_prime_k: Option<Vertex>,
    pub leaf_count: usize,
    pub leaf_bound: i64,
    pub common_leaves: Vec<Vertex>,
    pub trees_before: Vec<TreeRecord>,
    pub trees_after: Vec<TreeRecord>,
    #[serde(skip)]
    pub steps: Vec<StepTrace>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstructionTrace {
    pub m: usize,
    pub policy: String,
    pub rounds: Vec<RoundTrace>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum TraceLine {
    Run { m: usize, omega: usize, policy: String },
    Round(Box<RoundTrace>),
    Step(Box<StepTrace>),
}

impl ConstructionTrace {
    pub fn steps(&self) -> impl Iterator<Item = &StepTrace> {
        self.rounds.iter().flat_map(|r| r.steps.iter())
    }

    /// Smallest admissible set size over all steps, if any step ran.
    pub fn min_candidate_slack(&self) -> Option<usize> {
        self.steps().map(|s| s.admissible.len()).min()
    }

    /// JSON lines: a `run` header, then per round a `round` line followed by
    /// its `step` lines.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut push = |line: &TraceLine| {
            serde_json::to_writer(&mut out, line).expect("plain data serializes");
            out.push(b'\n');
        };
        push(&TraceLine::Run { m: self.m, omega: omega(self.m), policy: self.policy.clone() });
        for round in &self.rounds {
            push(&TraceLine::Round(Box::new(round.clone())));
            for step in &round.steps {
                push(&TraceLine::Step(Box::new(step.clone())));
            }
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut trace = ConstructionTrace::default();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: TraceLine = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
            match parsed {
                TraceLine::Run { m, policy, .. } => {
                    trace.m = m;
                    trace.policy = policy;
                }
                TraceLine::Round(round) => trace.rounds.push(*round),
                TraceLine::Step(step) => match trace.rounds.last_mut() {
                    Some(round) if round.k == step.k => round.steps.push(*step),
                    _ => return Err(format!("line {}: step for round {} outside its round", n + 1, step.k)),
                },
            }
        }
        Ok(trace)
    }
}

/// `T_k^k(i)`: the star at `r_k` part-way through its edge trades. It has
/// 2m−1 edges but is not rainbow until the last trade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialTree {
    root: Vertex,
    edges: BTreeSet<ColoredEdge>,
    adjacency: Vec<BTreeSet<Vertex>>,
}

impl PartialTree {
    fn star(coloring: &EdgeColoring, root: Vertex) -> Self {
        let mut adjacency = vec![BTreeSet::new(); coloring.n()];
        let mut edges = BTreeSet::new();
        for x in coloring.vertices().filter(|&x| x != root) {
            edges.insert(coloring.edge(root, x));
            adjacency[root.0].insert(x);
            adjacency[x.0].insert(root);
        }
        PartialTree { root, edges, adjacency }
    }

    pub fn root(&self) -> Vertex {
        self.root
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = &ColoredEdge> {
        self.edges.iter()
    }

    pub fn degree(&self, x: Vertex) -> usize {
        self.adjacency[x.0].len()
    }

    pub fn is_root_leaf(&self, x: Vertex) -> bool {
        x != self.root && self.adjacency[x.0].len() == 1 && self.adjacency[x.0].contains(&self.root)
    }

    /// Number of edges of each color.
    pub fn color_counts(&self, num_colors: usize) -> Vec<usize> {
        let mut counts = vec![0; num_colors];
        for e in &self.edges {
            counts[e.color().0] += 1;
        }
        counts
    }

    fn connected(&self, from: Vertex, to: Vertex) -> bool {
        let mut seen = vec![false; self.adjacency.len()];
        let mut stack = vec![from];
        seen[from.0] = true;
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            for &y in &self.adjacency[x.0] {
                if !std::mem::replace(&mut seen[y.0], true) {
                    stack.push(y);
                }
            }
        }
        false
    }

    /// Swap `root–w` for `w–w_prime`; `false` if the new edge would close a cycle
    /// or the old one is absent.
    fn trade(&mut self, coloring: &EdgeColoring, w: Vertex, w_prime: Vertex) -> bool {
        if w == w_prime || !self.adjacency[self.root.0].contains(&w) {
            return false;
        }
        let old = coloring.edge(self.root, w);
        self.edges.remove(&old);
        self.adjacency[self.root.0].remove(&w);
        self.adjacency[w.0].remove(&self.root);
        if self.connected(w, w_prime) {
            return false;
        }
        self.edges.insert(coloring.edge(w, w_prime));
        self.adjacency[w.0].insert(w_prime);
        self.adjacency[w_prime.0].insert(w);
        true
    }
}

struct RoundInProgress {
    record: RoundRecord,
    previous: Vec<RainbowTree>,
    partial: PartialTree,
    leaf_count: usize,
    steps: Vec<StepTrace>,
}

/// The engine between rounds (and mid-round while trees are being revised).
pub struct ConstructionState<'c> {
    coloring: &'c EdgeColoring,
    trees: Vec<RainbowTree>,
    common_leaves: BTreeSet<Vertex>,
    round: Option<RoundInProgress>,
    selector: Selector,
    trace_on: bool,
    trace: ConstructionTrace,
}

impl<'c> ConstructionState<'c> {
    /// Base step: one spanning star at a policy-chosen root.
    pub fn new(coloring: &'c EdgeColoring, policy: SelectionPolicy, trace_on: bool) -> Self {
        let mut selector = Selector::new(policy);
        let r1 = selector.pick_root(coloring.n());
        let star = base_star(coloring, r1);
        let common_leaves = star.root_leaf_set().clone();
        ConstructionState {
            coloring,
            trees: vec![star],
            common_leaves,
            round: None,
            selector,
            trace_on,
            trace: ConstructionTrace { m: coloring.m(), policy: policy.to_string(), rounds: Vec::new() },
        }
    }

    pub fn coloring(&self) -> &'c EdgeColoring {
        self.coloring
    }

    /// The round in progress, or the next one to run.
    pub fn k(&self) -> usize {
        self.round.as_ref().map_or(self.trees.len() + 1, |r| r.record.k)
    }

    /// Current trees: during a round, the first entries are already revised.
    pub fn trees(&self) -> &[RainbowTree] {
        &self.trees
    }

    pub fn roots(&self) -> Vec<Vertex> {
        self.trees.iter().map(RainbowTree::root).collect()
    }

    /// `L_{k−1}` while a round runs, `L_k` between rounds.
    pub fn common_leaves(&self) -> &BTreeSet<Vertex> {
        &self.common_leaves
    }

    pub fn record(&self) -> Option<&RoundRecord> {
        self.round.as_ref().map(|r| &r.record)
    }

    pub fn partial_kth(&self) -> Option<&PartialTree> {
        self.round.as_ref().map(|r| &r.partial)
    }

    /// Tree `i` (1-based) as it stood when the round began.
    pub fn previous_tree(&self, i: usize) -> Option<&RainbowTree> {
        self.round.as_ref().and_then(|r| r.previous.get(i.checked_sub(1)?))
    }

    pub fn trace(&self) -> &ConstructionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ConstructionTrace {
        self.trace
    }

    /// Intersection of the trees' root-leaf sets, from scratch.
    pub fn recompute_common_leaves(&self) -> BTreeSet<Vertex> {
        let mut it = self.trees.iter();
        let first = it.next().map(|t| t.root_leaf_set().clone()).unwrap_or_default();
        it.fold(first, |acc, t| acc.intersection(t.root_leaf_set()).copied().collect())
    }

    /// Start round `k`: pick `r_k` and `w_k` from the common leaf set.
    pub fn select_anchors(&mut self) -> Result<(Vertex, Vertex), ConstructionError> {
        if self.round.is_some() {
            return Err(ConstructionError::OutOfOrder("round already started".into()));
        }
        let k = self.trees.len() + 1;
        let available = self.common_leaves.len();
        let bound = leaf_bound(self.coloring.m(), k);
        if (available as i64) < bound {
            return Err(ConstructionError::LeafBoundViolated { k, actual: available, bound });
        }
        if available < 2 {
            return Err(ConstructionError::LeafSetExhausted { k, available });
        }
        let r_k = self.selector.pick(&self.common_leaves).expect("nonempty");
        let mut rest = self.common_leaves.clone();
        rest.remove(&r_k);
        let w_k = self.selector.pick(&rest).expect("nonempty");
        self.round = Some(RoundInProgress {
            record: RoundRecord { k, r_k, w_k, v: vec![], w: vec![], v_prime: vec![], w_prime: vec![] },
            previous: self.trees.clone(),
            partial: PartialTree::star(self.coloring, r_k),
            leaf_count: available,
            steps: Vec::new(),
        });
        Ok((r_k, w_k))
    }

    fn active_round(&self) -> Result<&RoundInProgress, ConstructionError> {
        self.round.as_ref().ok_or_else(|| ConstructionError::OutOfOrder("no round in progress".into()))
    }

    /// Apply R1–R11 to every vertex of `L*_{k−1}` for tree `i` (1-based).
    /// Trees `1..i` must already be revised this round.
    pub fn evaluate_candidates(&self, i: usize) -> Result<CandidateReport, ConstructionError> {
        let round = self.active_round()?;
        let rec = &round.record;
        let k = rec.k;
        if i == 0 || i >= k || rec.v.len() != i - 1 {
            return Err(ConstructionError::OutOfOrder(format!(
                "candidates for tree {i} requested after {} revisions in round {k}",
                rec.v.len()
            )));
        }
        let col = self.coloring;
        let phi = |a: Vertex, b: Vertex| col.color(a, b);
        let roots = self.roots();
        let root = |c: usize| roots[c - 1];
        let (r_k, w_k) = (rec.r_k, rec.w_k);
        let r_i = root(i);
        let c_rirk = phi(r_i, r_k);

        // R3–R9 and R11 all forbid colors for the edge v r_i, i.e. values of
        // φ(r_k w_i). Collect those per rule.
        let r3: Vec<Color> = (1..i).map(|a| phi(root(a), rec.v[a - 1])).collect();
        let r4: Vec<Color> = (i + 1..k).map(|b| phi(r_k, root(b))).collect();
        let r5 = [phi(r_k, w_k)];
        let r6: Vec<Color> =
            (1..i).filter(|&a| rec.w_prime[a - 1] != r_k).map(|a| phi(r_k, rec.w_prime[a - 1])).collect();
        let mut r7 = Vec::new();
        if i >= 2 {
            let alpha = col.partner(phi(r_k, rec.w[i - 2]), w_k);
            if alpha != r_k {
                r7.push(phi(r_k, alpha));
            }
        }
        let incident_colors = |tree: &RainbowTree, c: Color| -> Vec<Color> {
            tree.tree_edge_of_color(c).endpoints().into_iter().filter(|&a| a != r_k).map(|a| phi(r_k, a)).collect()
        };
        let mut r8 = Vec::new();
        if i == 1 {
            let target = phi(r_k, w_k);
            for c in 1..k {
                r8.extend(incident_colors(&round.previous[c - 1], target));
            }
        }
        let mut r9 = Vec::new();
        if i >= 2 {
            let target = phi(r_k, rec.w[i - 2]);
            for a in 1..i {
                r9.extend(incident_colors(&self.trees[a - 1], target));
            }
            for b in i..k {
                r9.extend(incident_colors(&round.previous[b - 1], target));
            }
        }
        let mut r11 = Vec::new();
        if i == k - 1 {
            r11.extend((1..=k.saturating_sub(2)).map(|d| phi(w_k, root(d))));
        }

        let candidates_before: BTreeSet<Vertex> =
            self.common_leaves.iter().copied().filter(|&x| x != r_k && x != w_k).collect();
        let mut elim = RuleEliminations::default();
        for &v in &candidates_before {
            let c_vri = phi(v, r_i);
            if (1..k).any(|c| c != i && phi(v, root(c)) == c_rirk) {
                elim.r2.push(v);
            }
            for (forbidden, list) in [
                (&r3[..], &mut elim.r3),
                (&r4[..], &mut elim.r4),
                (&r5[..], &mut elim.r5),
                (&r6[..], &mut elim.r6),
                (&r7[..], &mut elim.r7),
                (&r8[..], &mut elim.r8),
                (&r9[..], &mut elim.r9),
                (&r11[..], &mut elim.r11),
            ] {
                if forbidden.contains(&c_vri) {
                    list.push(v);
                }
            }
            if phi(v, w_k) == c_rirk {
                elim.r10.push(v);
            }
        }
        let rejected = elim.union();
        let admissible = candidates_before.difference(&rejected).copied().collect();
        Ok(CandidateReport { candidates_before, eliminated: elim, admissible })
    }

    /// [`evaluate_candidates`](Self::evaluate_candidates), recorded in the trace.
    pub fn admissible_candidates(&mut self, i: usize) -> Result<BTreeSet<Vertex>, ConstructionError> {
        let report = self.evaluate_candidates(i)?;
        let round = self.round.as_mut().expect("checked by evaluate_candidates");
        let k = round.record.k;
        if self.trace_on {
            round.steps.retain(|s| s.i != i);
            round.steps.push(StepTrace {
                k,
                i,
                leaf_count: round.leaf_count,
                candidates_before: report.candidates_before.iter().copied().collect(),
                eliminated: report.eliminated,
                admissible: report.admissible.iter().copied().collect(),
                chosen: None,
                w: None,
                v_prime: None,
                w_prime: None,
                bound_lhs: report.candidates_before.len() as i64,
                bound_rhs: 6 * k as i64 - 7,
            });
        }
        if report.admissible.is_empty() {
            return Err(ConstructionError::EmptyCandidateSet { k, i });
        }
        Ok(report.admissible)
    }

    /// `T_i^k = T_i^{k−1}[r_i; r_k, v_i; w_i, v'_i]`, with
    /// `w_i = partner(φ(r_i v_i), r_k)` and `v'_i = partner(φ(r_i r_k), v_i)`.
    /// Also advances the k-th tree to `T_k^k(i)`.
    pub fn revise_tree(&mut self, i: usize, v_i: Vertex) -> Result<&RainbowTree, ConstructionError> {
        let round = self.active_round()?;
        let k = round.record.k;
        if i == 0 || i >= k || round.record.v.len() != i - 1 {
            return Err(ConstructionError::OutOfOrder(format!("revision of tree {i} in round {k}")));
        }
        let col = self.coloring;
        let r_k = round.record.r_k;
        let r_i = self.trees[i - 1].root();
        if v_i == r_i || v_i == r_k {
            return Err(ConstructionError::Tree { k, source: TreeError::NotPendant(v_i) });
        }
        let w_i = col.partner(col.color(r_i, v_i), r_k);
        let v_prime = col.partner(col.color(r_i, r_k), v_i);
        let revised = self.trees[i - 1]
            .apply_swap(col, r_i, r_k, v_i, w_i, v_prime)
            .map_err(|source| ConstructionError::Tree { k, source })?;
        self.trees[i - 1] = revised;
        let round = self.round.as_mut().expect("active");
        round.record.v.push(v_i);
        round.record.w.push(w_i);
        round.record.v_prime.push(v_prime);
        if let Some(step) = round.steps.iter_mut().find(|s| s.i == i) {
            step.chosen = Some(v_i);
            step.w = Some(w_i);
            step.v_prime = Some(v_prime);
        }
        self.extend_kth_partial(i)?;
        Ok(&self.trees[i - 1])
    }

    /// `T_k^k(i) = T_k^k(i−1) − r_k w_i + w_i w'_i`, where `w'_1` carries the
    /// color of `r_k w_k` and `w'_i` (i ≥ 2) the color of `r_k w_{i−1}`.
    pub fn extend_kth_partial(&mut self, i: usize) -> Result<&PartialTree, ConstructionError> {
        let col = self.coloring;
        let round = self.round.as_mut().ok_or_else(|| ConstructionError::OutOfOrder("no round in progress".into()))?;
        let rec = &mut round.record;
        let k = rec.k;
        if i == 0 || i >= k || rec.w.len() != i || rec.w_prime.len() != i - 1 {
            return Err(ConstructionError::OutOfOrder(format!("extension {i} of the k-th tree in round {k}")));
        }
        let w_i = rec.w[i - 1];
        let carried = if i == 1 { rec.w_k } else { rec.w[i - 2] };
        let w_prime = col.partner(col.color(rec.r_k, carried), w_i);
        if !round.partial.trade(col, w_i, w_prime) {
            return Err(ConstructionError::CycleDetected { k, i });
        }
        rec.w_prime.push(w_prime);
        if let Some(step) = round.steps.iter_mut().find(|s| s.i == i) {
            step.w_prime = Some(w_prime);
        }
        Ok(&round.partial)
    }

    /// Close the round: `T_k^k = T_k^k(k−1) − r_k w_k + w_k w'_k` with `w'_k`
    /// carrying the color of `r_k w_{k−1}`. Appends the new tree, shrinks the
    /// common leaf set and checks the degree/leaf invariants for `k` trees.
    pub fn finalize_kth(&mut self) -> Result<&RainbowTree, ConstructionError> {
        let mut round =
            self.round.take().ok_or_else(|| ConstructionError::OutOfOrder("no round in progress".into()))?;
        if let Err(e) = self.close_round(&mut round) {
            self.round = Some(round);
            return Err(e);
        }
        if self.trace_on {
            let col = self.coloring;
            let k = round.record.k;
            self.trace.rounds.push(RoundTrace {
                k,
                r_k: round.record.r_k,
                w_k: round.record.w_k,
                w_prime_k: round.record.w_prime.last().copied(),
                leaf_count: round.leaf_count,
                leaf_bound: leaf_bound(col.m(), k),
                common_leaves: round.previous_common_leaves(),
                trees_before: round.previous.iter().map(RainbowTree::to_record).collect(),
                trees_after: self.trees.iter().map(RainbowTree::to_record).collect(),
                steps: std::mem::take(&mut round.steps),
            });
        }
        Ok(self.trees.last().expect("just pushed"))
    }

    fn close_round(&mut self, round: &mut RoundInProgress) -> Result<(), ConstructionError> {
        let col = self.coloring;
        let rec = &mut round.record;
        let k = rec.k;
        if rec.w_prime.len() != k - 1 {
            return Err(ConstructionError::OutOfOrder(format!(
                "finalize after {} of {} revisions",
                rec.w_prime.len(),
                k - 1
            )));
        }
        let w_prime_k = col.partner(col.color(rec.r_k, rec.w[k - 2]), rec.w_k);
        if !round.partial.trade(col, rec.w_k, w_prime_k) {
            return Err(ConstructionError::CycleDetected { k, i: k });
        }
        rec.w_prime.push(w_prime_k);
        let kth = RainbowTree::new(col, rec.r_k, round.partial.edges.iter().copied())
            .map_err(|source| ConstructionError::Tree { k, source })?;
        self.trees.push(kth);

        // L_k ⊆ L_{k−1}: root-leaf sets only shrink under revision.
        let trees = &self.trees;
        self.common_leaves.retain(|x| trees.iter().all(|t| t.root_leaf_set().contains(x)));
        if self.common_leaves != self.recompute_common_leaves() {
            return Err(ConstructionError::FValidationFailed {
                k,
                detail: "incremental common leaf set disagrees with recomputation".into(),
            });
        }
        check_structure(&self.trees, col.m()).map_err(|detail| ConstructionError::FValidationFailed { k, detail })
    }

    /// One full induction step from `k−1` to `k` trees.
    pub fn step(&mut self) -> Result<(), ConstructionError> {
        let k = self.k();
        let limit = omega(self.coloring.m());
        if k > limit {
            return Err(ConstructionError::BeyondOmega { k, omega: limit });
        }
        self.select_anchors()?;
        for i in 1..k {
            let admissible = match self.admissible_candidates(i) {
                Ok(set) => set,
                Err(e) => {
                    self.abandon_round();
                    return Err(e);
                }
            };
            let v_i = self.selector.pick(&admissible).expect("nonempty");
            if let Err(e) = self.revise_tree(i, v_i) {
                self.abandon_round();
                return Err(e);
            }
        }
        if let Err(e) = self.finalize_kth() {
            self.abandon_round();
            return Err(e);
        }
        Ok(())
    }

    /// Move a failed round's partial record into the trace for diagnosis.
    fn abandon_round(&mut self) {
        if let Some(round) = self.round.take() {
            if self.trace_on {
                self.trace.rounds.push(RoundTrace {
                    k: round.record.k,
                    r_k: round.record.r_k,
                    w_k: round.record.w_k,
                    w_prime_k: None,
                    leaf_count: round.leaf_count,
                    leaf_bound: leaf_bound(self.coloring.m(), round.record.k),
                    common_leaves: round.previous_common_leaves(),
                    trees_before: round.previous.iter().map(RainbowTree::to_record).collect(),
                    trees_after: self.trees.iter().map(RainbowTree::to_record).collect(),
                    steps: round.steps,
                });
            }
        }
    }

    pub fn into_forest(self) -> (Forest, ConstructionTrace) {
        let forest = Forest { m: self.coloring.m(), trees: self.trees, coloring_digest: self.coloring.digest() };
        (forest, self.trace)
    }
}

impl RoundInProgress {
    fn previous_common_leaves(&self) -> Vec<Vertex> {
        let mut it = self.previous.iter();
        let first = it.next().map(|t| t.root_leaf_set().clone()).unwrap_or_default();
        it.fold(first, |acc, t| acc.intersection(t.root_leaf_set()).copied().collect()).into_iter().collect()
    }
}

/// Degree and root-leaf conditions on a list of `ψ` trees: distinct roots;
/// `deg(r_1) = (2m−1) − 2(ψ−1)` with at least `(2m−1) − 4(ψ−1)` root leaves;
/// for `i ≥ 2`, `deg(r_i) = (2m−1) − i − 2(ψ−i)` with at least
/// `(2m−1) − 2i − 4(ψ−i)` root leaves.
fn check_structure(trees: &[RainbowTree], m: usize) -> Result<(), String> {
    let psi = trees.len() as i64;
    let top = 2 * m as i64 - 1;
    let roots: BTreeSet<Vertex> = trees.iter().map(RainbowTree::root).collect();
    if roots.len() != trees.len() {
        return Err("roots are not distinct".into());
    }
    for (idx, tree) in trees.iter().enumerate() {
        let i = idx as i64 + 1;
        let (degree, leaves) = if i == 1 {
            (top - 2 * (psi - 1), top - 4 * (psi - 1))
        } else {
            (top - i - 2 * (psi - i), top - 2 * i - 4 * (psi - i))
        };
        let actual = tree.degree(tree.root()) as i64;
        if actual != degree {
            return Err(format!("tree {i}: root degree {actual}, expected {degree}"));
        }
        let actual_leaves = tree.root_leaf_set().len() as i64;
        if actual_leaves < leaves {
            return Err(format!("tree {i}: {actual_leaves} root leaves, expected at least {leaves}"));
        }
    }
    Ok(())
}

/// A failed build, with whatever trace had been gathered.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct ConstructionFailure {
    pub error: ConstructionError,
    pub trace: ConstructionTrace,
}

/// Run the base step and rounds `2..=Ω_m`.
pub fn build_forest(
    coloring: &EdgeColoring,
    policy: SelectionPolicy,
    trace_on: bool,
) -> Result<(Forest, ConstructionTrace), ConstructionFailure> {
    let mut state = ConstructionState::new(coloring, policy, trace_on);
    for _ in 2..=omega(coloring.m()) {
        if let Err(error) = state.step() {
            return Err(ConstructionFailure { error, trace: state.into_trace() });
        }
    }
    Ok(state.into_forest())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::{permuted_round_robin, round_robin};

    #[test]
    fn omega_values() {
        assert_eq!(omega(2), 1);
        assert_eq!(omega(5), 2);
        assert_eq!(omega(12), 3);
        assert_eq!(omega(23), 4);
        assert_eq!(omega(36), 5);
        assert_eq!(omega(11), 2);
        assert_eq!(omega(35), 4);
    }

    #[test]
    fn omega_matches_float_formula_away_from_boundaries() {
        for m in 1..5000usize {
            let exact = omega(m);
            assert!(9 * exact * exact <= 6 * m + 9);
            assert!(9 * (exact + 1) * (exact + 1) > 6 * m + 9);
        }
    }

    #[test]
    fn small_m_returns_base_star_at_zero() {
        let col = round_robin(2);
        let (forest, trace) = build_forest(&col, SelectionPolicy::MinIndex, true).unwrap();
        assert_eq!(forest.trees.len(), 1);
        assert_eq!(forest.trees[0].root(), Vertex(0));
        assert_eq!(forest.trees[0].degree(Vertex(0)), 3);
        assert!(trace.rounds.is_empty());
    }

    #[test]
    fn anchors_after_base_step_m5() {
        let col = round_robin(5);
        let mut state = ConstructionState::new(&col, SelectionPolicy::MinIndex, true);
        assert_eq!(state.common_leaves().iter().map(|v| v.0).collect::<Vec<_>>(), (1..10).collect::<Vec<_>>());
        assert_eq!(state.select_anchors().unwrap(), (Vertex(1), Vertex(2)));
        let max_col = round_robin(5);
        let mut max_state = ConstructionState::new(&max_col, SelectionPolicy::MaxIndex, true);
        assert_eq!(max_state.roots(), vec![Vertex(9)]);
        assert_eq!(max_state.select_anchors().unwrap(), (Vertex(8), Vertex(7)));
    }

    #[test]
    fn vacuous_rules_at_k2() {
        let col = round_robin(5);
        let mut state = ConstructionState::new(&col, SelectionPolicy::MinIndex, true);
        state.select_anchors().unwrap();
        let report = state.evaluate_candidates(1).unwrap();
        let e = &report.eliminated;
        for list in [&e.r2, &e.r3, &e.r4, &e.r6, &e.r7, &e.r11, &e.r9] {
            assert!(list.is_empty());
        }
        assert_eq!(report.candidates_before.len(), 7);
        assert!(!report.admissible.is_empty());
    }

    #[test]
    fn revision_changes_exactly_two_edges() {
        let col = permuted_round_robin(12, 3);
        let mut state = ConstructionState::new(&col, SelectionPolicy::MinIndex, true);
        state.step().unwrap();
        let (r_k, _) = state.select_anchors().unwrap();
        for i in 1..3 {
            let before = state.trees()[i - 1].clone();
            let v_i = *state.admissible_candidates(i).unwrap().first().unwrap();
            let after = state.revise_tree(i, v_i).unwrap().clone();
            let rec = state.record().unwrap();
            let added: BTreeSet<_> =
                after.edges().filter(|e| !before.edges().any(|b| b == *e)).map(|e| (e.u(), e.v())).collect();
            let want: BTreeSet<_> = [col.edge(v_i, rec.v_prime[i - 1]), col.edge(r_k, rec.w[i - 1])]
                .iter()
                .map(|e| (e.u(), e.v()))
                .collect();
            assert_eq!(added, want);
            assert_eq!(after.degree(after.root()), before.degree(before.root()) - 2);
            assert!(before.root_leaf_set().len() - after.root_leaf_set().len() <= 4);
            // w_i was a root leaf of the k-th tree before its trade.
            let partial = state.partial_kth().unwrap();
            assert!(partial.edges().any(|e| e.contains(rec.w[i - 1]) && e.contains(rec.w_prime[i - 1])));
        }
        let kth = state.finalize_kth().unwrap();
        assert_eq!(kth.degree(kth.root()), 23 - 3);
    }

    #[test]
    fn out_of_order_calls_are_rejected() {
        let col = round_robin(12);
        let mut state = ConstructionState::new(&col, SelectionPolicy::MinIndex, false);
        assert!(matches!(state.evaluate_candidates(1), Err(ConstructionError::OutOfOrder(_))));
        state.select_anchors().unwrap();
        assert!(matches!(state.select_anchors(), Err(ConstructionError::OutOfOrder(_))));
        assert!(matches!(state.finalize_kth(), Err(ConstructionError::OutOfOrder(_))));
        assert!(matches!(state.evaluate_candidates(2), Err(ConstructionError::OutOfOrder(_))));
    }

    #[test]
    fn steps_past_omega_are_refused() {
        let col = round_robin(5);
        let mut state = ConstructionState::new(&col, SelectionPolicy::MinIndex, false);
        state.step().unwrap();
        assert_eq!(state.step(), Err(ConstructionError::BeyondOmega { k: 3, omega: 2 }));
    }

    #[test]
    fn degrees_follow_the_induction() {
        let col = permuted_round_robin(36, 9);
        let mut state = ConstructionState::new(&col, SelectionPolicy::Random(4), false);
        for k in 2..=5 {
            state.step().unwrap();
            let top = 2 * 36 - 1;
            assert_eq!(state.trees()[0].degree(state.roots()[0]), top - 2 * (k - 1));
            for i in 2..=k {
                assert_eq!(state.trees()[i - 1].degree(state.roots()[i - 1]), top - i - 2 * (k - i));
            }
            assert_eq!(state.common_leaves(), &state.recompute_common_leaves());
        }
    }

    #[test]
    fn trace_jsonl_round_trips() {
        let col = round_robin(12);
        let (_, trace) = build_forest(&col, SelectionPolicy::MinIndex, true).unwrap();
        assert_eq!(trace.rounds.len(), 2);
        assert_eq!(trace.steps().count(), 1 + 2);
        let text = String::from_utf8(trace.to_jsonl()).unwrap();
        assert!(text.starts_with("{\"event\":\"run\",\"m\":12,\"omega\":3,\"policy\":\"min\"}\n"));
        assert_eq!(ConstructionTrace::from_jsonl(&text).unwrap(), trace);
    }
}
