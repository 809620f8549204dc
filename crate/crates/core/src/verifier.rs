//! Certificate checking from raw edge lists.
//!
//! Nothing here trusts the cached indices of [`RainbowTree`](crate::forest::RainbowTree)
//! or the constructor's bookkeeping: every check is re-derived from the
//! `[u, v, color]` triples and color lookups in the [`EdgeColoring`].

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::coloring::{EdgeColoring, Vertex};
use crate::constructor::ConstructionTrace;
use crate::forest::{ForestRecord, TreeRecord};

type Pair = (usize, usize);

fn pair(u: usize, v: usize) -> Pair {
    (u.min(v), u.max(v))
}

fn pairs_of(tree: &TreeRecord) -> BTreeSet<Pair> {
    tree.edges.iter().map(|&[u, v, _]| pair(u, v)).collect()
}

/// Guaranteed tree count, by search rather than square roots: the largest
/// `t` with `9t² ≤ 6m + 9`.
fn guaranteed_count(m: usize) -> usize {
    (1..).take_while(|t| 9 * t * t <= 6 * m + 9).last().unwrap_or(0)
}

/// Outcome of checking one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeCheck {
    pub edge_count: usize,
    pub spanning: bool,
    pub acyclic: bool,
    pub rainbow: bool,
    pub colors_match: bool,
    pub problems: Vec<String>,
    pub pass: bool,
}

/// Rainbow spanning tree check: `2m−1` edges, connected, acyclic, all colors
/// distinct and every stored color equal to the coloring's.
pub fn verify_rainbow_spanning_tree(coloring: &EdgeColoring, tree: &TreeRecord) -> TreeCheck {
    let n = coloring.n();
    let mut problems = Vec::new();
    let mut colors_match = true;
    let mut in_range = true;
    let mut seen_colors = BTreeSet::new();
    let mut rainbow = true;
    for &[u, v, c] in &tree.edges {
        if u >= n || v >= n || u == v {
            problems.push(format!("edge [{u}, {v}] is not an edge of K_{n}"));
            in_range = false;
            continue;
        }
        let actual = coloring.color(Vertex(u), Vertex(v)).0;
        if actual != c {
            colors_match = false;
            problems.push(format!("edge [{u}, {v}] stored with color {c}, coloring gives {actual}"));
        }
        if !seen_colors.insert(c) {
            rainbow = false;
            problems.push(format!("color {c} repeated"));
        }
    }
    if tree.root >= n {
        problems.push(format!("root {} out of range", tree.root));
    }

    // Union-find over the valid edges; a merge of two already-joined vertices
    // (including a repeated pair) is a cycle.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut acyclic = in_range;
    let mut components = n;
    for &[u, v, _] in tree.edges.iter().filter(|&&[u, v, _]| u < n && v < n && u != v) {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            acyclic = false;
        } else {
            parent[a] = b;
            components -= 1;
        }
    }
    if !acyclic {
        problems.push("edge set contains a cycle or an invalid edge".into());
    }
    let spanning = components == 1;
    if !spanning {
        problems.push(format!("{components} connected components"));
    }
    let edge_count = tree.edges.len();
    if edge_count != n - 1 {
        problems.push(format!("{edge_count} edges, expected {}", n - 1));
    }
    let pass = problems.is_empty();
    TreeCheck { edge_count, spanning, acyclic, rainbow, colors_match, problems, pass }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisjointnessCheck {
    /// `shared[a][b]`: number of vertex pairs used by both tree `a` and tree `b`.
    pub shared: Vec<Vec<usize>>,
    pub total_edges: usize,
    pub distinct_edges: usize,
    pub pass: bool,
}

/// No unordered pair may appear twice across the forest.
pub fn verify_edge_disjoint(forest: &ForestRecord) -> DisjointnessCheck {
    let mut owners: BTreeMap<Pair, Vec<usize>> = BTreeMap::new();
    let mut total_edges = 0;
    for (t, tree) in forest.trees.iter().enumerate() {
        for &[u, v, _] in &tree.edges {
            owners.entry(pair(u, v)).or_default().push(t);
            total_edges += 1;
        }
    }
    let count = forest.trees.len();
    let mut shared = vec![vec![0; count]; count];
    for trees in owners.values() {
        for (x, &a) in trees.iter().enumerate() {
            for &b in &trees[x + 1..] {
                shared[a][b] += 1;
                if a != b {
                    shared[b][a] += 1;
                }
            }
        }
    }
    let distinct_edges = owners.len();
    DisjointnessCheck { shared, total_edges, distinct_edges, pass: distinct_edges == total_edges }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootCheck {
    pub tree: usize,
    pub root: usize,
    pub expected_degree: i64,
    pub actual_degree: i64,
    pub min_root_leaves: i64,
    pub actual_root_leaves: i64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureCheck {
    pub psi: usize,
    pub distinct_roots: bool,
    pub roots: Vec<RootCheck>,
    pub pass: bool,
}

/// Degree/leaf conditions for `ψ` trees. Degrees are exact; root-leaf counts
/// are lower bounds (clamped at zero).
pub fn verify_structure_f(forest: &ForestRecord, psi: usize, m: usize) -> StructureCheck {
    let top = 2 * m as i64 - 1;
    let p = psi as i64;
    let n = 2 * m;
    let distinct: BTreeSet<usize> = forest.trees.iter().map(|t| t.root).collect();
    let distinct_roots = distinct.len() == forest.trees.len();
    let mut roots = Vec::new();
    for (idx, tree) in forest.trees.iter().enumerate() {
        let i = idx as i64 + 1;
        let (expected_degree, min_leaves) = if i == 1 {
            (top - 2 * (p - 1), top - 4 * (p - 1))
        } else {
            (top - i - 2 * (p - i), top - 2 * i - 4 * (p - i))
        };
        let mut degree = vec![0i64; n];
        let mut root_neighbors = Vec::new();
        for &[u, v, _] in tree.edges.iter().filter(|&&[u, v, _]| u < n && v < n) {
            degree[u] += 1;
            degree[v] += 1;
            if u == tree.root {
                root_neighbors.push(v);
            } else if v == tree.root {
                root_neighbors.push(u);
            }
        }
        let actual_degree = if tree.root < n { degree[tree.root] } else { -1 };
        let actual_root_leaves = root_neighbors.iter().filter(|&&x| degree[x] == 1).count() as i64;
        let min_root_leaves = min_leaves.max(0);
        roots.push(RootCheck {
            tree: idx + 1,
            root: tree.root,
            expected_degree,
            actual_degree,
            min_root_leaves,
            actual_root_leaves,
            pass: actual_degree == expected_degree && actual_root_leaves >= min_root_leaves,
        });
    }
    let pass = distinct_roots && forest.trees.len() == psi && roots.iter().all(|r| r.pass);
    StructureCheck { psi, distinct_roots, roots, pass }
}

/// One named check on a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceFinding {
    pub k: usize,
    pub i: Option<usize>,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceCheck {
    pub rounds_checked: usize,
    pub steps_checked: usize,
    pub failures: Vec<TraceFinding>,
    pub pass: bool,
}

fn root_leaves(tree: &TreeRecord) -> BTreeSet<usize> {
    let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
    for &[u, v, _] in &tree.edges {
        *degree.entry(u).or_default() += 1;
        *degree.entry(v).or_default() += 1;
    }
    tree.edges
        .iter()
        .filter_map(|&[u, v, _]| {
            let other = if u == tree.root {
                v
            } else if v == tree.root {
                u
            } else {
                return None;
            };
            (degree[&other] == 1).then_some(other)
        })
        .collect()
}

fn has_cycle(n: usize, edges: &BTreeSet<Pair>) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in edges {
        if u >= n || v >= n {
            return true;
        }
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            return true;
        }
        parent[a] = b;
    }
    false
}

/// Re-derive every per-round claim from the trace's tree snapshots: the leaf
/// count bound, `|L*| > 6k − 7`, nonempty candidate sets, the aggregate
/// elimination bound at the last step, pairwise disjointness of the revised
/// trees and the intermediate k-th trees, and acyclicity of every
/// intermediate k-th tree.
pub fn verify_trace_bounds(trace: &ConstructionTrace, m: usize) -> TraceCheck {
    let n = 2 * m;
    let mut failures = Vec::new();
    let mut fail = |k: usize, i: Option<usize>, check: &str, detail: String| {
        failures.push(TraceFinding { k, i, check: check.to_string(), detail });
    };
    if trace.m != m {
        fail(0, None, "order", format!("trace is for m = {}, expected {m}", trace.m));
    }
    let expected_rounds: Vec<usize> = (2..=guaranteed_count(m)).collect();
    let actual_rounds: Vec<usize> = trace.rounds.iter().map(|r| r.k).collect();
    if actual_rounds != expected_rounds {
        fail(0, None, "rounds", format!("rounds {actual_rounds:?}, expected {expected_rounds:?}"));
    }
    let mut steps_checked = 0;
    for round in &trace.rounds {
        let k = round.k;
        let kk = k as i64;
        if round.trees_before.len() + 1 != k || round.trees_after.len() != k {
            fail(k, None, "snapshots", "tree snapshot counts do not match the round".into());
            continue;
        }
        // L_{k-1} from the entry snapshot.
        let mut common: Option<BTreeSet<usize>> = None;
        for t in &round.trees_before {
            let leaves = root_leaves(t);
            common = Some(match common {
                None => leaves,
                Some(c) => c.intersection(&leaves).copied().collect(),
            });
        }
        let common = common.unwrap_or_default();
        let recorded: BTreeSet<usize> = round.common_leaves.iter().map(|v| v.0).collect();
        if recorded != common || round.leaf_count != common.len() {
            fail(
                k,
                None,
                "leaf set",
                format!("recorded {} common leaves, snapshots give {}", round.leaf_count, common.len()),
            );
        }
        let bound = 2 * m as i64 - 3 * kk * kk + 6 * kk - 1;
        if (common.len() as i64) < bound {
            fail(k, None, "leaf bound", format!("|L| = {} < {bound}", common.len()));
        }
        if !common.contains(&round.r_k.0) || !common.contains(&round.w_k.0) || round.r_k == round.w_k {
            fail(k, None, "anchors", "anchors are not two distinct common leaves".into());
        }
        let star_size = common.len() as i64 - 2;
        if star_size <= 6 * kk - 7 {
            fail(k, None, "candidate bound", format!("|L*| = {star_size} <= {}", 6 * kk - 7));
        }

        let idx: Vec<usize> = round.steps.iter().map(|s| s.i).collect();
        if idx != (1..k).collect::<Vec<_>>() {
            fail(k, None, "steps", format!("steps {idx:?}, expected 1..{k}"));
            continue;
        }
        let r_k = round.r_k.0;
        let w_k = round.w_k.0;
        let before: Vec<BTreeSet<Pair>> = round.trees_before.iter().map(pairs_of).collect();
        let after: Vec<BTreeSet<Pair>> = round.trees_after.iter().map(pairs_of).collect();
        let mut ws = Vec::new();
        let mut w_primes = Vec::new();
        for step in &round.steps {
            steps_checked += 1;
            let i = step.i;
            let si = Some(i);
            let l_star: BTreeSet<usize> = common.iter().copied().filter(|&x| x != r_k && x != w_k).collect();
            let cands: BTreeSet<usize> = step.candidates_before.iter().map(|v| v.0).collect();
            if cands != l_star || step.bound_lhs != l_star.len() as i64 {
                fail(k, si, "candidates", "candidate set is not L \\ {r_k, w_k}".into());
            }
            let admissible: BTreeSet<usize> = step.admissible.iter().map(|v| v.0).collect();
            if admissible.is_empty() {
                fail(k, si, "nonempty", "admissible set is empty".into());
            }
            let rejected: BTreeSet<usize> = step.eliminated.union().iter().map(|v| v.0).collect();
            if admissible != cands.difference(&rejected).copied().collect() {
                fail(k, si, "filter", "admissible set disagrees with the recorded eliminations".into());
            }
            if i == k - 1 && cands.len() - admissible.len() > (6 * k).saturating_sub(7) {
                fail(
                    k,
                    si,
                    "elimination bound",
                    format!("{} eliminated > {}", cands.len() - admissible.len(), 6 * k - 7),
                );
            }
            let (Some(v), Some(w), Some(vp), Some(wp)) = (step.chosen, step.w, step.v_prime, step.w_prime) else {
                fail(k, si, "record", "step did not complete".into());
                continue;
            };
            if !admissible.contains(&v.0) {
                fail(k, si, "choice", format!("chosen {v} is not admissible"));
            }
            ws.push(w.0);
            w_primes.push(wp.0);
            // Revised tree i: exactly the two new edges, none shared with the
            // already-revised trees or the not-yet-revised ones.
            let new_edges: BTreeSet<Pair> = after[i - 1].difference(&before[i - 1]).copied().collect();
            let want: BTreeSet<Pair> = [pair(v.0, vp.0), pair(r_k, w.0)].into();
            if new_edges != want {
                fail(k, si, "new edges", format!("new edges {new_edges:?}, expected {want:?}"));
            }
            for a in 1..i {
                if !after[i - 1].is_disjoint(&after[a - 1]) {
                    fail(k, si, "revised-disjoint", format!("revised tree {i} shares an edge with revised tree {a}"));
                }
            }
            for b in i + 1..k {
                if !new_edges.is_disjoint(&before[b - 1]) {
                    fail(k, si, "new-edges-fresh", format!("a new edge of tree {i} lies in unrevised tree {b}"));
                }
            }
        }
        if ws.len() != k - 1 {
            continue;
        }
        // Rebuild T_k^k(0..k) from the recorded w_i, w'_i and recheck.
        let Some(wpk) = round.w_prime_k else {
            fail(k, None, "record", "round did not finalize".into());
            continue;
        };
        let mut partial: BTreeSet<Pair> = (0..n).filter(|&x| x != r_k).map(|x| pair(r_k, x)).collect();
        let trades: Vec<(usize, usize)> =
            ws.iter().copied().zip(w_primes.iter().copied()).chain([(w_k, wpk.0)]).collect();
        for (step, &(w, wp)) in trades.iter().enumerate() {
            let i = step + 1;
            if !partial.remove(&pair(r_k, w)) {
                fail(k, Some(i), "partial-acyclic", format!("{w} is not adjacent to r_k before its trade"));
            }
            partial.insert(pair(w, wp));
            if has_cycle(n, &partial) || partial.len() != n - 1 {
                fail(k, Some(i), "partial-acyclic", format!("T_k^k({i}) is not acyclic"));
            }
            if i == k {
                for a in 1..k {
                    if !partial.is_disjoint(&after[a - 1]) {
                        fail(
                            k,
                            Some(i),
                            "final-disjoint",
                            format!("the k-th tree shares an edge with revised tree {a}"),
                        );
                    }
                }
            } else {
                for a in 1..=i {
                    if !partial.is_disjoint(&after[a - 1]) {
                        fail(
                            k,
                            Some(i),
                            "partial-vs-revised",
                            format!("T_k^k({i}) shares an edge with revised tree {a}"),
                        );
                    }
                }
                for b in i + 1..k {
                    let shared: BTreeSet<Pair> = partial.intersection(&before[b - 1]).copied().collect();
                    if shared != [pair(r_k, round.trees_before[b - 1].root)].into() {
                        fail(
                            k,
                            Some(i),
                            "partial-vs-unrevised",
                            format!("T_k^k({i}) meets unrevised tree {b} in {shared:?}"),
                        );
                    }
                }
            }
        }
        if partial != after[k - 1] {
            fail(k, None, "final tree", "replayed k-th tree differs from the snapshot".into());
        }
    }
    let pass = failures.is_empty();
    TraceCheck { rounds_checked: trace.rounds.len(), steps_checked, failures, pass }
}

/// Everything the CLI reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub m: usize,
    pub expected_trees: usize,
    pub tree_count: usize,
    pub order_matches: bool,
    pub digest_matches: Option<bool>,
    pub trees: Vec<TreeCheck>,
    pub disjointness: DisjointnessCheck,
    pub structure: StructureCheck,
    pub trace: Option<TraceCheck>,
    pub verdict: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("plain data serializes");
        out.push(b'\n');
        out
    }
}

/// All checks; the verdict passes iff each one does.
pub fn verify_all(
    coloring: &EdgeColoring,
    forest: &ForestRecord,
    trace: Option<&ConstructionTrace>,
) -> VerificationReport {
    let m = coloring.m();
    let expected_trees = guaranteed_count(m);
    let trees: Vec<TreeCheck> = forest.trees.iter().map(|t| verify_rainbow_spanning_tree(coloring, t)).collect();
    let disjointness = verify_edge_disjoint(forest);
    let structure = verify_structure_f(forest, forest.trees.len(), m);
    let trace = trace.map(|t| verify_trace_bounds(t, m));
    let digest_matches = forest.coloring_digest.as_ref().map(|d| *d == coloring.digest());
    let order_matches = forest.m == m;
    let verdict = order_matches
        && digest_matches != Some(false)
        && forest.trees.len() == expected_trees
        && trees.iter().all(|t| t.pass)
        && disjointness.pass
        && structure.pass
        && trace.as_ref().is_none_or(|t| t.pass);
    VerificationReport {
        m,
        expected_trees,
        tree_count: forest.trees.len(),
        order_matches,
        digest_matches,
        trees,
        disjointness,
        structure,
        trace,
        verdict,
    }
}
