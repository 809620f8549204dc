//! Rooted rainbow spanning trees and the leaf-swap surgery.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{Color, ColoredEdge, EdgeColoring, Vertex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("expected {expected} edges, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error("vertex {0} out of range")]
    VertexOutOfRange(Vertex),
    #[error("edge {{{0}, {1}}} listed twice")]
    DuplicateEdge(Vertex, Vertex),
    #[error("edge {{{u}, {v}}} stored with color {stored}, coloring says {actual}")]
    ColorMismatch { u: Vertex, v: Vertex, stored: Color, actual: Color },
    #[error("color {0} used twice")]
    ColorClash(Color),
    #[error("edge set contains a cycle")]
    CycleDetected,
    #[error("{0} is not the root of this tree")]
    NotRoot(Vertex),
    #[error("{0} is not a leaf adjacent to the root")]
    NotPendant(Vertex),
    #[error("swap would add a degenerate or duplicate edge")]
    DegenerateSwap,
    #[error("cached indices disagree with the edge set: {0}")]
    Inconsistent(&'static str),
}

/// A spanning tree of K_{2m} whose 2m−1 edges use every color exactly once,
/// with a designated root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RainbowTree {
    root: Vertex,
    edges: BTreeSet<ColoredEdge>,
    adjacency: Vec<BTreeSet<Vertex>>,
    /// Indexed by color; a bijection onto `edges`.
    color_edge: Vec<ColoredEdge>,
    root_leaves: BTreeSet<Vertex>,
}

impl RainbowTree {
    /// Validate `edges` against `coloring` and build the tree.
    pub fn new(
        coloring: &EdgeColoring,
        root: Vertex,
        edges: impl IntoIterator<Item = ColoredEdge>,
    ) -> Result<Self, TreeError> {
        let n = coloring.n();
        if root.0 >= n {
            return Err(TreeError::VertexOutOfRange(root));
        }
        let mut set = BTreeSet::new();
        let mut by_color: Vec<Option<ColoredEdge>> = vec![None; n - 1];
        let mut adjacency = vec![BTreeSet::new(); n];
        for e in edges {
            for x in e.endpoints() {
                if x.0 >= n {
                    return Err(TreeError::VertexOutOfRange(x));
                }
            }
            let actual = coloring.color(e.u(), e.v());
            if actual != e.color() {
                return Err(TreeError::ColorMismatch { u: e.u(), v: e.v(), stored: e.color(), actual });
            }
            if !set.insert(e) {
                return Err(TreeError::DuplicateEdge(e.u(), e.v()));
            }
            if by_color[e.color().0].replace(e).is_some() {
                return Err(TreeError::ColorClash(e.color()));
            }
            adjacency[e.u().0].insert(e.v());
            adjacency[e.v().0].insert(e.u());
        }
        if set.len() != n - 1 {
            return Err(TreeError::EdgeCount { expected: n - 1, found: set.len() });
        }
        if !is_connected(&adjacency) {
            // n−1 edges and disconnected means a cycle somewhere.
            return Err(TreeError::CycleDetected);
        }
        let color_edge = by_color.into_iter().map(|e| e.expect("n-1 distinct colors on n-1 edges")).collect();
        let mut tree = RainbowTree { root, edges: set, adjacency, color_edge, root_leaves: BTreeSet::new() };
        tree.root_leaves = tree.recompute_root_leaves();
        Ok(tree)
    }

    pub fn root(&self) -> Vertex {
        self.root
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = &ColoredEdge> {
        self.edges.iter()
    }

    pub fn contains_pair(&self, a: Vertex, b: Vertex) -> bool {
        self.adjacency[a.0].contains(&b)
    }

    pub fn neighbors(&self, x: Vertex) -> &BTreeSet<Vertex> {
        &self.adjacency[x.0]
    }

    pub fn degree(&self, x: Vertex) -> usize {
        self.adjacency[x.0].len()
    }

    /// The unique tree edge of color `c`.
    pub fn tree_edge_of_color(&self, c: Color) -> ColoredEdge {
        self.color_edge[c.0]
    }

    /// Leaves `x` with `{root, x}` a tree edge.
    pub fn root_leaf_set(&self) -> &BTreeSet<Vertex> {
        &self.root_leaves
    }

    fn is_root_leaf(&self, x: Vertex) -> bool {
        x != self.root && self.adjacency[x.0].len() == 1 && self.adjacency[x.0].contains(&self.root)
    }

    /// Root leaves derived from the adjacency alone.
    pub fn recompute_root_leaves(&self) -> BTreeSet<Vertex> {
        self.adjacency[self.root.0].iter().copied().filter(|&x| self.is_root_leaf(x)).collect()
    }

    /// Cross-check the cached adjacency, color index and root leaves against
    /// the edge set.
    pub fn check_consistency(&self) -> Result<(), TreeError> {
        let n = self.n();
        if self.edges.len() != n - 1 || self.color_edge.len() != n - 1 {
            return Err(TreeError::Inconsistent("edge count"));
        }
        for (c, e) in self.color_edge.iter().enumerate() {
            if e.color().0 != c || !self.edges.contains(e) {
                return Err(TreeError::Inconsistent("color index"));
            }
        }
        let degree_sum: usize = self.adjacency.iter().map(BTreeSet::len).sum();
        if degree_sum != 2 * self.edges.len() || self.edges.iter().any(|e| !self.adjacency[e.u().0].contains(&e.v())) {
            return Err(TreeError::Inconsistent("adjacency"));
        }
        if self.root_leaves != self.recompute_root_leaves() {
            return Err(TreeError::Inconsistent("root leaves"));
        }
        Ok(())
    }

    /// `T − ry − rv + yw + vv′`, where `ry`, `rv` are distinct pendant edges
    /// at the root `r`. The result is rainbow exactly when the two added
    /// edges carry the two removed colors, i.e. `φ(ry) = φ(vv′)` and
    /// `φ(rv) = φ(yw)`.
    pub fn apply_swap(
        &self,
        coloring: &EdgeColoring,
        r: Vertex,
        y: Vertex,
        v: Vertex,
        w: Vertex,
        v_prime: Vertex,
    ) -> Result<RainbowTree, TreeError> {
        let n = self.n();
        if let Some(&bad) = [r, y, v, w, v_prime].iter().find(|x| x.0 >= n) {
            return Err(TreeError::VertexOutOfRange(bad));
        }
        if r != self.root {
            return Err(TreeError::NotRoot(r));
        }
        for x in [y, v] {
            if !self.root_leaves.contains(&x) {
                return Err(TreeError::NotPendant(x));
            }
        }
        if y == v || w == r || w == y || v_prime == r || v_prime == v {
            return Err(TreeError::DegenerateSwap);
        }
        let removed = [coloring.edge(r, y), coloring.edge(r, v)];
        let added = [coloring.edge(y, w), coloring.edge(v, v_prime)];
        if added[0].u() == added[1].u() && added[0].v() == added[1].v() {
            return Err(TreeError::DegenerateSwap);
        }

        let mut next = self.clone();
        for e in removed {
            next.edges.remove(&e);
            next.adjacency[e.u().0].remove(&e.v());
            next.adjacency[e.v().0].remove(&e.u());
        }
        for e in added {
            if next.adjacency[e.u().0].contains(&e.v()) {
                return Err(TreeError::DegenerateSwap);
            }
        }
        // Rainbow iff the added colors are exactly the removed ones.
        if let Some(c) = added.iter().map(ColoredEdge::color).find(|&c| removed.iter().all(|e| e.color() != c)) {
            return Err(TreeError::ColorClash(c));
        }
        if added[0].color() == added[1].color() {
            return Err(TreeError::ColorClash(added[0].color()));
        }
        for e in added {
            next.edges.insert(e);
            next.adjacency[e.u().0].insert(e.v());
            next.adjacency[e.v().0].insert(e.u());
            next.color_edge[e.color().0] = e;
        }
        if !is_connected(&next.adjacency) {
            return Err(TreeError::CycleDetected);
        }
        for x in [y, v, w, v_prime] {
            if next.is_root_leaf(x) {
                next.root_leaves.insert(x);
            } else {
                next.root_leaves.remove(&x);
            }
        }
        debug_assert_eq!(next.check_consistency(), Ok(()));
        Ok(next)
    }

    /// Canonical `{root, edges}` record.
    pub fn to_record(&self) -> TreeRecord {
        TreeRecord { root: self.root.0, edges: self.edges.iter().map(ColoredEdge::to_triple).collect() }
    }
}

/// Breadth-first connectivity over an adjacency list.
fn is_connected(adjacency: &[BTreeSet<Vertex>]) -> bool {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = queue.pop_front() {
        for y in &adjacency[x] {
            if !seen[y.0] {
                seen[y.0] = true;
                count += 1;
                queue.push_back(y.0);
            }
        }
    }
    count == n
}

/// The spanning star `S_r`: `r` joined to every other vertex. Always rainbow
/// under a proper coloring.
pub fn base_star(coloring: &EdgeColoring, r: Vertex) -> RainbowTree {
    let edges = coloring.vertices().filter(|&x| x != r).map(|x| coloring.edge(r, x));
    RainbowTree::new(coloring, r, edges).expect("spanning star is a rainbow spanning tree")
}

/// An ordered list of pairwise edge-disjoint rainbow spanning trees with
/// distinct roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest {
    pub m: usize,
    pub trees: Vec<RainbowTree>,
    pub coloring_digest: String,
}

impl Forest {
    pub fn roots(&self) -> Vec<Vertex> {
        self.trees.iter().map(RainbowTree::root).collect()
    }

    pub fn to_record(&self) -> ForestRecord {
        ForestRecord {
            m: self.m,
            coloring_digest: Some(self.coloring_digest.clone()),
            trees: self.trees.iter().map(RainbowTree::to_record).collect(),
        }
    }

    /// Rebuild validated trees from a record. Fails on any tree that is not a
    /// rainbow spanning tree of `coloring`.
    pub fn from_record(coloring: &EdgeColoring, record: &ForestRecord) -> Result<Forest, TreeError> {
        let trees = record
            .trees
            .iter()
            .map(|t| {
                let mut edges = Vec::with_capacity(t.edges.len());
                for &[u, v, c] in &t.edges {
                    if u == v || u >= coloring.n() || v >= coloring.n() {
                        return Err(TreeError::VertexOutOfRange(Vertex(u.max(v))));
                    }
                    edges.push(ColoredEdge::new(Vertex(u), Vertex(v), Color(c)));
                }
                RainbowTree::new(coloring, Vertex(t.root), edges)
            })
            .collect::<Result<_, _>>()?;
        Ok(Forest { m: record.m, trees, coloring_digest: coloring.digest() })
    }
}

/// Raw tree as it appears on disk: a root and `[u, v, color]` triples. Nothing
/// about it is assumed valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub root: usize,
    pub edges: Vec<[usize; 3]>,
}

/// Forest JSON document: `{"m": m, "trees": [{"root": r, "edges": [[u, v, c], ...]}, ...]}`,
/// optionally carrying the digest of the coloring it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestRecord {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coloring_digest: Option<String>,
    pub trees: Vec<TreeRecord>,
}

impl ForestRecord {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("plain data serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }
}

/// Graphviz rendering: one `graph` block per tree, edges labelled by color,
/// root drawn as a double circle.
pub fn to_dot(record: &ForestRecord) -> String {
    let mut out = String::new();
    for (i, tree) in record.trees.iter().enumerate() {
        let _ = writeln!(out, "graph T{} {{", i + 1);
        let _ = writeln!(out, "  {} [shape=doublecircle];", tree.root);
        for [u, v, c] in &tree.edges {
            let _ = writeln!(out, "  {u} -- {v} [label=\"{c}\"];");
        }
        out.push_str("}\n");
    }
    out
}
