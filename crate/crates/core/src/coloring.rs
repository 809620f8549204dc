//! Proper (2m−1)-edge-colorings of the complete graph K_{2m}.
//!
//! A proper coloring with 2m−1 colors on 2m vertices is the same thing as a
//! 1-factorization: every color class is a perfect matching, so each vertex
//! sees every color exactly once. [`EdgeColoring`] stores the full color table
//! together with a per-color partner index so that "the neighbor of `v` along
//! color `c`" is an O(1) lookup.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// A vertex of K_{2m}, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub usize);

impl Vertex {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A color in `0..2m-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Color(pub usize);

impl Color {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An undirected colored edge. Endpoints are stored in canonical order `u < v`,
/// so derived equality, ordering and hashing treat `{u, v}` as unordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColoredEdge {
    u: Vertex,
    v: Vertex,
    color: Color,
}

impl ColoredEdge {
    /// Panics if `a == b`.
    pub fn new(a: Vertex, b: Vertex, color: Color) -> Self {
        assert_ne!(a, b, "an edge needs two distinct endpoints");
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        ColoredEdge { u, v, color }
    }

    pub fn u(&self) -> Vertex {
        self.u
    }

    pub fn v(&self) -> Vertex {
        self.v
    }

    pub fn color(&self) -> Color {
        self.color
    }

    pub fn endpoints(&self) -> [Vertex; 2] {
        [self.u, self.v]
    }

    pub fn contains(&self, x: Vertex) -> bool {
        self.u == x || self.v == x
    }

    /// The endpoint opposite to `x`, if `x` is an endpoint.
    pub fn other(&self, x: Vertex) -> Option<Vertex> {
        if self.u == x {
            Some(self.v)
        } else if self.v == x {
            Some(self.u)
        } else {
            None
        }
    }

    pub fn to_triple(&self) -> [usize; 3] {
        [self.u.0, self.v.0, self.color.0]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColoringError {
    #[error("m must be at least 1")]
    ZeroOrder,
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("pair {{{0}, {1}}} listed more than once")]
    DuplicatePair(usize, usize),
    #[error("pair {{{0}, {1}}} has no color")]
    MissingPair(usize, usize),
    #[error("color {color} out of range (must be < {colors})")]
    ColorOutOfRange { color: usize, colors: usize },
    #[error("two edges at vertex {0} share color {1}")]
    AdjacentClash(usize, usize),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
}

const NO_COLOR: usize = usize::MAX;

/// A validated proper (2m−1)-edge-coloring of K_{2m}. Immutable once built.
#[derive(Clone, PartialEq, Eq)]
pub struct EdgeColoring {
    m: usize,
    n: usize,
    /// Row-major n×n, diagonal holds `NO_COLOR`.
    table: Vec<usize>,
    /// `partners[c * n + v]` is the color-`c` neighbor of `v`.
    partners: Vec<usize>,
}

impl fmt::Debug for EdgeColoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EdgeColoring").field("m", &self.m).finish_non_exhaustive()
    }
}

/// Check a list of `(u, v, color)` triples for properness on `2m` vertices and
/// build the coloring. Each unordered pair must appear exactly once, in either
/// orientation.
pub fn validate_proper(m: usize, entries: &[(usize, usize, usize)]) -> Result<EdgeColoring, ColoringError> {
    if m == 0 {
        return Err(ColoringError::ZeroOrder);
    }
    let n = 2 * m;
    let colors = n - 1;
    let mut table = vec![NO_COLOR; n * n];
    for &(u, v, c) in entries {
        for x in [u, v] {
            if x >= n {
                return Err(ColoringError::VertexOutOfRange { vertex: x, n });
            }
        }
        if u == v {
            return Err(ColoringError::SelfLoop(u));
        }
        if c >= colors {
            return Err(ColoringError::ColorOutOfRange { color: c, colors });
        }
        if table[u * n + v] != NO_COLOR {
            return Err(ColoringError::DuplicatePair(u.min(v), u.max(v)));
        }
        table[u * n + v] = c;
        table[v * n + u] = c;
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if table[u * n + v] == NO_COLOR {
                return Err(ColoringError::MissingPair(u, v));
            }
        }
    }
    let mut partners = vec![usize::MAX; colors * n];
    for v in 0..n {
        for w in 0..n {
            if v == w {
                continue;
            }
            let c = table[v * n + w];
            let slot = &mut partners[c * n + v];
            if *slot != usize::MAX {
                return Err(ColoringError::AdjacentClash(v, c));
            }
            *slot = w;
        }
    }
    Ok(EdgeColoring { m, n, table, partners })
}

impl EdgeColoring {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of vertices, `2m`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of colors, `2m − 1`.
    pub fn num_colors(&self) -> usize {
        self.n - 1
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + Clone {
        (0..self.n).map(Vertex)
    }

    pub fn colors(&self) -> impl Iterator<Item = Color> + Clone {
        (0..self.n - 1).map(Color)
    }

    /// Color of the edge `{u, v}`.
    pub fn color_of(&self, u: Vertex, v: Vertex) -> Result<Color, ColoringError> {
        for x in [u, v] {
            if x.0 >= self.n {
                return Err(ColoringError::VertexOutOfRange { vertex: x.0, n: self.n });
            }
        }
        if u == v {
            return Err(ColoringError::SelfLoop(u.0));
        }
        Ok(Color(self.table[u.0 * self.n + v.0]))
    }

    /// Unchecked lookup for hot paths; panics on a self-loop or bad index.
    #[inline]
    pub fn color(&self, u: Vertex, v: Vertex) -> Color {
        debug_assert_ne!(u, v);
        let c = self.table[u.0 * self.n + v.0];
        assert_ne!(c, NO_COLOR, "no color on a self-loop");
        Color(c)
    }

    /// The unique neighbor of `v` joined to it by color `c`.
    #[inline]
    pub fn partner(&self, c: Color, v: Vertex) -> Vertex {
        Vertex(self.partners[c.0 * self.n + v.0])
    }

    pub fn edge(&self, u: Vertex, v: Vertex) -> ColoredEdge {
        ColoredEdge::new(u, v, self.color(u, v))
    }

    /// All edges, sorted by `(u, v)`.
    pub fn edges(&self) -> Vec<ColoredEdge> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                out.push(self.edge(Vertex(u), Vertex(v)));
            }
        }
        out
    }

    /// The `m` edges of color `c`, each listed once.
    pub fn color_class(&self, c: Color) -> Vec<ColoredEdge> {
        self.vertices()
            .filter_map(|v| {
                let w = self.partner(c, v);
                (v < w).then(|| ColoredEdge::new(v, w, c))
            })
            .collect()
    }

    /// Hex SHA-256 over the canonical JSON document.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serialize_coloring(self)))
    }
}

/// The standard round-robin 1-factorization. Vertices `0..2m−1` sit on a cycle
/// and vertex `2m−1` is the fixed point; color `c` pairs `2m−1` with `c` and
/// `c+i` with `c−i` (mod 2m−1) for `i = 1..m−1`.
pub fn round_robin(m: usize) -> EdgeColoring {
    assert!(m >= 1, "round_robin needs m >= 1");
    let n = 2 * m;
    let k = n - 1;
    let mut entries = Vec::with_capacity(m * k);
    for c in 0..k {
        entries.push((n - 1, c, c));
        for i in 1..m {
            entries.push(((c + i) % k, (c + k - i) % k, c));
        }
    }
    validate_proper(m, &entries).expect("round-robin scheme is always proper")
}

fn check_permutation(perm: &[usize], len: usize) -> Result<(), ColoringError> {
    if perm.len() != len {
        return Err(ColoringError::NotAPermutation(len));
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || std::mem::replace(&mut seen[p], true) {
            return Err(ColoringError::NotAPermutation(len));
        }
    }
    Ok(())
}

/// Relabel vertices by `vertex_perm` and colors by `color_perm`, so that the
/// result colors `{σ(u), σ(v)}` with `π(color(u, v))`.
pub fn permute_coloring(
    coloring: &EdgeColoring,
    vertex_perm: &[usize],
    color_perm: &[usize],
) -> Result<EdgeColoring, ColoringError> {
    check_permutation(vertex_perm, coloring.n())?;
    check_permutation(color_perm, coloring.num_colors())?;
    let entries: Vec<_> = coloring
        .edges()
        .iter()
        .map(|e| (vertex_perm[e.u().0], vertex_perm[e.v().0], color_perm[e.color().0]))
        .collect();
    validate_proper(coloring.m(), &entries)
}

/// Round-robin coloring relabelled by a seeded random vertex and color
/// permutation.
pub fn permuted_round_robin(m: usize, seed: u64) -> EdgeColoring {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let base = round_robin(m);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sigma: Vec<usize> = (0..base.n()).collect();
    let mut pi: Vec<usize> = (0..base.num_colors()).collect();
    sigma.shuffle(&mut rng);
    pi.shuffle(&mut rng);
    permute_coloring(&base, &sigma, &pi).expect("shuffles are permutations")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColoringDocument {
    n: usize,
    edges: Vec<[usize; 3]>,
}

/// Canonical JSON: `{"n":2m,"edges":[[u,v,c],...]}` with `u < v`, sorted by `(u, v)`.
pub fn serialize_coloring(coloring: &EdgeColoring) -> Vec<u8> {
    let doc =
        ColoringDocument { n: coloring.n(), edges: coloring.edges().iter().map(ColoredEdge::to_triple).collect() };
    let mut out = serde_json::to_vec(&doc).expect("plain data serializes");
    out.push(b'\n');
    out
}

pub fn parse_coloring(bytes: &[u8]) -> Result<EdgeColoring, ColoringError> {
    let doc: ColoringDocument = serde_json::from_slice(bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ColoringError::Schema(e.to_string()),
        _ => ColoringError::Syntax(e.to_string()),
    })?;
    if doc.n < 2 || !doc.n.is_multiple_of(2) {
        return Err(ColoringError::Schema(format!("n = {} must be a positive even number", doc.n)));
    }
    let mut seen = HashSet::with_capacity(doc.edges.len());
    for &[u, v, _] in &doc.edges {
        if u >= v {
            return Err(ColoringError::Schema(format!("edge [{u}, {v}] must satisfy u < v")));
        }
        if v >= doc.n {
            return Err(ColoringError::Schema(format!("vertex {v} out of range for n = {}", doc.n)));
        }
        if !seen.insert((u, v)) {
            return Err(ColoringError::Schema(format!("pair [{u}, {v}] appears more than once")));
        }
    }
    let entries: Vec<_> = doc.edges.iter().map(|&[u, v, c]| (u, v, c)).collect();
    validate_proper(doc.n / 2, &entries)
}
