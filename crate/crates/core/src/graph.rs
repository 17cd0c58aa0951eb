//! k-uniform hypergraphs and the degree and counting primitives built on them.
//!
//! Vertices are `0..n` and vertex sets are fixed-width bit vectors, so a graph
//! holds at most [`MAX_VERTICES`] vertices. Edges are kept in lexicographic
//! order of their sorted vertex lists, which makes two graphs with the same
//! edge set serialize identically.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, parse_err, Error, Result};

pub const MAX_VERTICES: usize = 128;

pub type Vertex = usize;

/// A set of vertices, stored as a bit vector.
///
/// Ordering is lexicographic on the ascending member lists, not numeric on
/// the underlying bits.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct VertexSet(u128);

/// An edge is a vertex set of exactly `k` members; [`KGraph`] enforces the size.
pub type Edge = VertexSet;

impl VertexSet {
    pub const fn empty() -> Self {
        VertexSet(0)
    }

    pub const fn from_bits(bits: u128) -> Self {
        VertexSet(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        Self::range(0, n)
    }

    /// `{start, ..., end-1}`.
    pub fn range(start: usize, end: usize) -> Self {
        assert!(end <= MAX_VERTICES, "vertex {end} out of range");
        if start >= end {
            return Self::empty();
        }
        let width = end - start;
        let ones = if width == 128 { u128::MAX } else { (1u128 << width) - 1 };
        VertexSet(ones << start)
    }

    pub fn singleton(v: Vertex) -> Self {
        assert!(v < MAX_VERTICES, "vertex {v} out of range");
        VertexSet(1u128 << v)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, v: Vertex) -> bool {
        v < MAX_VERTICES && self.0 >> v & 1 == 1
    }

    pub fn insert(&mut self, v: Vertex) {
        assert!(v < MAX_VERTICES, "vertex {v} out of range");
        self.0 |= 1u128 << v;
    }

    pub fn remove(&mut self, v: Vertex) {
        if v < MAX_VERTICES {
            self.0 &= !(1u128 << v);
        }
    }

    pub fn union(self, other: Self) -> Self {
        VertexSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        VertexSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        VertexSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn first(self) -> Option<Vertex> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Largest member plus one, or 0 for the empty set.
    pub fn bound(self) -> usize {
        128 - self.0.leading_zeros() as usize
    }

    pub fn iter(self) -> Members {
        Members(self.0)
    }

    pub fn to_vec(self) -> Vec<Vertex> {
        self.iter().collect()
    }

    /// All `size`-subsets in lexicographic order.
    pub fn subsets(self, size: usize) -> Subsets {
        Subsets::new(self.to_vec(), size)
    }
}

impl Ord for VertexSet {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        // Members below the lowest differing bit agree; whoever owns that bit
        // is smaller unless the other sequence has already ended.
        let m = diff.trailing_zeros();
        let (mine, rest_of_other) = if self.0 >> m & 1 == 1 {
            (true, other.0 >> m)
        } else {
            (false, self.0 >> m)
        };
        match (mine, rest_of_other != 0) {
            (true, true) => Ordering::Less,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Greater,
            (false, false) => Ordering::Less,
        }
    }
}

impl PartialOrd for VertexSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FromIterator<Vertex> for VertexSet {
    fn from_iter<I: IntoIterator<Item = Vertex>>(iter: I) -> Self {
        let mut set = VertexSet::empty();
        for v in iter {
            set.insert(v);
        }
        set
    }
}

impl<const N: usize> From<[Vertex; N]> for VertexSet {
    fn from(vs: [Vertex; N]) -> Self {
        vs.into_iter().collect()
    }
}

impl IntoIterator for VertexSet {
    type Item = Vertex;
    type IntoIter = Members;

    fn into_iter(self) -> Members {
        self.iter()
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in self.iter() {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Ascending iterator over the members of a [`VertexSet`].
#[derive(Clone)]
pub struct Members(u128);

impl Iterator for Members {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        if self.0 == 0 {
            return None;
        }
        let v = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

/// Fixed-size subsets of a ground set, in lexicographic order.
pub struct Subsets {
    ground: Vec<Vertex>,
    idx: Vec<usize>,
    done: bool,
}

impl Subsets {
    fn new(ground: Vec<Vertex>, size: usize) -> Self {
        let done = size > ground.len();
        Subsets {
            ground,
            idx: (0..size).collect(),
            done,
        }
    }
}

impl Iterator for Subsets {
    type Item = VertexSet;

    fn next(&mut self) -> Option<VertexSet> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&i| self.ground[i]).collect();
        let r = self.idx.len();
        let n = self.ground.len();
        // advance to the next combination
        let mut i = r;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < n - r + i {
                self.idx[i] += 1;
                for j in i + 1..r {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Binomial coefficient; 0 when `r > n`.
pub fn binom(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial coefficient overflows u64")
}

/// A degree together with its complement count (the `deg` / `deg-bar` pair).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RestrictedDegree {
    pub deg: u64,
    pub co_deg: u64,
}

/// Edge count of a type class together with the number of missing edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeCounts {
    pub e: u64,
    pub e_bar: u64,
}

/// A k-uniform hypergraph on vertices `0..n`.
#[derive(Clone, PartialEq, Eq)]
pub struct KGraph {
    n: usize,
    k: usize,
    edges: Vec<Edge>,
    incidence: Vec<Vec<u32>>,
}

impl KGraph {
    /// Builds a graph from edges given as vertex sets. Rejects wrong arity,
    /// out-of-range vertices and duplicate edges.
    pub fn new(n: usize, k: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if n > MAX_VERTICES {
            return invalid(format!("n = {n} exceeds the {MAX_VERTICES}-vertex limit"));
        }
        if k == 0 {
            return invalid("uniformity k must be at least 1");
        }
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            if e.len() != k {
                return invalid(format!("edge {{{e}}} has {} vertices, expected {k}", e.len()));
            }
            if e.bound() > n {
                return invalid(format!("edge {{{e}}} has a vertex outside 0..{n}"));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate edge {{{}}}", w[0]));
        }
        Ok(Self::from_sorted(n, k, edges))
    }

    /// Convenience constructor from vertex lists; repeated vertices in a list
    /// are rejected.
    pub fn from_lists<E, I>(n: usize, k: usize, lists: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: AsRef<[Vertex]>,
    {
        let mut edges = Vec::new();
        for list in lists {
            edges.push(edge_from_list(list.as_ref(), n)?);
        }
        Self::new(n, k, edges)
    }

    fn from_sorted(n: usize, k: usize, edges: Vec<Edge>) -> Self {
        let mut incidence = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            for v in e.iter() {
                incidence[v].push(i as u32);
            }
        }
        KGraph {
            n,
            k,
            edges,
            incidence,
        }
    }

    pub fn empty(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, std::iter::empty())
    }

    pub fn complete(n: usize, k: usize) -> Result<Self> {
        if n > MAX_VERTICES {
            return invalid(format!("n = {n} exceeds the {MAX_VERTICES}-vertex limit"));
        }
        let edges: Vec<Edge> = VertexSet::full(n).subsets(k).collect();
        Self::new(n, k, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    /// Edges in canonical (lexicographic) order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Indices (into [`edges`](Self::edges)) of the edges containing `v`.
    pub fn incident(&self, v: Vertex) -> &[u32] {
        &self.incidence[v]
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        e.len() == self.k && self.edges.binary_search(&e).is_ok()
    }

    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    /// Edges containing every vertex of `s`, in canonical order.
    pub fn edges_containing(&self, s: VertexSet) -> impl Iterator<Item = Edge> + '_ {
        let pivot = s.iter().min_by_key(|&v| self.incidence.get(v).map_or(0, Vec::len));
        let candidates: Box<dyn Iterator<Item = Edge> + '_> = match pivot {
            None => Box::new(self.edges.iter().copied()),
            Some(v) if v >= self.n => Box::new(std::iter::empty()),
            Some(v) => Box::new(self.incidence[v].iter().map(|&i| self.edges[i as usize])),
        };
        candidates.filter(move |e| s.is_subset(*e))
    }

    fn check_in_range(&self, s: VertexSet, what: &str) -> Result<()> {
        if s.bound() > self.n {
            return invalid(format!("{what} {{{s}}} has a vertex outside 0..{}", self.n));
        }
        Ok(())
    }

    /// Number of edges containing `s`.
    pub fn degree(&self, s: VertexSet) -> Result<u64> {
        if s.len() > self.k {
            return invalid(format!("|S| = {} exceeds k = {}", s.len(), self.k));
        }
        self.check_in_range(s, "S")?;
        Ok(self.edges_containing(s).count() as u64)
    }

    /// Minimum `d`-degree over all `d`-subsets of the vertex set.
    ///
    /// Graphs with fewer than `k` vertices have minimum degree 0.
    pub fn min_d_degree(&self, d: usize) -> Result<u64> {
        if d == 0 || d >= self.k {
            return invalid(format!("d = {d} outside 1..={}", self.k.saturating_sub(1)));
        }
        if self.n < self.k {
            return Ok(0);
        }
        let counts = self.d_set_degrees(d);
        if (counts.len() as u64) < binom(self.n, d) {
            return Ok(0);
        }
        Ok(counts.values().copied().min().unwrap_or(0))
    }

    /// Minimum codegree, the (k-1)-degree.
    pub fn codegree(&self) -> u64 {
        if self.k < 2 {
            return self.edges.len() as u64;
        }
        self.min_d_degree(self.k - 1).expect("k-1 is a valid degree order")
    }

    /// Degree of every `d`-set that lies in at least one edge.
    pub fn d_set_degrees(&self, d: usize) -> HashMap<VertexSet, u64> {
        let mut counts = HashMap::new();
        for e in &self.edges {
            for s in e.subsets(d) {
                *counts.entry(s).or_insert(0) += 1;
            }
        }
        counts
    }

    /// `deg(S, R)` and its complement: the number of `(k-|S|)`-sets `T` inside
    /// `R \ S` completing `S` to an edge, and `C(|R \ S|, k-|S|)` minus that.
    pub fn deg_in(&self, s: VertexSet, r: VertexSet) -> Result<RestrictedDegree> {
        if s.len() >= self.k {
            return invalid(format!("|S| = {} must be below k = {}", s.len(), self.k));
        }
        self.check_in_range(s, "S")?;
        let pool = r.difference(s);
        let deg = self
            .edges_containing(s)
            .filter(|e| e.difference(s).is_subset(pool))
            .count() as u64;
        let total = binom(pool.len(), self.k - s.len());
        Ok(RestrictedDegree {
            deg,
            co_deg: total - deg,
        })
    }

    /// Number of edges of type `X^i Y^j` and the number of missing ones.
    pub fn subset_counts(&self, x: VertexSet, y: VertexSet, i: usize, j: usize) -> Result<EdgeCounts> {
        if !x.is_disjoint(y) {
            return invalid("X and Y overlap");
        }
        if i + j != self.k {
            return invalid(format!("i + j = {} but k = {}", i + j, self.k));
        }
        let e = self
            .edges
            .iter()
            .filter(|e| e.intersection(x).len() == i && e.intersection(y).len() == j)
            .count() as u64;
        let total = binom(x.len(), i) * binom(y.len(), j);
        Ok(EdgeCounts { e, e_bar: total - e })
    }

    /// Degree of `l` in the subgraph of type-`X^i Y^(k-i)` edges, with the
    /// complement `C(|X|-l1, i-l1) * C(|Y|-l2, k-i-l2) - deg`.
    pub fn type_degree(&self, l: VertexSet, x: VertexSet, y: VertexSet, i: usize) -> Result<RestrictedDegree> {
        if !x.is_disjoint(y) {
            return invalid("X and Y overlap");
        }
        if i > self.k {
            return invalid(format!("i = {i} exceeds k = {}", self.k));
        }
        if !l.is_subset(x.union(y)) {
            return invalid("L must lie inside X ∪ Y");
        }
        let j = self.k - i;
        let l1 = l.intersection(x).len();
        let l2 = l.intersection(y).len();
        if l1 > i || l2 > j {
            return invalid("L has more vertices in X or Y than the type allows");
        }
        let deg = self
            .edges_containing(l)
            .filter(|e| e.intersection(x).len() == i && e.intersection(y).len() == j)
            .count() as u64;
        let total = binom(x.len() - l1, i - l1) * binom(y.len() - l2, j - l2);
        Ok(RestrictedDegree {
            deg,
            co_deg: total - deg,
        })
    }

    /// The link of `s` inside `r`: the `(k-|s|)`-graph on `r \ s` whose edges
    /// complete `s` to an edge of this graph. With `s` empty this is the
    /// induced subgraph on `r`.
    pub fn link_graph(&self, s: VertexSet, r: VertexSet) -> Result<Link> {
        if s.len() >= self.k {
            return invalid(format!("|S| = {} must be below k = {}", s.len(), self.k));
        }
        self.check_in_range(s, "S")?;
        let pool = r.difference(s).intersection(self.vertices());
        let labels = pool.to_vec();
        let mut position = [u8::MAX; MAX_VERTICES];
        for (i, &v) in labels.iter().enumerate() {
            position[v] = i as u8;
        }
        let edges: Vec<Edge> = self
            .edges_containing(s)
            .map(|e| e.difference(s))
            .filter(|t| t.is_subset(pool))
            .map(|t| t.iter().map(|v| position[v] as usize).collect::<VertexSet>())
            .collect();
        let graph = Self::new(labels.len(), self.k - s.len(), edges)?;
        Ok(Link { graph, labels })
    }

    /// The subgraph induced on `r`, relabelled to `0..|r|`.
    pub fn induced(&self, r: VertexSet) -> Link {
        self.link_graph(VertexSet::empty(), r)
            .expect("the empty set always has a link")
    }

    /// Number of edges lying inside `r`.
    pub fn edges_inside(&self, r: VertexSet) -> u64 {
        self.edges.iter().filter(|e| e.is_subset(r)).count() as u64
    }

    /// Applies the vertex permutation `perm` (vertex `v` becomes `perm[v]`).
    pub fn relabel(&self, perm: &[Vertex]) -> Result<Self> {
        if perm.len() != self.n || VertexSet::from_iter(perm.iter().copied()) != self.vertices() {
            return invalid("relabelling must be a permutation of the vertex set");
        }
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| e.iter().map(|v| perm[v]).collect::<VertexSet>())
            .collect();
        Self::new(self.n, self.k, edges)
    }

    /// Copy of this graph keeping only the edges accepted by `keep`.
    pub fn retain_edges(&self, mut keep: impl FnMut(Edge) -> bool) -> Self {
        let edges = self.edges.iter().copied().filter(|&e| keep(e)).collect();
        Self::from_sorted(self.n, self.k, edges)
    }

    /// Copy of this graph with extra edges added; duplicates are rejected.
    pub fn with_edges(&self, extra: impl IntoIterator<Item = Edge>) -> Result<Self> {
        Self::new(self.n, self.k, self.edges.iter().copied().chain(extra))
    }

    /// Canonical text form: `n k` then one edge per line.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the text form. Lines starting with `#` and blank lines are
    /// skipped; edge lines may list vertices in any order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("not a vertex number: {tok:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let Some((n, k)) = header else {
                if nums.len() != 2 {
                    return Err(parse_err(line_no, "header must be \"n k\""));
                }
                if nums[0] > MAX_VERTICES {
                    return Err(parse_err(line_no, format!("n exceeds {MAX_VERTICES}")));
                }
                if nums[1] == 0 {
                    return Err(parse_err(line_no, "k must be positive"));
                }
                header = Some((nums[0], nums[1]));
                continue;
            };
            if nums.len() != k {
                return Err(parse_err(
                    line_no,
                    format!("edge has {} vertices, expected {k}", nums.len()),
                ));
            }
            let e = edge_from_list(&nums, n).map_err(|err| match err {
                Error::InvalidArgument(m) => parse_err(line_no, m),
                other => other,
            })?;
            if !seen.insert(e) {
                return Err(parse_err(line_no, format!("duplicate edge {{{e}}}")));
            }
            edges.push(e);
        }
        let (n, k) = header.ok_or_else(|| parse_err(1, "missing \"n k\" header"))?;
        Self::new(n, k, edges)
    }
}

fn edge_from_list(list: &[Vertex], n: usize) -> Result<Edge> {
    let mut e = VertexSet::empty();
    for &v in list {
        if v >= n {
            return invalid(format!("vertex {v} out of range 0..{n}"));
        }
        if e.contains(v) {
            return invalid(format!("repeated vertex {v}"));
        }
        e.insert(v);
    }
    Ok(e)
}

impl fmt::Display for KGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.k)?;
        for e in &self.edges {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for KGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KGraph(n={}, k={}, edges={})", self.n, self.k, self.edges.len())
    }
}

impl FromStr for KGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// A link or induced subgraph together with the map back to the parent's
/// vertex labels: link vertex `i` is parent vertex `labels[i]`.
#[derive(Clone, Debug)]
pub struct Link {
    pub graph: KGraph,
    pub labels: Vec<Vertex>,
}

impl Link {
    /// Maps a set of link vertices to parent vertices.
    pub fn lift(&self, s: VertexSet) -> VertexSet {
        s.iter().map(|i| self.labels[i]).collect()
    }

    /// Maps parent vertices to link vertices, dropping those outside the link.
    pub fn lower(&self, s: VertexSet) -> VertexSet {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &v)| s.contains(v))
            .map(|(i, _)| i)
            .collect()
    }
}
