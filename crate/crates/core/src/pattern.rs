//! The two-edge pattern `Y(k, ell)` and its copies inside a host graph.
//!
//! A copy is stored as its shared `ell`-set plus the two private sides. The
//! orientation is canonical (`side1 < side2`), which is the same as
//! `edge1 < edge2` because both edges contain the shared set.
//!
//! Copy search scans edges directly instead of leaning on a Turán-type edge
//! bound: Frankl and Füredi show a `Y(k, ell)`-free k-graph has
//! `O(n^max(ell, k-ell-1))` edges, which is why greedy copy finding works on
//! dense graphs, but the constant is not explicit, so existence is always
//! decided by exhaustive search here.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::graph::{Edge, KGraph, Link, VertexSet};

/// Two k-edges sharing exactly `ell` vertices; spans `2k - ell` vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct YPattern {
    k: usize,
    ell: usize,
}

impl YPattern {
    pub fn new(k: usize, ell: usize) -> Result<Self> {
        if k < 2 {
            return invalid(format!("pattern uniformity k = {k} must be at least 2"));
        }
        if ell >= k {
            return invalid(format!("ell = {ell} must be below k = {k}"));
        }
        Ok(YPattern { k, ell })
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn ell(self) -> usize {
        self.ell
    }

    /// Number of vertices in a copy, `2k - ell`.
    pub fn span(self) -> usize {
        2 * self.k - self.ell
    }

    fn check_host(self, h: &KGraph) -> Result<()> {
        if h.k() != self.k {
            return invalid(format!(
                "pattern is {}-uniform but the graph is {}-uniform",
                self.k,
                h.k()
            ));
        }
        Ok(())
    }
}

impl fmt::Display for YPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Y({},{})", self.k, self.ell)
    }
}

/// A concrete copy of a `YPattern`: edges `shared ∪ side1` and `shared ∪ side2`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct YCopy {
    shared: VertexSet,
    side1: VertexSet,
    side2: VertexSet,
}

impl YCopy {
    /// Builds a copy from its three parts, normalizing the orientation.
    pub fn new(shared: VertexSet, side1: VertexSet, side2: VertexSet) -> Result<Self> {
        if !shared.is_disjoint(side1) || !shared.is_disjoint(side2) || !side1.is_disjoint(side2) {
            return invalid("shared set and sides must be pairwise disjoint");
        }
        if side1.len() != side2.len() || side1.is_empty() {
            return invalid("sides must be nonempty and of equal size");
        }
        let (side1, side2) = if side1 <= side2 { (side1, side2) } else { (side2, side1) };
        Ok(YCopy { shared, side1, side2 })
    }

    /// The copy spanned by two distinct edges of equal size.
    pub fn from_edges(e1: Edge, e2: Edge) -> Result<Self> {
        if e1.len() != e2.len() || e1 == e2 {
            return invalid("a copy needs two distinct edges of equal size");
        }
        let shared = e1.intersection(e2);
        Self::new(shared, e1.difference(shared), e2.difference(shared))
    }

    pub fn shared(&self) -> VertexSet {
        self.shared
    }

    pub fn side1(&self) -> VertexSet {
        self.side1
    }

    pub fn side2(&self) -> VertexSet {
        self.side2
    }

    pub fn edge1(&self) -> Edge {
        self.shared.union(self.side1)
    }

    pub fn edge2(&self) -> Edge {
        self.shared.union(self.side2)
    }

    pub fn vertices(&self) -> VertexSet {
        self.shared.union(self.side1).union(self.side2)
    }

    /// Whether this copy has the shape of `pattern` (sizes only, not edges).
    pub fn matches(&self, pattern: YPattern) -> bool {
        self.shared.len() == pattern.ell() && self.side1.len() == pattern.k() - pattern.ell()
    }

    /// Maps a copy found in a link or induced subgraph back to parent labels.
    pub fn lift(&self, link: &Link) -> YCopy {
        YCopy {
            shared: link.lift(self.shared),
            side1: link.lift(self.side1),
            side2: link.lift(self.side2),
        }
    }

    /// Adds `extra` to the shared set, turning a link copy of `Y(k-|extra|, ell-|extra|)`
    /// into a copy of `Y(k, ell)`.
    pub fn with_shared(&self, extra: VertexSet) -> Result<YCopy> {
        YCopy::new(self.shared.union(extra), self.side1, self.side2)
    }

    fn sort_key(&self) -> (Edge, Edge) {
        (self.edge1(), self.edge2())
    }
}

impl Ord for YCopy {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for YCopy {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for YCopy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} | {}", self.shared, self.side1, self.side2)
    }
}

impl fmt::Debug for YCopy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "YCopy({self})")
    }
}

impl FromStr for YCopy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return invalid(format!("copy line needs three '|'-separated parts: {s:?}"));
        }
        let mut sets = [VertexSet::empty(); 3];
        for (slot, part) in sets.iter_mut().zip(&parts) {
            for tok in part.split_whitespace() {
                let v: usize = tok
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("not a vertex number: {tok:?}")))?;
                if v >= crate::graph::MAX_VERTICES {
                    return invalid(format!("vertex {v} out of range"));
                }
                if slot.contains(v) {
                    return invalid(format!("repeated vertex {v}"));
                }
                slot.insert(v);
            }
        }
        YCopy::new(sets[0], sets[1], sets[2])
    }
}

/// Every copy of `pattern` in `h`, once each, sorted by `(edge1, edge2)`.
pub fn enumerate_copies(h: &KGraph, pattern: YPattern) -> Result<Vec<YCopy>> {
    Ok(copy_edge_pairs(h, pattern)?
        .into_iter()
        .map(|(i, j)| copy_of(h, i, j))
        .collect())
}

/// Edge-index pairs `(i, j)`, `i < j`, whose edges meet in exactly `ell`
/// vertices, in canonical order.
pub(crate) fn copy_edge_pairs(h: &KGraph, pattern: YPattern) -> Result<Vec<(u32, u32)>> {
    pattern.check_host(h)?;
    let mut pairs = Vec::new();
    for i in 0..h.edge_count() {
        partners(h, pattern, i, VertexSet::empty(), |j| {
            pairs.push((i as u32, j as u32));
            false
        });
    }
    Ok(pairs)
}

/// Calls `visit` on each partner `j > i` of edge `i` that avoids `forbidden`,
/// in increasing order, until `visit` returns true. Returns whether it did.
fn partners(
    h: &KGraph,
    pattern: YPattern,
    i: usize,
    forbidden: VertexSet,
    visit: impl FnMut(usize) -> bool,
) -> bool {
    let e1 = h.edges()[i];
    let ell = pattern.ell();
    let ok = |j: usize| {
        let e2 = h.edges()[j];
        e2.intersection(e1).len() == ell && e2.is_disjoint(forbidden)
    };
    if ell == 0 {
        return (i + 1..h.edge_count()).filter(|&j| ok(j)).any(visit);
    }
    // with ell >= 1 every partner meets e1, so it sits in an incidence list of e1
    let mut cand: Vec<u32> = e1
        .iter()
        .flat_map(|v| h.incident(v).iter().copied())
        .filter(|&j| j as usize > i)
        .collect();
    cand.sort_unstable();
    cand.dedup();
    cand.into_iter().map(|j| j as usize).filter(|&j| ok(j)).any(visit)
}

fn copy_of(h: &KGraph, i: u32, j: u32) -> YCopy {
    let (e1, e2) = (h.edges()[i as usize], h.edges()[j as usize]);
    let shared = e1.intersection(e2);
    // i < j in canonical edge order, so e1 < e2 and the orientation is already canonical
    YCopy {
        shared,
        side1: e1.difference(shared),
        side2: e2.difference(shared),
    }
}

/// The canonically first copy disjoint from `forbidden`, if any.
pub fn find_copy_avoiding(h: &KGraph, pattern: YPattern, forbidden: VertexSet) -> Result<Option<YCopy>> {
    pattern.check_host(h)?;
    for i in 0..h.edge_count() {
        if !h.edges()[i].is_disjoint(forbidden) {
            continue;
        }
        let mut found = None;
        if partners(h, pattern, i, forbidden, |j| {
            found = Some(j);
            true
        }) {
            return Ok(found.map(|j| copy_of(h, i as u32, j as u32)));
        }
    }
    Ok(None)
}

pub fn is_y_free(h: &KGraph, pattern: YPattern) -> Result<bool> {
    Ok(find_copy_avoiding(h, pattern, VertexSet::empty())?.is_none())
}
