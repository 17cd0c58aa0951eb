//! Naive reference computations shared by the integration tests. They work
//! on plain sorted vectors and never touch the library's indexes.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tile_lab::{KGraph, VertexSet};

/// All `r`-subsets of `0..n` as sorted vectors, in lexicographic order.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

pub fn choose(n: usize, r: usize) -> u64 {
    if r > n {
        0
    } else {
        combinations(n, r).len() as u64
    }
}

pub fn edge_lists(h: &KGraph) -> Vec<Vec<usize>> {
    h.edges().iter().map(|e| e.to_vec()).collect()
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|x| b.contains(x)).count()
}

pub fn naive_degree(h: &KGraph, s: &[usize]) -> u64 {
    edge_lists(h).iter().filter(|e| subset(s, e)).count() as u64
}

pub fn naive_min_degree(h: &KGraph, d: usize) -> u64 {
    combinations(h.n(), d)
        .iter()
        .map(|s| naive_degree(h, s))
        .min()
        .unwrap_or(0)
}

/// Number of `T ⊆ r \ s` with `s ∪ T` an edge.
pub fn naive_deg_in(h: &KGraph, s: &[usize], r: &[usize]) -> u64 {
    edge_lists(h)
        .iter()
        .filter(|e| subset(s, e) && e.iter().all(|v| s.contains(v) || (r.contains(v) && !s.contains(v))))
        .count() as u64
}

/// Edges with exactly `i` vertices in `x` and `j` in `y`.
pub fn naive_type_count(h: &KGraph, x: &[usize], y: &[usize], i: usize, j: usize) -> u64 {
    edge_lists(h)
        .iter()
        .filter(|e| overlap(e, x) == i && overlap(e, y) == j)
        .count() as u64
}

/// Unordered pairs of distinct edges meeting in exactly `ell` vertices.
pub fn naive_copy_count(h: &KGraph, ell: usize) -> usize {
    let edges = edge_lists(h);
    let mut count = 0;
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            if overlap(&edges[i], &edges[j]) == ell {
                count += 1;
            }
        }
    }
    count
}

/// Each `k`-subset kept independently with probability `p`.
pub fn random_graph(n: usize, k: usize, p: f64, seed: u64) -> KGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<VertexSet> = combinations(n, k)
        .into_iter()
        .filter(|_| rng.gen_bool(p))
        .map(|e| e.into_iter().collect())
        .collect();
    KGraph::new(n, k, edges).unwrap()
}

pub fn set(v: &[usize]) -> VertexSet {
    v.iter().copied().collect()
}
