//! Tiling k-uniform hypergraphs with `Y(k, ell)`, the pattern made of two
//! edges that share exactly `ell` vertices.
//!
//! For `k >= 3`, `1 <= ell <= k-2` and large `n` divisible by `2k - ell`,
//! minimum codegree `n/(2k - ell)` forces a `Y(k, ell)`-factor, and the
//! extremal construction in [`construct::build_extremal`] shows the bound is
//! sharp. For reference, the neighbouring cases are `n/2 - k + c` with
//! `c ∈ {2, 3}` for `ell = 0` and `n/(k+1) + c` with `c ∈ {0, 1}` for
//! `ell = k-1`; neither is computed by this crate.
//!
//! Modules:
//! - [`graph`]: hypergraphs, vertex sets, degree and type counts, links.
//! - [`pattern`]: the pattern, its copies, copy enumeration and search.
//! - [`construct`]: extremal and test-instance generators.
//! - [`solver`]: exact factor search, maximal tilings, certificates, oracle.
//! - [`pipeline`]: the staged factor builder for near-extremal graphs.
//! - [`cli`]: the `tile-lab` command-line front end and batch reports.

pub mod cli;
pub mod construct;
pub mod error;
pub mod graph;
pub mod pattern;
pub mod pipeline;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{binom, Edge, KGraph, Link, Vertex, VertexSet};
pub use pattern::{enumerate_copies, find_copy_avoiding, is_y_free, YCopy, YPattern};
pub use solver::{find_factor, verify_tiling, Certificate, FactorResult, Outcome, Tiling};

/// The codegree `n/(2k - ell)` that forces a factor for large `n`.
pub fn codegree_floor(n: usize, pattern: YPattern) -> u64 {
    (n / pattern.span()) as u64
}
