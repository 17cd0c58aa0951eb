//! Instance generators: the extremal no-factor graph, partition models with a
//! planted balanced split, basic graphs, and seeded random graphs with a
//! codegree floor.
//!
//! Every generator is described by a [`GenSpec`], which has a compact string
//! form such as `extremal:k=3,ell=1,n=10,interior=empty` and is echoed in a
//! `# spec:` header when a generated graph is written out.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{binom, Edge, KGraph, VertexSet};
use crate::pattern::YPattern;

/// Name of the pseudo-random generator behind every seeded construction.
pub const RNG_NAME: &str = "chacha8-v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InteriorMode {
    #[default]
    Empty,
    /// Canonical-order greedy maximal `Y(k, ell)`-free family inside `B`.
    GreedyYFree,
}

impl FromStr for InteriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empty" => Ok(InteriorMode::Empty),
            "greedy_y_free" | "greedy" => Ok(InteriorMode::GreedyYFree),
            other => invalid(format!("unknown interior mode {other:?}")),
        }
    }
}

impl fmt::Display for InteriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteriorMode::Empty => "empty",
            InteriorMode::GreedyYFree => "greedy_y_free",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtremalSpec {
    pub k: usize,
    pub ell: usize,
    pub n: usize,
    pub interior: InteriorMode,
}

/// A generated graph with its distinguished parts.
#[derive(Clone, Debug)]
pub struct Extremal {
    pub graph: KGraph,
    pub a: VertexSet,
    pub b: VertexSet,
}

/// Extremal graph: `A` is the first `n/(2k-ell) - 1` vertices, every k-set
/// meeting `A` is an edge, and `B` carries a `Y(k, ell)`-free interior.
/// Every copy of the pattern then needs an `A`-vertex, so there is no factor.
pub fn build_extremal(spec: ExtremalSpec) -> Result<Extremal> {
    let ExtremalSpec { k, ell, n, interior } = spec;
    let pattern = YPattern::new(k, ell)?;
    let span = pattern.span();
    if n < span || n % span != 0 {
        return invalid(format!("n = {n} must be a positive multiple of 2k - ell = {span}"));
    }
    let a = VertexSet::range(0, n / span - 1);
    let b = VertexSet::full(n).difference(a);
    let mut edges: Vec<Edge> = VertexSet::full(n)
        .subsets(k)
        .filter(|e| !e.is_disjoint(a))
        .collect();
    if interior == InteriorMode::GreedyYFree {
        let mut inside: Vec<Edge> = Vec::new();
        for e in b.subsets(k) {
            if inside.iter().all(|f| f.intersection(e).len() != ell) {
                inside.push(e);
            }
        }
        edges.extend(inside);
    }
    Ok(Extremal {
        graph: KGraph::new(n, k, edges)?,
        a,
        b,
    })
}

/// Graph whose edges are all k-sets meeting `X = {0, ..., x_size-1}`.
/// With `x_size = n/(2k-ell)` this is the balanced instance the staged
/// factor builder expects, and its codegree is exactly `x_size`.
pub fn build_partition_model(k: usize, n: usize, x_size: usize) -> Result<Extremal> {
    if x_size > n {
        return invalid(format!("x_size = {x_size} exceeds n = {n}"));
    }
    let x = VertexSet::range(0, x_size);
    let edges = VertexSet::full(n)
        .subsets(k)
        .filter(|e| !e.is_disjoint(x))
        .collect::<Vec<_>>();
    Ok(Extremal {
        graph: KGraph::new(n, k, edges)?,
        a: x,
        b: VertexSet::full(n).difference(x),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasicKind {
    Complete,
    Empty,
    /// Vertex-disjoint edges `{0..k-1}, {k..2k-1}, ...`.
    Matching,
}

pub fn build_basic(kind: BasicKind, k: usize, n: usize) -> Result<KGraph> {
    match kind {
        BasicKind::Complete => KGraph::complete(n, k),
        BasicKind::Empty => KGraph::empty(n, k),
        BasicKind::Matching => {
            if k == 0 || n % k != 0 {
                return invalid(format!("a perfect matching needs k | n (n = {n}, k = {k})"));
            }
            KGraph::new(n, k, (0..n / k).map(|i| VertexSet::range(i * k, (i + 1) * k)))
        }
    }
}

/// Deletes edges of `h` accepted by `eligible`, in a seeded uniformly random
/// order, skipping any deletion that would push some `(k-1)`-set's degree
/// below `floor`, until `max_deletions` edges are gone.
///
/// One pass suffices: codegrees only decrease, so an edge skipped once can
/// never become deletable later.
pub fn thin_edges(
    h: &KGraph,
    eligible: impl Fn(Edge) -> bool,
    floor: u64,
    max_deletions: usize,
    seed: u64,
) -> KGraph {
    let k = h.k();
    let mut codeg: HashMap<VertexSet, u64> = if k >= 2 { h.d_set_degrees(k - 1) } else { HashMap::new() };
    let mut order: Vec<Edge> = h.edges().iter().copied().filter(|&e| eligible(e)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut removed = std::collections::HashSet::new();
    for e in order {
        if removed.len() >= max_deletions {
            break;
        }
        let faces: Vec<VertexSet> = if k >= 2 { e.subsets(k - 1).collect() } else { Vec::new() };
        if faces.iter().all(|s| codeg[s] > floor) {
            for s in &faces {
                *codeg.get_mut(s).expect("face of an edge") -= 1;
            }
            removed.insert(e);
        }
    }
    h.retain_edges(|e| !removed.contains(&e))
}

/// Complete graph thinned at random down to `density * C(n, k)` edges while
/// keeping the codegree at least `floor`. Reproducible from `seed`.
pub fn random_codegree_graph(k: usize, n: usize, floor: u64, density: f64, seed: u64) -> Result<KGraph> {
    if k < 2 {
        return invalid("random codegree graphs need k >= 2");
    }
    if n + 1 < k || floor > (n + 1 - k) as u64 {
        return invalid(format!("floor = {floor} exceeds n - k + 1"));
    }
    if !(0.0..=1.0).contains(&density) {
        return invalid(format!("density = {density} outside [0, 1]"));
    }
    let complete = KGraph::complete(n, k)?;
    let total = binom(n, k) as f64;
    let target = (density * total).round() as usize;
    let deletions = complete.edge_count().saturating_sub(target);
    Ok(thin_edges(&complete, |_| true, floor, deletions, seed))
}

/// A generator description, parsed from `kind:key=value,...` or from a kind
/// plus a key/value map.
#[derive(Clone, Debug, PartialEq)]
pub enum GenSpec {
    Extremal(ExtremalSpec),
    Partition { k: usize, ell: usize, n: usize, x: usize },
    Basic { kind: BasicKind, k: usize, n: usize },
    Random { k: usize, n: usize, floor: u64, density: f64, seed: u64 },
}

/// What a generator produced: the graph and, when the construction has one,
/// its planted split.
#[derive(Clone, Debug)]
pub struct Generated {
    pub graph: KGraph,
    pub split: Option<(VertexSet, VertexSet)>,
}

impl GenSpec {
    pub fn from_parts(kind: &str, opts: &BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str| -> Result<usize> {
            let raw = opts
                .get(key)
                .ok_or_else(|| Error::InvalidArgument(format!("{kind}: missing option {key}")))?;
            raw.parse()
                .map_err(|_| Error::InvalidArgument(format!("{kind}: {key}={raw} is not an integer")))
        };
        let known: &[&str] = match kind {
            "extremal" => &["k", "ell", "n", "interior"],
            "partition" => &["k", "ell", "n", "x"],
            "complete" | "empty" | "matching" => &["k", "n"],
            "random" => &["k", "n", "floor", "density", "seed"],
            other => return invalid(format!("unknown generator {other:?}")),
        };
        if let Some(extra) = opts.keys().find(|key| !known.contains(&key.as_str())) {
            return invalid(format!("{kind}: unknown option {extra}"));
        }
        Ok(match kind {
            "extremal" => GenSpec::Extremal(ExtremalSpec {
                k: get("k")?,
                ell: get("ell")?,
                n: get("n")?,
                interior: opts.get("interior").map_or(Ok(InteriorMode::Empty), |s| s.parse())?,
            }),
            "partition" => {
                let (k, ell, n) = (get("k")?, get("ell")?, get("n")?);
                let span = YPattern::new(k, ell)?.span();
                let x = if opts.contains_key("x") { get("x")? } else { n / span };
                GenSpec::Partition { k, ell, n, x }
            }
            "random" => {
                let density = match opts.get("density") {
                    None => 0.5,
                    Some(raw) => raw
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("density={raw} is not a number")))?,
                };
                GenSpec::Random {
                    k: get("k")?,
                    n: get("n")?,
                    floor: get("floor")? as u64,
                    density,
                    seed: if opts.contains_key("seed") { get("seed")? as u64 } else { 0 },
                }
            }
            basic => GenSpec::Basic {
                kind: match basic {
                    "complete" => BasicKind::Complete,
                    "empty" => BasicKind::Empty,
                    _ => BasicKind::Matching,
                },
                k: get("k")?,
                n: get("n")?,
            },
        })
    }

    /// The same spec with its seed replaced (no-op for deterministic kinds).
    pub fn with_seed(&self, seed: u64) -> Self {
        match self.clone() {
            GenSpec::Random { k, n, floor, density, .. } => GenSpec::Random { k, n, floor, density, seed },
            other => other,
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            GenSpec::Extremal(s) => s.k,
            GenSpec::Partition { k, .. } | GenSpec::Basic { k, .. } | GenSpec::Random { k, .. } => k,
        }
    }

    pub fn build(&self) -> Result<Generated> {
        Ok(match *self {
            GenSpec::Extremal(spec) => {
                let ex = build_extremal(spec)?;
                Generated {
                    graph: ex.graph,
                    split: Some((ex.a, ex.b)),
                }
            }
            GenSpec::Partition { k, ell, n, x } => {
                YPattern::new(k, ell)?;
                let m = build_partition_model(k, n, x)?;
                Generated {
                    graph: m.graph,
                    split: Some((m.a, m.b)),
                }
            }
            GenSpec::Basic { kind, k, n } => Generated {
                graph: build_basic(kind, k, n)?,
                split: None,
            },
            GenSpec::Random { k, n, floor, density, seed } => Generated {
                graph: random_codegree_graph(k, n, floor, density, seed)?,
                split: None,
            },
        })
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenSpec::Extremal(s) => write!(f, "extremal:k={},ell={},n={},interior={}", s.k, s.ell, s.n, s.interior),
            GenSpec::Partition { k, ell, n, x } => write!(f, "partition:k={k},ell={ell},n={n},x={x}"),
            GenSpec::Basic { kind, k, n } => {
                let name = match kind {
                    BasicKind::Complete => "complete",
                    BasicKind::Empty => "empty",
                    BasicKind::Matching => "matching",
                };
                write!(f, "{name}:k={k},n={n}")
            }
            GenSpec::Random { k, n, floor, density, seed } => {
                write!(f, "random:k={k},n={n},floor={floor},density={density},seed={seed},rng={RNG_NAME}")
            }
        }
    }
}

impl FromStr for GenSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut opts = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got {item:?}")))?;
            // the rng tag is informational
            if key == "rng" {
                if value != RNG_NAME {
                    return invalid(format!("unsupported generator {value:?}"));
                }
                continue;
            }
            opts.insert(key.to_string(), value.to_string());
        }
        GenSpec::from_parts(kind.trim(), &opts)
    }
}
