//! Exact `Y(k, ell)`-factor search, maximal tilings, certificate checking and
//! a deliberately naive brute-force oracle.
//!
//! The factor search is exact cover with vertices as items and copy vertex
//! sets as options. It branches on the uncovered vertex with the fewest live
//! options (lowest index on ties) and tries options in canonical copy order,
//! so the first factor found is reproducible. The work limit is a node count.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{invalid, Error, Result};
use crate::graph::{KGraph, VertexSet, MAX_VERTICES};
use crate::pattern::{enumerate_copies, YCopy, YPattern};

/// Largest vertex count the brute-force oracle accepts by default.
pub const DEFAULT_ORACLE_CEILING: usize = 14;

/// Vertex-disjoint copies with their cached union.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tiling {
    copies: Vec<YCopy>,
    covered: VertexSet,
}

impl Tiling {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_copies(copies: impl IntoIterator<Item = YCopy>) -> Result<Self> {
        let mut t = Tiling::new();
        for c in copies {
            t.push(c)?;
        }
        Ok(t)
    }

    /// Adds a copy; fails if it meets an already covered vertex.
    pub fn push(&mut self, copy: YCopy) -> Result<()> {
        if !copy.vertices().is_disjoint(self.covered) {
            return invalid(format!("copy {copy} overlaps the tiling"));
        }
        self.covered = self.covered.union(copy.vertices());
        self.copies.push(copy);
        Ok(())
    }

    pub fn extend(&mut self, other: &Tiling) -> Result<()> {
        other.copies.iter().try_for_each(|&c| self.push(c))
    }

    pub fn copies(&self) -> &[YCopy] {
        &self.copies
    }

    pub fn covered(&self) -> VertexSet {
        self.covered
    }

    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Found,
    NoneExhaustive,
    BudgetExceeded,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Found => "found",
            Outcome::NoneExhaustive => "none exhaustive",
            Outcome::BudgetExceeded => "budget exceeded",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub copies: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct FactorResult {
    pub outcome: Outcome,
    pub tiling: Option<Tiling>,
    pub stats: SolveStats,
    /// Set when the answer came from a shortcut rather than search.
    pub note: Option<String>,
}

/// Search limit in nodes; `None` searches to completion.
pub type Budget = Option<u64>;

pub(crate) enum Cover {
    Found(Vec<usize>),
    Exhausted,
    OverBudget,
}

/// Exact cover of `universe` by pairwise disjoint `options` (bit masks).
/// Options that stick out of the universe are ignored. Returns the outcome
/// and the number of search nodes visited.
pub(crate) fn exact_cover(universe: u128, options: &[u128], budget: Budget) -> (Cover, u64) {
    let live: Vec<u32> = (0..options.len() as u32)
        .filter(|&o| options[o as usize] & !universe == 0 && options[o as usize] != 0)
        .collect();
    let mut search = CoverSearch {
        options,
        nodes: 0,
        budget: budget.unwrap_or(u64::MAX),
        chosen: Vec::new(),
    };
    let step = search.descend(universe, &live);
    let nodes = search.nodes;
    let cover = match step {
        Step::Found => Cover::Found(search.chosen),
        Step::Dead => Cover::Exhausted,
        Step::OverBudget => Cover::OverBudget,
    };
    (cover, nodes)
}

#[derive(PartialEq, Eq)]
enum Step {
    Found,
    Dead,
    OverBudget,
}

struct CoverSearch<'a> {
    options: &'a [u128],
    nodes: u64,
    budget: u64,
    chosen: Vec<usize>,
}

impl CoverSearch<'_> {
    fn descend(&mut self, uncovered: u128, live: &[u32]) -> Step {
        if self.nodes >= self.budget {
            return Step::OverBudget;
        }
        self.nodes += 1;
        if uncovered == 0 {
            return Step::Found;
        }
        let mut counts = [0u32; MAX_VERTICES];
        for &o in live {
            for v in VertexSet::from_bits(self.options[o as usize]) {
                counts[v] += 1;
            }
        }
        let pivot = VertexSet::from_bits(uncovered)
            .iter()
            .min_by_key(|&v| counts[v])
            .expect("uncovered is nonempty");
        if counts[pivot] == 0 {
            return Step::Dead;
        }
        let bit = 1u128 << pivot;
        for &o in live {
            let opt = self.options[o as usize];
            if opt & bit == 0 {
                continue;
            }
            let rest: Vec<u32> = live
                .iter()
                .copied()
                .filter(|&p| self.options[p as usize] & opt == 0)
                .collect();
            self.chosen.push(o as usize);
            match self.descend(uncovered & !opt, &rest) {
                Step::Dead => {
                    self.chosen.pop();
                }
                other => return other,
            }
        }
        Step::Dead
    }
}

fn check_pattern(h: &KGraph, pattern: YPattern) -> Result<()> {
    if h.k() != pattern.k() {
        return invalid(format!(
            "pattern is {}-uniform but the graph is {}-uniform",
            pattern.k(),
            h.k()
        ));
    }
    Ok(())
}

/// Decides whether `h` has a `pattern`-factor and returns one if so.
pub fn find_factor(h: &KGraph, pattern: YPattern, budget: Budget) -> Result<FactorResult> {
    check_pattern(h, pattern)?;
    let start = Instant::now();
    if h.n() % pattern.span() != 0 {
        return Ok(FactorResult {
            outcome: Outcome::NoneExhaustive,
            tiling: None,
            stats: SolveStats {
                elapsed: start.elapsed(),
                ..SolveStats::default()
            },
            note: Some(format!("n = {} is not divisible by {}", h.n(), pattern.span())),
        });
    }
    let copies = enumerate_copies(h, pattern)?;
    let masks: Vec<u128> = copies.iter().map(|c| c.vertices().bits()).collect();
    let (cover, nodes) = exact_cover(h.vertices().bits(), &masks, budget);
    let (outcome, tiling) = match cover {
        Cover::Found(chosen) => {
            let tiling = Tiling::from_copies(chosen.into_iter().map(|i| copies[i]))
                .map_err(|e| Error::Internal(format!("solver produced overlapping tiles: {e}")))?;
            (Outcome::Found, Some(tiling))
        }
        Cover::Exhausted => (Outcome::NoneExhaustive, None),
        Cover::OverBudget => (Outcome::BudgetExceeded, None),
    };
    if let Some(t) = &tiling {
        if let Err(defect) = verify_tiling(h, pattern, t.copies(), true) {
            return Err(Error::Internal(format!("solver produced an invalid factor: {defect}")));
        }
    }
    Ok(FactorResult {
        outcome,
        tiling,
        stats: SolveStats {
            nodes,
            copies: copies.len(),
            elapsed: start.elapsed(),
        },
        note: None,
    })
}

/// A maximal tiling: greedy in canonical copy order, then repeated
/// one-for-two swaps (drop a tile, place two copies in the freed region)
/// until none applies or `budget` pair checks are spent. The size is a lower
/// bound on the maximum tiling.
pub fn find_max_tiling(h: &KGraph, pattern: YPattern, budget: Budget) -> Result<Tiling> {
    check_pattern(h, pattern)?;
    let copies = enumerate_copies(h, pattern)?;
    let mut tiles: Vec<usize> = Vec::new();
    let mut covered = 0u128;
    for (i, c) in copies.iter().enumerate() {
        let m = c.vertices().bits();
        if m & covered == 0 {
            covered |= m;
            tiles.push(i);
        }
    }

    let mut work = budget.unwrap_or(u64::MAX);
    'improve: loop {
        for pos in 0..tiles.len() {
            let own = copies[tiles[pos]].vertices().bits();
            let region = !covered | own;
            let inside: Vec<usize> = (0..copies.len())
                .filter(|&i| copies[i].vertices().bits() & !region == 0)
                .collect();
            for (a_pos, &a) in inside.iter().enumerate() {
                let ma = copies[a].vertices().bits();
                for &b in &inside[a_pos + 1..] {
                    if work == 0 {
                        break 'improve;
                    }
                    work -= 1;
                    let mb = copies[b].vertices().bits();
                    if ma & mb == 0 {
                        covered = (covered & !own) | ma | mb;
                        tiles.remove(pos);
                        tiles.extend([a, b]);
                        continue 'improve;
                    }
                }
            }
        }
        break;
    }
    tiles.sort_unstable();
    Tiling::from_copies(tiles.into_iter().map(|i| copies[i]))
}

/// Why a tiling failed verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Defect {
    /// A copy does not have the pattern's shape.
    Malformed,
    /// A copy uses a vertex outside the graph.
    OutOfRange,
    /// A copy's edge is not an edge of the graph.
    MissingEdge,
    /// Two copies share a vertex.
    Overlap,
    /// The copies do not cover every vertex.
    NotSpanning,
}

impl Defect {
    pub fn code(self) -> &'static str {
        match self {
            Defect::Malformed => "malformed-copy",
            Defect::OutOfRange => "out-of-range",
            Defect::MissingEdge => "missing-edge",
            Defect::Overlap => "overlap",
            Defect::NotSpanning => "not-spanning",
        }
    }
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Checks that every copy is an embedded copy of `pattern` in `h`, that the
/// copies are disjoint, and, if `require_factor`, that they cover `V(h)`.
pub fn verify_tiling(h: &KGraph, pattern: YPattern, copies: &[YCopy], require_factor: bool) -> Result<(), Defect> {
    let mut covered = VertexSet::empty();
    for c in copies {
        if !c.matches(pattern) || h.k() != pattern.k() {
            return Err(Defect::Malformed);
        }
        if !c.vertices().is_subset(h.vertices()) {
            return Err(Defect::OutOfRange);
        }
        if !h.contains_edge(c.edge1()) || !h.contains_edge(c.edge2()) {
            return Err(Defect::MissingEdge);
        }
        if !c.vertices().is_disjoint(covered) {
            return Err(Defect::Overlap);
        }
        covered = covered.union(c.vertices());
    }
    if require_factor && covered != h.vertices() {
        return Err(Defect::NotSpanning);
    }
    Ok(())
}

/// Ground-truth factor decision: builds its own copy list from all edge
/// pairs and tries every pairwise-disjoint subset, with no pruning beyond
/// disjointness. Refuses graphs with more than `ceiling` vertices.
pub fn brute_force_factor_with_ceiling(h: &KGraph, pattern: YPattern, ceiling: usize) -> Result<FactorResult> {
    check_pattern(h, pattern)?;
    if h.n() > ceiling {
        return Err(Error::Refused(format!(
            "n = {} is above the oracle ceiling {ceiling}",
            h.n()
        )));
    }
    let start = Instant::now();
    let edges = h.edges();
    let mut copies = Vec::new();
    for a in 0..edges.len() {
        for b in a + 1..edges.len() {
            if edges[a].intersection(edges[b]).len() == pattern.ell() {
                copies.push((edges[a], edges[b]));
            }
        }
    }
    let masks: Vec<u128> = copies.iter().map(|(a, b)| a.union(*b).bits()).collect();
    let full = h.vertices().bits();
    let mut nodes = 0u64;
    let mut chosen = Vec::new();
    let found = h.n() % pattern.span() == 0 && subsets_cover(&masks, 0, 0, full, &mut chosen, &mut nodes);
    let tiling = if found {
        let picked = chosen.iter().map(|&i| {
            let (a, b) = copies[i];
            YCopy::from_edges(a, b).expect("distinct edges of equal size")
        });
        Some(Tiling::from_copies(picked)?)
    } else {
        None
    };
    Ok(FactorResult {
        outcome: if found { Outcome::Found } else { Outcome::NoneExhaustive },
        tiling,
        stats: SolveStats {
            nodes,
            copies: copies.len(),
            elapsed: start.elapsed(),
        },
        note: None,
    })
}

pub fn brute_force_factor(h: &KGraph, pattern: YPattern) -> Result<FactorResult> {
    brute_force_factor_with_ceiling(h, pattern, DEFAULT_ORACLE_CEILING)
}

fn subsets_cover(
    masks: &[u128],
    from: usize,
    covered: u128,
    full: u128,
    chosen: &mut Vec<usize>,
    nodes: &mut u64,
) -> bool {
    *nodes += 1;
    if covered == full {
        return true;
    }
    for i in from..masks.len() {
        if masks[i] & covered == 0 {
            chosen.push(i);
            if subsets_cover(masks, i + 1, covered | masks[i], full, chosen, nodes) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// A tiling written to a file: `FACTOR k ell n` (or `TILING` for a partial
/// tiling), one copy per line, then `END`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub pattern: YPattern,
    pub n: usize,
    pub is_factor: bool,
    pub copies: Vec<YCopy>,
}

impl Certificate {
    pub fn factor(pattern: YPattern, n: usize, tiling: &Tiling) -> Self {
        Certificate {
            pattern,
            n,
            is_factor: true,
            copies: tiling.copies().to_vec(),
        }
    }

    pub fn partial(pattern: YPattern, n: usize, tiling: &Tiling) -> Self {
        Certificate {
            is_factor: false,
            ..Self::factor(pattern, n, tiling)
        }
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| crate::error::parse_err(1, "empty certificate"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || crate::error::parse_err(line_no, "header must be \"FACTOR k ell n\"");
        if fields.len() != 4 || !matches!(fields[0], "FACTOR" | "TILING") {
            return Err(bad_header());
        }
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<usize>().map_err(|_| bad_header()))
            .collect::<Result<Vec<_>>>()?;
        let pattern = YPattern::new(nums[0], nums[1]).map_err(|e| crate::error::parse_err(line_no, e.to_string()))?;
        let mut copies = Vec::new();
        let mut ended = false;
        for (line_no, line) in lines {
            if ended {
                return Err(crate::error::parse_err(line_no, "content after END"));
            }
            if line == "END" {
                ended = true;
                continue;
            }
            let copy: YCopy = line
                .parse()
                .map_err(|e: Error| crate::error::parse_err(line_no, e.to_string()))?;
            copies.push(copy);
        }
        if !ended {
            return Err(crate::error::parse_err(text.lines().count().max(1), "missing END"));
        }
        Ok(Certificate {
            pattern,
            n: nums[2],
            is_factor: fields[0] == "FACTOR",
            copies,
        })
    }

    /// Verifies the certificate against `h`; a factor certificate must span.
    pub fn verify(&self, h: &KGraph) -> Result<(), Defect> {
        if self.n != h.n() {
            return Err(Defect::OutOfRange);
        }
        verify_tiling(h, self.pattern, &self.copies, self.is_factor)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.is_factor { "FACTOR" } else { "TILING" };
        writeln!(f, "{tag} {} {} {}", self.pattern.k(), self.pattern.ell(), self.n)?;
        for c in &self.copies {
            writeln!(f, "{c}")?;
        }
        writeln!(f, "END")
    }
}
