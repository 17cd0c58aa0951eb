//! Staged factor construction for graphs close to the extremal example.
//!
//! Given a sparse witness set `B` of size `(1 - 1/(2k-ell)) n`, vertices are
//! split by their degree into `B` into `A'` (almost full), `B'` (almost none)
//! and the leftover `V0`. Four tilings are then built:
//!
//! 1. `Y1`: `q = |B'| - |B|` copies inside `B'` when `q > 0`.
//! 2. `Y2`: one copy per `w ∈ V0`, from a `Y(k-1, ell-1)` in the link of `w`.
//! 3. `Y3`: `-p` copies each using a pair from `A1` and a `Y(k-1, ell)` in the
//!    pair's common link, restoring `|B2| = (2k-ell-1) |A2|`.
//! 4. `Y4`: a factor of the balanced remainder built from tiles with one
//!    `A2`-vertex each, falling back to unrestricted search.
//!
//! The degree bounds that justify each stage for large `n` are evaluated and
//! recorded in a [`Trace`]; a failed bound is a diagnostic, not an abort. The
//! only possible results are a verified factor or a [`StageFailure`].

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{binom, KGraph, Vertex, VertexSet};
use crate::pattern::{enumerate_copies, find_copy_avoiding, YCopy, YPattern};
use crate::solver::{exact_cover, find_factor, verify_tiling, Budget, Cover, Outcome, Tiling};

/// A sparse set `B` certifying that the graph is `xi`-extremal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremalWitness {
    pub b: VertexSet,
    pub xi: f64,
    pub e_b: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessMode {
    /// Every candidate `B`; exact but only feasible for small `n`.
    Exhaustive,
    /// Steepest-descent swaps from a low-degree seed plus seeded random restarts.
    LocalSearch { restarts: usize, seed: u64 },
}

impl WitnessMode {
    /// Exhaustive up to 20 vertices, local search with 32 restarts above.
    pub fn auto(n: usize) -> Self {
        if n <= 20 {
            WitnessMode::Exhaustive
        } else {
            WitnessMode::LocalSearch { restarts: 32, seed: 0 }
        }
    }
}

impl fmt::Display for WitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WitnessMode::Exhaustive => f.write_str("exhaustive"),
            WitnessMode::LocalSearch { restarts, seed } => write!(f, "local_search(restarts={restarts},seed={seed})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WitnessSearch {
    /// The best set found, if it meets the `xi` bound.
    pub witness: Option<ExtremalWitness>,
    /// Best set seen and its edge count, qualifying or not.
    pub best: Option<(VertexSet, u64)>,
    /// Whether absence of a witness is conclusive.
    pub exhaustive: bool,
    pub candidates: u64,
}

fn edges_avoiding(h: &KGraph, a: VertexSet) -> u64 {
    h.edges().iter().filter(|e| e.is_disjoint(a)).count() as u64
}

/// Searches for `B` with `|B| = n - n/(2k-ell)` and `e(B) <= xi C(|B|, k)`.
pub fn find_extremal_witness(h: &KGraph, pattern: YPattern, xi: f64, mode: WitnessMode) -> Result<WitnessSearch> {
    let span = pattern.span();
    let n = h.n();
    if n % span != 0 {
        return invalid(format!("n = {n} is not divisible by 2k - ell = {span}"));
    }
    if h.k() != pattern.k() {
        return invalid("pattern and graph uniformity differ");
    }
    let a_size = n / span;
    let b_size = n - a_size;
    let all = h.vertices();
    let mut best: Option<(VertexSet, u64)> = None;
    let mut candidates = 0u64;
    let consider = |b: VertexSet, e_b: u64, best: &mut Option<(VertexSet, u64)>| {
        if best.is_none_or(|(_, e)| e_b < e) {
            *best = Some((b, e_b));
        }
    };

    let exhaustive = matches!(mode, WitnessMode::Exhaustive);
    match mode {
        WitnessMode::Exhaustive => {
            for a in all.subsets(a_size) {
                candidates += 1;
                let e_b = edges_avoiding(h, a);
                consider(all.difference(a), e_b, &mut best);
                if e_b == 0 {
                    break;
                }
            }
        }
        WitnessMode::LocalSearch { restarts, seed } => {
            let mut by_degree: Vec<Vertex> = all.to_vec();
            by_degree.sort_by_key(|&v| (h.incident(v).len(), v));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for round in 0..restarts.max(1) {
                let start: VertexSet = if round == 0 {
                    by_degree[..b_size].iter().copied().collect()
                } else {
                    let mut vs = all.to_vec();
                    vs.shuffle(&mut rng);
                    vs[..b_size].iter().copied().collect()
                };
                let (b, e_b, evaluated) = descend(h, all, start);
                candidates += evaluated;
                consider(b, e_b, &mut best);
            }
        }
    }

    let bound = xi * binom(b_size, h.k()) as f64;
    let witness = best
        .filter(|&(_, e_b)| e_b as f64 <= bound)
        .map(|(b, e_b)| ExtremalWitness { b, xi, e_b });
    Ok(WitnessSearch {
        witness,
        best,
        exhaustive,
        candidates,
    })
}

/// Steepest descent on `e(B)` over single swaps `b <-> a`.
fn descend(h: &KGraph, all: VertexSet, mut b: VertexSet) -> (VertexSet, u64, u64) {
    let mut current = h.edges_inside(b);
    let mut evaluated = 1;
    loop {
        let mut best_move: Option<(VertexSet, u64)> = None;
        for out in b.iter() {
            for into in all.difference(b).iter() {
                let mut cand = b;
                cand.remove(out);
                cand.insert(into);
                let e = h.edges_inside(cand);
                evaluated += 1;
                if e < best_move.map_or(current, |(_, m)| m) {
                    best_move = Some((cand, e));
                }
            }
        }
        match best_move {
            Some((cand, e)) => {
                b = cand;
                current = e;
            }
            None => return (b, current, evaluated),
        }
    }
}

/// The `(A', B', V0)` split by degree into the witness set.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub a_prime: VertexSet,
    pub b_prime: VertexSet,
    pub v0: VertexSet,
    /// `xi^(1/3)`
    pub eps1: f64,
    /// `2 eps1^2`
    pub eps2: f64,
}

impl Classification {
    /// A classification with explicit parts, for planted instances.
    pub fn from_parts(a_prime: VertexSet, b_prime: VertexSet, v0: VertexSet, xi: f64) -> Result<Self> {
        if !a_prime.is_disjoint(b_prime) || !a_prime.is_disjoint(v0) || !b_prime.is_disjoint(v0) {
            return invalid("A', B' and V0 must be disjoint");
        }
        let eps1 = xi.cbrt();
        Ok(Classification {
            a_prime,
            b_prime,
            v0,
            eps1,
            eps2: 2.0 * eps1 * eps1,
        })
    }
}

/// `v ∈ A'` when `deg(v, B) >= (1 - eps1) C(|B|, k-1)`, `v ∈ B'` when
/// `deg(v, B) <= eps1 C(|B|, k-1)`, everything else in `V0`. If both
/// thresholds hold (only possible for `eps1 >= 1/2`), `A'` wins.
pub fn classify(h: &KGraph, witness: &ExtremalWitness) -> Result<Classification> {
    let eps1 = witness.xi.cbrt();
    let full = binom(witness.b.len(), h.k() - 1) as f64;
    let mut a_prime = VertexSet::empty();
    let mut b_prime = VertexSet::empty();
    let mut v0 = VertexSet::empty();
    for v in h.vertices() {
        let deg = h.deg_in(VertexSet::singleton(v), witness.b)?.deg as f64;
        if deg >= (1.0 - eps1) * full {
            a_prime.insert(v);
        } else if deg <= eps1 * full {
            b_prime.insert(v);
        } else {
            v0.insert(v);
        }
    }
    Classification::from_parts(a_prime, b_prime, v0, witness.xi)
}

/// One evaluated inequality `lhs <= rhs` (or `<` when strict).
#[derive(Clone, Debug, PartialEq)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub pass: bool,
}

impl Inequality {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Inequality {
            name: name.into(),
            lhs,
            rhs,
            strict: false,
            pass: lhs <= rhs,
        }
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Inequality {
            name: name.into(),
            lhs,
            rhs,
            strict: true,
            pass: lhs < rhs,
        }
    }
}

fn number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.6}")
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} {} {} : {}",
            self.name,
            number(self.lhs),
            if self.strict { "<" } else { "<=" },
            number(self.rhs),
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// The five size bounds on how far the degree split is from `(V \ B, B)`.
pub fn check_claim1(h: &KGraph, witness: &ExtremalWitness, class: &Classification) -> Vec<Inequality> {
    let b = witness.b;
    let a = h.vertices().difference(b);
    let bound = class.eps2 * b.len() as f64;
    let size = |s: VertexSet| s.len() as f64;
    vec![
        Inequality::le("|A\\A'|", size(a.difference(class.a_prime)), bound),
        Inequality::le("|B\\B'|", size(b.difference(class.b_prime)), bound),
        Inequality::le("|A'\\A|", size(class.a_prime.difference(a)), bound),
        Inequality::le("|B'\\B|", size(class.b_prime.difference(b)), bound),
        Inequality::le("|V0|", size(class.v0), 2.0 * bound),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Section {
    Witness,
    Classify,
    Claim1,
    Stage1,
    Stage2,
    Stage3,
    Stage4,
    Result,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Witness => "WITNESS",
            Section::Classify => "CLASSIFY",
            Section::Claim1 => "CLAIM1",
            Section::Stage1 => "STAGE1",
            Section::Stage2 => "STAGE2",
            Section::Stage3 => "STAGE3",
            Section::Stage4 => "STAGE4",
            Section::Result => "RESULT",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceLine {
    Check(Inequality),
    Note(String),
}

/// Ordered record of everything the pipeline computed and checked.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    lines: Vec<(Section, TraceLine)>,
}

impl Trace {
    pub fn check(&mut self, section: Section, ineq: Inequality) {
        self.lines.push((section, TraceLine::Check(ineq)));
    }

    pub fn note(&mut self, section: Section, text: impl Into<String>) {
        self.lines.push((section, TraceLine::Note(text.into())));
    }

    pub fn lines(&self) -> &[(Section, TraceLine)] {
        &self.lines
    }

    pub fn checks(&self) -> impl Iterator<Item = (Section, &Inequality)> {
        self.lines.iter().filter_map(|(s, l)| match l {
            TraceLine::Check(i) => Some((*s, i)),
            TraceLine::Note(_) => None,
        })
    }

    /// The check called `name`, if recorded.
    pub fn find(&self, name: &str) -> Option<&Inequality> {
        self.checks().map(|(_, i)| i).find(|i| i.name == name)
    }

    /// Text grouped by section in pipeline order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut sections: Vec<Section> = self.lines.iter().map(|(s, _)| *s).collect();
        sections.sort();
        sections.dedup();
        for section in sections {
            out.push_str(&format!("{section}\n"));
            for (_, line) in self.lines.iter().filter(|(s, _)| *s == section) {
                match line {
                    TraceLine::Check(i) => out.push_str(&format!("{i}\n")),
                    TraceLine::Note(t) => out.push_str(&format!("{t}\n")),
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Witness,
    Y1,
    Y2,
    Y3,
    Y4,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Witness => "WITNESS",
            Stage::Y1 => "STAGE1",
            Stage::Y2 => "STAGE2",
            Stage::Y3 => "STAGE3",
            Stage::Y4 => "STAGE4",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailReason {
    NoWitness,
    NoCopy,
    InsufficientPairs,
    NoFactor,
    BudgetExceeded,
}

impl FailReason {
    pub fn code(self) -> &'static str {
        match self {
            FailReason::NoWitness => "no-witness",
            FailReason::NoCopy => "no-copy",
            FailReason::InsufficientPairs => "insufficient-pairs",
            FailReason::NoFactor => "no-factor",
            FailReason::BudgetExceeded => "budget-exceeded",
        }
    }
}

/// A stage that could not complete, with what had been built so far.
#[derive(Clone, Debug, PartialEq)]
pub struct StageFailure {
    pub stage: Stage,
    pub reason: FailReason,
    pub covered: VertexSet,
    pub copies_found: usize,
    pub detail: String,
}

impl fmt::Display for StageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.stage, self.reason.code())
    }
}

/// Outcome of a single stage: `Err` is a structured failure, not a bug.
pub type StageResult = std::result::Result<(), StageFailure>;

/// Running state of the staged construction.
#[derive(Clone, Debug)]
pub struct PipelineState<'g> {
    pub graph: &'g KGraph,
    pub pattern: YPattern,
    pub witness: ExtremalWitness,
    pub class: Classification,
    /// `|B'| - |B|`
    pub q: i64,
    /// `|V1|/(2k-ell) - |A1|`, set by stage 3.
    pub p: Option<i64>,
    pub y1: Tiling,
    pub y2: Tiling,
    pub y3: Tiling,
    pub y4: Tiling,
    pub a1: VertexSet,
    pub b1: VertexSet,
    pub a2: VertexSet,
    pub b2: VertexSet,
    pub trace: Trace,
}

impl<'g> PipelineState<'g> {
    pub fn new(graph: &'g KGraph, pattern: YPattern, witness: ExtremalWitness, class: Classification) -> Result<Self> {
        if graph.k() != pattern.k() {
            return invalid("pattern and graph uniformity differ");
        }
        let all = class.a_prime.union(class.b_prime).union(class.v0);
        if all != graph.vertices() || all.len() != class.a_prime.len() + class.b_prime.len() + class.v0.len() {
            return invalid("classification must partition the vertex set");
        }
        let n = graph.n() as i64;
        let span = pattern.span() as i64;
        let q = class.b_prime.len() as i64 - witness.b.len() as i64;
        let alt = n / span - class.a_prime.len() as i64 - class.v0.len() as i64;
        if witness.b.len() as i64 == n - n / span && q != alt {
            return Err(Error::Internal(format!("q = {q} but n/(2k-ell) - |A'| - |V0| = {alt}")));
        }
        Ok(PipelineState {
            graph,
            pattern,
            witness,
            class,
            q,
            p: None,
            y1: Tiling::new(),
            y2: Tiling::new(),
            y3: Tiling::new(),
            y4: Tiling::new(),
            a1: VertexSet::empty(),
            b1: VertexSet::empty(),
            a2: VertexSet::empty(),
            b2: VertexSet::empty(),
            trace: Trace::default(),
        })
    }

    /// Union of all vertices covered by the stage tilings so far.
    pub fn covered(&self) -> VertexSet {
        [&self.y1, &self.y2, &self.y3, &self.y4]
            .iter()
            .fold(VertexSet::empty(), |acc, t| acc.union(t.covered()))
    }

    fn copies_so_far(&self) -> usize {
        self.y1.len() + self.y2.len() + self.y3.len() + self.y4.len()
    }

    fn fail(&self, stage: Stage, reason: FailReason, detail: impl Into<String>) -> StageFailure {
        StageFailure {
            stage,
            reason,
            covered: self.covered(),
            copies_found: self.copies_so_far(),
            detail: detail.into(),
        }
    }

    fn k(&self) -> usize {
        self.pattern.k()
    }

    fn span(&self) -> usize {
        self.pattern.span()
    }

    /// Degree bounds on `A'`, `B'` and `V0` relative to `B'` that the later
    /// stages rely on, each recorded at its worst vertex or set.
    pub fn record_degree_bounds(&mut self) -> Result<()> {
        let h = self.graph;
        let k = self.k();
        let Classification {
            a_prime,
            b_prime,
            v0,
            eps1,
            eps2,
        } = self.class;
        let b_len = self.witness.b.len() as f64;
        let full = binom(b_prime.len(), k - 1) as f64;

        if let Some((v, deg)) = worst(v0, |v| Ok(-(h.deg_in(VertexSet::singleton(v), b_prime)?.deg as f64)))? {
            self.trace.check(
                Section::Classify,
                Inequality::le(format!("V0 deg(v,B')>=eps1/2*C(|B'|,k-1) [v={v}]"), eps1 / 2.0 * full, -deg),
            );
        }
        if let Some((v, co)) = worst(a_prime, |v| Ok(h.deg_in(VertexSet::singleton(v), b_prime)?.co_deg as f64))? {
            self.trace.check(
                Section::Classify,
                Inequality::le(format!("A' degbar(v,B') [v={v}]"), co, 2.0 * eps1 * full),
            );
        }
        if let Some((v, deg)) = worst(b_prime, |v| Ok(h.deg_in(VertexSet::singleton(v), b_prime)?.deg as f64))? {
            self.trace.check(
                Section::Classify,
                Inequality::le(format!("B' deg(v,B') [v={v}]"), deg, 2.0 * eps1 * full),
            );
        }
        // (k-1)-sets inside B': degbar(S, A') <= deg(S, B') + 3 eps2 |B|
        let mut worst_set: Option<(VertexSet, f64, f64)> = None;
        for s in b_prime.subsets(k - 1) {
            let lhs = h.deg_in(s, a_prime)?.co_deg as f64;
            let rhs = h.deg_in(s, b_prime)?.deg as f64 + 3.0 * eps2 * b_len;
            if worst_set.is_none_or(|(_, l, r)| lhs - rhs > l - r) {
                worst_set = Some((s, lhs, rhs));
            }
        }
        if let Some((s, lhs, rhs)) = worst_set {
            self.trace.check(
                Section::Classify,
                Inequality::le(format!("degbar(S,A') vs deg(S,B')+3eps2|B| [S={{{s}}}]"), lhs, rhs),
            );
        }
        let cross = |v: Vertex| -> Result<f64> {
            Ok(h.type_degree(VertexSet::singleton(v), a_prime, b_prime, 1)?.co_deg as f64)
        };
        if let Some((v, co)) = worst(b_prime, cross)? {
            self.trace.check(
                Section::Classify,
                Inequality::le(format!("B' degbar(v,A'B'^(k-1)) [v={v}]"), co, 2.0 * k as f64 * eps1 * full),
            );
        }
        Ok(())
    }

    /// Stage 1: `q` disjoint copies inside `H[B']` when `q > 0`.
    pub fn stage_y1(&mut self) -> Result<StageResult> {
        let eps2_b = self.class.eps2 * self.witness.b.len() as f64;
        self.trace.note(Section::Stage1, format!("q = {}", self.q));
        self.trace.check(Section::Stage1, Inequality::le("-eps2|B| <= q", -eps2_b, self.q as f64));
        self.trace.check(Section::Stage1, Inequality::le("q <= eps2|B|", self.q as f64, eps2_b));
        if self.q <= 0 {
            self.trace.note(Section::Stage1, "Y1 = {}");
            return Ok(Ok(()));
        }
        let inside = self.graph.induced(self.class.b_prime);
        if self.k() >= 2 {
            self.trace.check(
                Section::Stage1,
                Inequality::le("q <= codeg(H[B'])", self.q as f64, inside.graph.codegree() as f64),
            );
        }
        for i in 0..self.q {
            let forbidden = inside.lower(self.y1.covered());
            match find_copy_avoiding(&inside.graph, self.pattern, forbidden)? {
                Some(c) => push_copy(&mut self.y1, c.lift(&inside))?,
                None => {
                    return Ok(Err(self.fail(
                        Stage::Y1,
                        FailReason::NoCopy,
                        format!("found {i} of {} copies inside B'", self.q),
                    )))
                }
            }
        }
        self.trace.note(Section::Stage1, format!("|Y1| = {}", self.y1.len()));
        Ok(Ok(()))
    }

    /// Stage 2: for each `w ∈ V0`, a `Y(k-1, ell-1)` in the link of `w`
    /// inside the unused part of `B'`, lifted by adding `w` to the shared set.
    pub fn stage_y2(&mut self) -> Result<StageResult> {
        let k = self.k();
        let ell = self.pattern.ell();
        if self.class.v0.is_empty() {
            self.trace.note(Section::Stage2, "Y2 = {}");
            return Ok(Ok(()));
        }
        if ell == 0 {
            return invalid("stage 2 needs ell >= 1");
        }
        let link_pattern = YPattern::new(k - 1, ell - 1)?;
        let span = self.span() as f64;
        let eps2_b = self.class.eps2 * self.witness.b.len() as f64;
        let avoid = (self.y1.covered().len() + (self.span() - 1) * self.class.v0.len()) as f64;
        self.trace.check(
            Section::Stage2,
            Inequality::le("|V(Y1)|+(2k-ell-1)|V0| <= 3(2k-ell)eps2|B|", avoid, 3.0 * span * eps2_b),
        );
        let bp = self.class.b_prime;
        for w in self.class.v0 {
            let link_size = self.graph.deg_in(VertexSet::singleton(w), bp)?.deg as f64;
            self.trace.check(
                Section::Stage2,
                Inequality::le(
                    format!("|N(w,B')|-3(2k-ell)eps2|B|C(|B'|,k-2) >= eps1/3*C(|B'|,k-1) [w={w}]"),
                    self.class.eps1 / 3.0 * binom(bp.len(), k - 1) as f64,
                    link_size - 3.0 * span * eps2_b * binom(bp.len(), k - 2) as f64,
                ),
            );
            let free = bp.difference(self.covered());
            let link = self.graph.link_graph(VertexSet::singleton(w), free)?;
            let Some(c) = find_copy_avoiding(&link.graph, link_pattern, VertexSet::empty())? else {
                return Ok(Err(self.fail(
                    Stage::Y2,
                    FailReason::NoCopy,
                    format!("no {link_pattern} in the link of {w}"),
                )));
            };
            let lifted = c.lift(&link).with_shared(VertexSet::singleton(w))?;
            if lifted.shared().len() != ell || !lifted.shared().contains(w) {
                return Err(Error::Internal(format!("stage 2 lifted a malformed copy {lifted}")));
            }
            push_copy(&mut self.y2, lifted)?;
        }
        self.trace.note(Section::Stage2, format!("|Y2| = {}", self.y2.len()));
        Ok(Ok(()))
    }

    /// Stage 3: rebalance with `-p` copies, each using two `A1`-vertices and
    /// a `Y(k-1, ell)` in their common link inside `B1`.
    pub fn stage_y3(&mut self) -> Result<StageResult> {
        let k = self.k();
        let ell = self.pattern.ell();
        let span = self.span();
        self.a1 = self.class.a_prime;
        self.b1 = self.class.b_prime.difference(self.y1.covered().union(self.y2.covered()));
        let v1 = self.a1.union(self.b1);
        if v1.len() % span != 0 {
            return Err(Error::Internal(format!("|V1| = {} is not divisible by {span}", v1.len())));
        }
        let p = (v1.len() / span) as i64 - self.a1.len() as i64;
        self.p = Some(p);
        self.trace.note(
            Section::Stage3,
            format!("|A1| = {}, |B1| = {}, |V1| = {}, p = {p}", self.a1.len(), self.b1.len(), v1.len()),
        );
        if p != self.q - self.y1.len() as i64 {
            return Err(Error::Internal(format!("p = {p} but q - |Y1| = {}", self.q - self.y1.len() as i64)));
        }
        if p > 0 {
            return Err(Error::Internal(format!("p = {p} > 0 after stage 1")));
        }
        if p < 0 {
            let eps1 = self.class.eps1;
            let eps2_b = self.class.eps2 * self.witness.b.len() as f64;
            let bp_len = self.class.b_prime.len() as f64;
            self.trace.check(
                Section::Stage3,
                Inequality::lt("(1-eps1)|B'| < |B1|", (1.0 - eps1) * bp_len, self.b1.len() as f64),
            );
            let full_b1 = binom(self.b1.len(), k - 1) as f64;
            let (h, b1) = (self.graph, self.b1);
            if let Some((v, co)) = worst(self.a1, |v| Ok(h.deg_in(VertexSet::singleton(v), b1)?.co_deg as f64))? {
                self.trace.check(
                    Section::Stage3,
                    Inequality::lt(format!("A1 degbar(v,B1) < 3eps1*C(|B1|,k-1) [v={v}]"), co, 3.0 * eps1 * full_b1),
                );
            }
            self.trace.check(
                Section::Stage3,
                Inequality::le(
                    "(2k-ell-2)(-p) <= 2k*eps2|B|",
                    ((span - 2) as i64 * -p) as f64,
                    2.0 * k as f64 * eps2_b,
                ),
            );

            let need = (-p) as usize;
            let a_list = self.a1.to_vec();
            if 2 * need > a_list.len() {
                return Ok(Err(self.fail(
                    Stage::Y3,
                    FailReason::InsufficientPairs,
                    format!("need {need} pairs from |A1| = {}", a_list.len()),
                )));
            }
            let link_pattern = YPattern::new(k - 1, ell)?;
            for pair in a_list.chunks_exact(2).take(need) {
                let (u, v) = (pair[0], pair[1]);
                let free = self.b1.difference(self.y3.covered());
                let lu = self.graph.link_graph(VertexSet::singleton(u), free)?;
                let lv = self.graph.link_graph(VertexSet::singleton(v), free)?;
                let common = lu.graph.retain_edges(|e| lv.graph.contains_edge(e));
                self.trace.check(
                    Section::Stage3,
                    Inequality::le(
                        format!("|N(u,B1)∩N(v,B1)|-2k*eps2|B|C(|B1|,k-2) >= C(|B1|,k-1)/2 [u={u},v={v}]"),
                        full_b1 / 2.0,
                        common.edge_count() as f64 - 2.0 * k as f64 * eps2_b * binom(self.b1.len(), k - 2) as f64,
                    ),
                );
                let Some(c) = find_copy_avoiding(&common, link_pattern, VertexSet::empty())? else {
                    return Ok(Err(self.fail(
                        Stage::Y3,
                        FailReason::NoCopy,
                        format!("no {link_pattern} in the common link of {u} and {v}"),
                    )));
                };
                let f1 = lu.lift(c.edge1());
                let f2 = lu.lift(c.edge2());
                let lifted = YCopy::from_edges(f1.union(VertexSet::singleton(u)), f2.union(VertexSet::singleton(v)))?;
                if !lifted.matches(self.pattern) {
                    return Err(Error::Internal(format!("stage 3 lifted a malformed copy {lifted}")));
                }
                push_copy(&mut self.y3, lifted)?;
            }
        }
        self.a2 = self.a1.difference(self.y3.covered());
        self.b2 = self.b1.difference(self.y3.covered());
        let expected = (span - 1) * self.a2.len();
        self.trace.note(
            Section::Stage3,
            format!(
                "|Y3| = {}, |A2| = {}, |B2| = {} = (2k-ell-1)|A2| = {expected}",
                self.y3.len(),
                self.a2.len(),
                self.b2.len()
            ),
        );
        if self.b2.len() != expected {
            return Err(Error::Internal(format!(
                "balance identity broken: |B2| = {} but (2k-ell-1)|A2| = {expected}",
                self.b2.len()
            )));
        }
        Ok(Ok(()))
    }

    /// Stage 4: factor of `H[A2 ∪ B2]`, after recording the partition
    /// conditions with `rho = 3k eps1`.
    pub fn stage_y4(&mut self, budget: Budget) -> Result<StageResult> {
        let k = self.k();
        let eps1 = self.class.eps1;
        let rho = 3.0 * k as f64 * eps1;
        let (h, a2, b2) = (self.graph, self.a2, self.b2);
        let full_b2 = binom(b2.len(), k - 1) as f64;
        self.trace.check(
            Section::Stage4,
            Inequality::lt(
                "(1-eps1)|B'| < |B2|",
                (1.0 - eps1) * self.class.b_prime.len() as f64,
                b2.len() as f64,
            ),
        );
        if let Some((v, co)) = worst(a2, |v| Ok(h.deg_in(VertexSet::singleton(v), b2)?.co_deg as f64))? {
            self.trace.check(
                Section::Stage4,
                Inequality::lt(format!("A2 degbar(v,B2) < 3k*eps1*C(|B2|,k-1) [v={v}]"), co, rho * full_b2),
            );
        }
        let cross = |v: Vertex| Ok(h.type_degree(VertexSet::singleton(v), a2, b2, 1)?.co_deg as f64);
        if let Some((v, co)) = worst(b2, cross)? {
            self.trace.check(
                Section::Stage4,
                Inequality::le(format!("B2 degbar(v,A2B2^(k-1)) <= 3k*eps1*C(|B2|,k-1) [v={v}]"), co, rho * full_b2),
            );
        }
        let report = check_partition_conditions(h, a2, b2, self.pattern, rho)?;
        for ineq in report.inequalities() {
            self.trace.check(Section::Stage4, ineq);
        }
        let result = partition_factor(h, a2, b2, self.pattern, budget)?;
        self.trace.note(
            Section::Stage4,
            format!(
                "partition search: {} ({} nodes{})",
                result.outcome,
                result.nodes,
                if result.used_fallback { ", unrestricted fallback" } else { "" }
            ),
        );
        match (result.outcome, result.tiling) {
            (Outcome::Found, Some(t)) => {
                self.y4 = t;
                self.trace.note(Section::Stage4, format!("|Y4| = {}", self.y4.len()));
                Ok(Ok(()))
            }
            (Outcome::BudgetExceeded, _) => Ok(Err(self.fail(
                Stage::Y4,
                FailReason::BudgetExceeded,
                "node budget exhausted",
            ))),
            _ => Ok(Err(self.fail(
                Stage::Y4,
                FailReason::NoFactor,
                "H[A2 ∪ B2] has no factor",
            ))),
        }
    }

    /// `Y1 ∪ Y2 ∪ Y3 ∪ Y4` as a single tiling.
    pub fn union(&self) -> Result<Tiling> {
        let mut all = Tiling::new();
        for t in [&self.y1, &self.y2, &self.y3, &self.y4] {
            all.extend(t)
                .map_err(|e| Error::Internal(format!("stage tilings overlap: {e}")))?;
        }
        Ok(all)
    }
}

fn push_copy(tiling: &mut Tiling, copy: YCopy) -> Result<()> {
    tiling
        .push(copy)
        .map_err(|e| Error::Internal(format!("stage produced overlapping copies: {e}")))
}

/// Member of `set` maximizing `value`, lowest index on ties.
fn worst(set: VertexSet, mut value: impl FnMut(Vertex) -> Result<f64>) -> Result<Option<(Vertex, f64)>> {
    let mut best: Option<(Vertex, f64)> = None;
    for v in set {
        let x = value(v)?;
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((v, x));
        }
    }
    Ok(best)
}

/// Result of checking the balanced-partition conditions on `(X, Y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionReport {
    pub x_len: usize,
    pub y_len: usize,
    /// `|Y| = (2k-ell-1)|X|`
    pub size_ok: bool,
    /// `rho * C(|Y|, k-1)`
    pub bound: f64,
    /// Worst `degbar(v, Y)` over `v ∈ X`.
    pub worst_a: Option<(Vertex, u64)>,
    /// Worst `degbar(u, X Y^(k-1))` over `u ∈ Y`.
    pub worst_b: Option<(Vertex, u64)>,
    pub failing_a: Vec<Vertex>,
    pub failing_b: Vec<Vertex>,
}

impl PartitionReport {
    pub fn passes(&self) -> bool {
        self.size_ok && self.failing_a.is_empty() && self.failing_b.is_empty()
    }

    pub fn inequalities(&self) -> Vec<Inequality> {
        let span_minus_one = if self.x_len == 0 { 0.0 } else { self.y_len as f64 / self.x_len as f64 };
        let mut out = vec![Inequality {
            name: format!("partition size |Y| = (2k-ell-1)|X| [|X|={}, ratio={}]", self.x_len, number(span_minus_one)),
            lhs: self.y_len as f64,
            rhs: self.y_len as f64,
            strict: false,
            pass: self.size_ok,
        }];
        if let Some((v, val)) = self.worst_a {
            out.push(Inequality::le(format!("(a) degbar(v,Y) <= rho*C(|Y|,k-1) [v={v}]"), val as f64, self.bound));
        }
        if let Some((u, val)) = self.worst_b {
            out.push(Inequality::le(format!("(b) degbar(u,XY^(k-1)) <= rho*C(|Y|,k-1) [u={u}]"), val as f64, self.bound));
        }
        out
    }
}

/// Checks `|Y| = (2k-ell-1)|X|`, `(a)` `degbar(v, Y) <= rho C(|Y|, k-1)` for
/// `v ∈ X`, and `(b)` `degbar(u, X Y^(k-1)) <= rho C(|Y|, k-1)` for `u ∈ Y`.
pub fn check_partition_conditions(
    h: &KGraph,
    x: VertexSet,
    y: VertexSet,
    pattern: YPattern,
    rho: f64,
) -> Result<PartitionReport> {
    if !x.is_disjoint(y) {
        return invalid("X and Y overlap");
    }
    let k = h.k();
    let bound = rho * binom(y.len(), k - 1) as f64;
    let mut report = PartitionReport {
        x_len: x.len(),
        y_len: y.len(),
        size_ok: y.len() == (pattern.span() - 1) * x.len(),
        bound,
        worst_a: None,
        worst_b: None,
        failing_a: Vec::new(),
        failing_b: Vec::new(),
    };
    for v in x {
        let co = h.deg_in(VertexSet::singleton(v), y)?.co_deg;
        if report.worst_a.is_none_or(|(_, w)| co > w) {
            report.worst_a = Some((v, co));
        }
        if co as f64 > bound {
            report.failing_a.push(v);
        }
    }
    for u in y {
        let co = h.type_degree(VertexSet::singleton(u), x, y, 1)?.co_deg;
        if report.worst_b.is_none_or(|(_, w)| co > w) {
            report.worst_b = Some((u, co));
        }
        if co as f64 > bound {
            report.failing_b.push(u);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct PartitionFactor {
    pub outcome: Outcome,
    pub tiling: Option<Tiling>,
    pub used_fallback: bool,
    pub nodes: u64,
    /// Number of X-centered tiles available to the restricted search.
    pub centered_tiles: usize,
}

/// X-centered tiles: edges `{x} ∪ S1` and `{x} ∪ S2` with `x ∈ X`,
/// `S1, S2 ⊆ Y` sharing `ell - 1` vertices.
pub fn centered_tiles(h: &KGraph, x: VertexSet, y: VertexSet, pattern: YPattern) -> Result<Vec<YCopy>> {
    if pattern.ell() == 0 {
        return invalid("X-centered tiles need ell >= 1");
    }
    let link_pattern = YPattern::new(pattern.k() - 1, pattern.ell() - 1)?;
    let mut tiles = Vec::new();
    for v in x {
        let link = h.link_graph(VertexSet::singleton(v), y)?;
        for c in enumerate_copies(&link.graph, link_pattern)? {
            tiles.push(c.lift(&link).with_shared(VertexSet::singleton(v))?);
        }
    }
    tiles.sort();
    Ok(tiles)
}

/// Factor of `H[X ∪ Y]` for a balanced split `|Y| = (2k-ell-1)|X|`: exact
/// cover over X-centered tiles, then unrestricted search on `H[X ∪ Y]` if
/// the restricted tiles admit no factor.
pub fn partition_factor(
    h: &KGraph,
    x: VertexSet,
    y: VertexSet,
    pattern: YPattern,
    budget: Budget,
) -> Result<PartitionFactor> {
    if !x.is_disjoint(y) {
        return invalid("X and Y overlap");
    }
    if pattern.ell() == 0 {
        return invalid("partition factor needs ell >= 1");
    }
    if y.len() != (pattern.span() - 1) * x.len() {
        return invalid(format!(
            "|Y| = {} must equal (2k-ell-1)|X| = {}",
            y.len(),
            (pattern.span() - 1) * x.len()
        ));
    }
    let tiles = centered_tiles(h, x, y, pattern)?;
    let masks: Vec<u128> = tiles.iter().map(|t| t.vertices().bits()).collect();
    let universe = x.union(y);
    let (cover, nodes) = exact_cover(universe.bits(), &masks, budget);
    match cover {
        Cover::Found(chosen) => {
            let tiling = Tiling::from_copies(chosen.into_iter().map(|i| tiles[i]))?;
            Ok(PartitionFactor {
                outcome: Outcome::Found,
                tiling: Some(tiling),
                used_fallback: false,
                nodes,
                centered_tiles: tiles.len(),
            })
        }
        Cover::OverBudget => Ok(PartitionFactor {
            outcome: Outcome::BudgetExceeded,
            tiling: None,
            used_fallback: false,
            nodes,
            centered_tiles: tiles.len(),
        }),
        Cover::Exhausted => {
            let inner = h.induced(universe);
            let remaining = budget.map(|b| b.saturating_sub(nodes));
            let result = find_factor(&inner.graph, pattern, remaining)?;
            let tiling = result
                .tiling
                .map(|t| Tiling::from_copies(t.copies().iter().map(|c| c.lift(&inner))))
                .transpose()?;
            Ok(PartitionFactor {
                outcome: result.outcome,
                tiling,
                used_fallback: true,
                nodes: nodes + result.stats.nodes,
                centered_tiles: tiles.len(),
            })
        }
    }
}

#[derive(Clone, Debug)]
pub enum PipelineOutcome {
    Factor(Tiling),
    Failed(StageFailure),
}

/// Everything a pipeline run produced.
#[derive(Clone, Debug)]
pub struct PipelineReport<'g> {
    pub outcome: PipelineOutcome,
    /// Present once a witness was found.
    pub state: Option<PipelineState<'g>>,
    pub witness_search: WitnessSearch,
    pub claim1: Vec<Inequality>,
    pub trace: Trace,
}

impl PipelineReport<'_> {
    pub fn factor(&self) -> Option<&Tiling> {
        match &self.outcome {
            PipelineOutcome::Factor(t) => Some(t),
            PipelineOutcome::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&StageFailure> {
        match &self.outcome {
            PipelineOutcome::Factor(_) => None,
            PipelineOutcome::Failed(f) => Some(f),
        }
    }

    /// Report text; `certificate` is the path written for a factor.
    pub fn render(&self, certificate: Option<&str>) -> String {
        let mut out = self.trace.render();
        out.push_str("RESULT\n");
        match &self.outcome {
            PipelineOutcome::Factor(_) => out.push_str(&format!("FACTOR {}\n", certificate.unwrap_or("-"))),
            PipelineOutcome::Failed(f) => out.push_str(&format!("FAIL {} {}\n", f.stage, f.reason.code())),
        }
        out
    }
}

/// Runs the whole staged construction on `h`.
pub fn run_pipeline<'g>(
    h: &'g KGraph,
    pattern: YPattern,
    xi: f64,
    mode: WitnessMode,
    budget: Budget,
) -> Result<PipelineReport<'g>> {
    let (k, ell, n) = (pattern.k(), pattern.ell(), h.n());
    if h.k() != k {
        return invalid("pattern and graph uniformity differ");
    }
    if ell == 0 || ell + 2 > k {
        return invalid(format!("the staged construction needs 1 <= ell <= k-2 (k = {k}, ell = {ell})"));
    }
    if n % pattern.span() != 0 {
        return invalid(format!("n = {n} is not divisible by 2k - ell = {}", pattern.span()));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return invalid(format!("xi = {xi} must lie in (0, 1)"));
    }

    let mut trace = Trace::default();
    let floor = crate::codegree_floor(n, pattern);
    let codeg = h.codegree();
    trace.note(Section::Witness, format!("n = {n}, k = {k}, ell = {ell}, xi = {xi}, mode = {mode}"));
    trace.check(Section::Witness, Inequality::le("n/(2k-ell) <= codeg(H)", floor as f64, codeg as f64));

    let search = find_extremal_witness(h, pattern, xi, mode)?;
    let b_size = n - n / pattern.span();
    let bound = xi * binom(b_size, k) as f64;
    if let Some((b, e_b)) = search.best {
        trace.note(Section::Witness, format!("B = {{{b}}} (|B| = {})", b.len()));
        trace.check(Section::Witness, Inequality::le("e(B) <= xi*C(|B|,k)", e_b as f64, bound));
    }
    trace.note(
        Section::Witness,
        format!("candidates = {}, conclusive = {}", search.candidates, search.exhaustive),
    );
    let Some(witness) = search.witness else {
        let failure = StageFailure {
            stage: Stage::Witness,
            reason: FailReason::NoWitness,
            covered: VertexSet::empty(),
            copies_found: 0,
            detail: if search.exhaustive {
                "graph is not xi-extremal".into()
            } else {
                "local search found no qualifying B".into()
            },
        };
        return Ok(PipelineReport {
            outcome: PipelineOutcome::Failed(failure),
            state: None,
            witness_search: search,
            claim1: Vec::new(),
            trace,
        });
    };

    let class = classify(h, &witness)?;
    trace.note(
        Section::Classify,
        format!(
            "eps1 = {}, eps2 = {}, A' = {{{}}}, B' = {{{}}}, V0 = {{{}}}",
            number(class.eps1),
            number(class.eps2),
            class.a_prime,
            class.b_prime,
            class.v0
        ),
    );
    let claim1 = check_claim1(h, &witness, &class);
    for ineq in &claim1 {
        trace.check(Section::Claim1, ineq.clone());
    }

    let mut state = PipelineState::new(h, pattern, witness, class)?;
    state.trace = trace;
    state.record_degree_bounds()?;

    let stages: [(Stage, &dyn Fn(&mut PipelineState<'g>) -> Result<StageResult>); 4] = [
        (Stage::Y1, &|s| s.stage_y1()),
        (Stage::Y2, &|s| s.stage_y2()),
        (Stage::Y3, &|s| s.stage_y3()),
        (Stage::Y4, &|s| s.stage_y4(budget)),
    ];
    for (_, run) in stages {
        if let Err(failure) = run(&mut state)? {
            let trace = state.trace.clone();
            return Ok(PipelineReport {
                outcome: PipelineOutcome::Failed(failure),
                state: Some(state),
                witness_search: search,
                claim1,
                trace,
            });
        }
    }

    let factor = state.union()?;
    if let Err(defect) = verify_tiling(h, pattern, factor.copies(), true) {
        return Err(Error::Internal(format!("staged construction produced an invalid factor: {defect}")));
    }
    let trace = state.trace.clone();
    Ok(PipelineReport {
        outcome: PipelineOutcome::Factor(factor),
        state: Some(state),
        witness_search: search,
        claim1,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{build_extremal, build_partition_model, ExtremalSpec, InteriorMode};

    fn p31() -> YPattern {
        YPattern::new(3, 1).unwrap()
    }

    fn h0() -> KGraph {
        build_extremal(ExtremalSpec {
            k: 3,
            ell: 1,
            n: 10,
            interior: InteriorMode::Empty,
        })
        .unwrap()
        .graph
    }

    #[test]
    fn witness_on_extremal_graph() {
        let g = h0();
        let s = find_extremal_witness(&g, p31(), 0.01, WitnessMode::Exhaustive).unwrap();
        let w = s.witness.unwrap();
        assert_eq!(w.b.len(), 8);
        assert_eq!(w.e_b, 0);
        assert!(!w.b.contains(0));
        assert!(s.exhaustive);
    }

    #[test]
    fn complete_graph_is_not_extremal() {
        let g = KGraph::complete(10, 3).unwrap();
        let s = find_extremal_witness(&g, p31(), 0.01, WitnessMode::Exhaustive).unwrap();
        assert!(s.witness.is_none());
        assert_eq!(s.best.unwrap().1, 56);
    }

    #[test]
    fn local_search_finds_planted_split() {
        let m = build_partition_model(3, 25, 5).unwrap();
        let s = find_extremal_witness(&m.graph, p31(), 0.01, WitnessMode::auto(25)).unwrap();
        assert!(!s.exhaustive);
        assert_eq!(s.witness.unwrap().b, m.b);
        assert!(find_extremal_witness(&m.graph, p31(), 0.01, WitnessMode::Exhaustive.clone())
            .map(|s| s.witness.unwrap().b == m.b)
            .unwrap());
    }

    #[test]
    fn witness_requires_divisibility() {
        let g = KGraph::complete(9, 3).unwrap();
        assert!(find_extremal_witness(&g, p31(), 0.01, WitnessMode::Exhaustive).is_err());
    }

    #[test]
    fn classify_ideal_model() {
        let m = build_partition_model(3, 10, 2).unwrap();
        let w = find_extremal_witness(&m.graph, p31(), 0.01, WitnessMode::Exhaustive)
            .unwrap()
            .witness
            .unwrap();
        assert_eq!(w.b, m.b);
        let c = classify(&m.graph, &w).unwrap();
        assert_eq!((c.a_prime, c.b_prime, c.v0), (m.a, m.b, VertexSet::empty()));
        assert!((c.eps1 - 0.01f64.cbrt()).abs() < 1e-15);
        assert!((c.eps2 - 2.0 * 0.01f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!(check_claim1(&m.graph, &w, &c).iter().all(|i| i.pass && i.lhs == 0.0));
    }

    #[test]
    fn classify_complete_graph() {
        let g = KGraph::complete(10, 3).unwrap();
        let w = ExtremalWitness {
            b: VertexSet::range(2, 10),
            xi: 0.01,
            e_b: 56,
        };
        let c = classify(&g, &w).unwrap();
        // vertices outside B see every pair of B; vertices inside B see
        // C(7,2) = 21 of the C(8,2) = 28 pairs, below (1-eps1)*28 and above eps1*28
        assert_eq!(c.a_prime, VertexSet::from([0, 1]));
        assert_eq!(c.v0, VertexSet::range(2, 10));
        assert!(c.b_prime.is_empty());
    }

    #[test]
    fn classify_extremal_graph_and_claim1() {
        let g = h0();
        let w = find_extremal_witness(&g, p31(), 0.01, WitnessMode::Exhaustive)
            .unwrap()
            .witness
            .unwrap();
        let c = classify(&g, &w).unwrap();
        assert_eq!(c.a_prime, VertexSet::singleton(0));
        assert_eq!(c.b_prime.len(), 9);
        assert!(c.v0.is_empty());
        let state = PipelineState::new(&g, p31(), w, c.clone()).unwrap();
        assert_eq!(state.q, 1);

        let report = check_claim1(&g, &w, &c);
        assert_eq!(report.len(), 5);
        assert_eq!(report[1].lhs, 0.0);
        assert_eq!(report[3].lhs, 1.0);
        assert!(!report[3].pass);
        let rhs = 2.0 * 0.01f64.powf(2.0 / 3.0) * 8.0;
        assert!((report[3].rhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn inequality_lines() {
        assert_eq!(Inequality::le("x", 1.0, 2.0).to_string(), "x: 1 <= 2 : PASS");
        assert_eq!(Inequality::lt("y", 2.0, 2.0).to_string(), "y: 2 < 2 : FAIL");
        assert_eq!(Inequality::le("z", 1.0, 0.5).to_string(), "z: 1 <= 0.500000 : FAIL");
    }

    fn planted_state(g: &KGraph, b: VertexSet, a: VertexSet, bp: VertexSet, v0: VertexSet) -> PipelineState<'_> {
        let w = ExtremalWitness {
            b,
            xi: 0.01,
            e_b: g.edges_inside(b),
        };
        let c = Classification::from_parts(a, bp, v0, 0.01).unwrap();
        PipelineState::new(g, p31(), w, c).unwrap()
    }

    #[test]
    fn stage1_planted_clique() {
        // complete 3-graph on B' = {1..9} plus everything through 0
        let g = KGraph::complete(10, 3).unwrap();
        let mut s = planted_state(&g, VertexSet::range(2, 10), VertexSet::singleton(0), VertexSet::range(1, 10), VertexSet::empty());
        assert_eq!(s.q, 1);
        assert_eq!(s.stage_y1().unwrap(), Ok(()));
        assert_eq!(s.y1.len(), 1);
        let c = s.y1.copies()[0];
        assert_eq!(c.edge1(), VertexSet::from([1, 2, 3]));
        assert_eq!(c.edge2(), VertexSet::from([1, 4, 5]));
    }

    #[test]
    fn stage1_fails_without_copies() {
        let g = h0();
        let w = find_extremal_witness(&g, p31(), 0.01, WitnessMode::Exhaustive)
            .unwrap()
            .witness
            .unwrap();
        let c = classify(&g, &w).unwrap();
        let mut s = PipelineState::new(&g, p31(), w, c).unwrap();
        let failure = s.stage_y1().unwrap().unwrap_err();
        assert_eq!(failure.stage, Stage::Y1);
        assert_eq!(failure.reason, FailReason::NoCopy);
        assert_eq!(failure.copies_found, 0);
    }

    #[test]
    fn stage1_noop_when_q_nonpositive() {
        let m = build_partition_model(3, 10, 2).unwrap();
        let mut s = planted_state(&m.graph, m.b, m.a, m.b, VertexSet::empty());
        assert_eq!(s.q, 0);
        assert_eq!(s.stage_y1().unwrap(), Ok(()));
        assert!(s.y1.is_empty());
    }

    #[test]
    fn stage2_lifts_link_copy() {
        // w = 0 with a complete link on B' = {1..8}; A' = {9}
        let edges = VertexSet::range(1, 9).subsets(2).map(|p| p.union(VertexSet::singleton(0)));
        let g = KGraph::new(10, 3, edges).unwrap();
        let mut s = planted_state(&g, VertexSet::range(1, 9), VertexSet::singleton(9), VertexSet::range(1, 9), VertexSet::singleton(0));
        assert_eq!(s.stage_y1().unwrap(), Ok(()));
        assert_eq!(s.stage_y2().unwrap(), Ok(()));
        let c = s.y2.copies()[0];
        assert_eq!(c.shared(), VertexSet::singleton(0));
        assert_eq!(c.side1(), VertexSet::from([1, 2]));
        assert_eq!(c.side2(), VertexSet::from([3, 4]));

        let bare = KGraph::empty(10, 3).unwrap();
        let mut s = planted_state(&bare, VertexSet::range(1, 9), VertexSet::singleton(9), VertexSet::range(1, 9), VertexSet::singleton(0));
        let failure = s.stage_y2().unwrap().unwrap_err();
        assert_eq!((failure.stage, failure.reason), (Stage::Y2, FailReason::NoCopy));
    }

    fn common_link_graph() -> KGraph {
        let edges = VertexSet::range(3, 10)
            .subsets(2)
            .flat_map(|p| [p.union(VertexSet::singleton(0)), p.union(VertexSet::singleton(1))]);
        KGraph::new(10, 3, edges).unwrap()
    }

    #[test]
    fn stage3_rebalances_with_pairs() {
        let g = common_link_graph();
        let mut s = planted_state(&g, VertexSet::range(2, 10), VertexSet::range(0, 3), VertexSet::range(3, 10), VertexSet::empty());
        assert_eq!(s.q, -1);
        assert_eq!(s.stage_y1().unwrap(), Ok(()));
        assert_eq!(s.stage_y2().unwrap(), Ok(()));
        assert_eq!(s.stage_y3().unwrap(), Ok(()));
        assert_eq!(s.p, Some(-1));
        let c = s.y3.copies()[0];
        assert_eq!(c.vertices().intersection(s.a1).len(), 2);
        assert_eq!(c.edge1(), VertexSet::from([0, 3, 4]));
        assert_eq!(c.edge2(), VertexSet::from([1, 3, 5]));
        assert_eq!(s.a2, VertexSet::singleton(2));
        assert_eq!(s.b2.len(), 4);
    }

    #[test]
    fn stage3_fails_on_empty_common_link() {
        let g = KGraph::empty(10, 3).unwrap();
        let mut s = planted_state(&g, VertexSet::range(2, 10), VertexSet::range(0, 3), VertexSet::range(3, 10), VertexSet::empty());
        s.stage_y1().unwrap().unwrap();
        s.stage_y2().unwrap().unwrap();
        let failure = s.stage_y3().unwrap().unwrap_err();
        assert_eq!((failure.stage, failure.reason), (Stage::Y3, FailReason::NoCopy));
    }

    #[test]
    fn stage3_balanced_input_is_noop() {
        let m = build_partition_model(3, 10, 2).unwrap();
        let mut s = planted_state(&m.graph, m.b, m.a, m.b, VertexSet::empty());
        s.stage_y1().unwrap().unwrap();
        s.stage_y2().unwrap().unwrap();
        s.stage_y3().unwrap().unwrap();
        assert_eq!(s.p, Some(0));
        assert!(s.y3.is_empty());
        assert_eq!(s.b2.len(), 8);
        assert_eq!(s.b2.len(), 4 * s.a2.len());
    }

    #[test]
    fn partition_conditions() {
        let m = build_partition_model(3, 10, 2).unwrap();
        let r = check_partition_conditions(&m.graph, m.a, m.b, p31(), 0.0).unwrap();
        assert!(r.passes());
        assert_eq!(r.worst_a.unwrap().1, 0);

        let r = check_partition_conditions(&m.graph, m.a, VertexSet::range(2, 9), p31(), 1.0).unwrap();
        assert!(!r.size_ok);

        let missing = VertexSet::from([0, 4, 7]);
        let perturbed = m.graph.retain_edges(|e| e != missing);
        let r = check_partition_conditions(&perturbed, m.a, m.b, p31(), 0.0).unwrap();
        assert_eq!(r.failing_b, vec![4, 7]);
        assert_eq!(r.failing_a, vec![0]);
        assert!(!r.passes());
    }

    #[test]
    fn partition_factor_single_tile() {
        let x = VertexSet::singleton(0);
        let y = VertexSet::range(1, 5);
        let g = build_partition_model(3, 5, 1).unwrap().graph;
        let r = partition_factor(&g, x, y, p31(), None).unwrap();
        let t = r.tiling.unwrap();
        assert_eq!(t.len(), 1);
        assert!(!r.used_fallback);
        assert_eq!(t.copies()[0].edge1(), VertexSet::from([0, 1, 2]));
        assert_eq!(t.copies()[0].edge2(), VertexSet::from([0, 3, 4]));
    }

    #[test]
    fn partition_factor_ideal_model_and_empty() {
        let m = build_partition_model(3, 10, 2).unwrap();
        let r = partition_factor(&m.graph, m.a, m.b, p31(), None).unwrap();
        let t = r.tiling.unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(verify_tiling(&m.graph, p31(), t.copies(), true), Ok(()));
        assert!(t.copies().iter().all(|c| c.vertices().intersection(m.a).len() == 1));

        let r = partition_factor(&m.graph, VertexSet::empty(), VertexSet::empty(), p31(), None).unwrap();
        assert_eq!(r.outcome, Outcome::Found);
        assert!(r.tiling.unwrap().is_empty());
        assert!(partition_factor(&m.graph, m.a, VertexSet::range(2, 9), p31(), None).is_err());
    }

    #[test]
    fn partition_factor_falls_back() {
        // X-vertex 0 has no edges at all; the factor must use tiles with two X vertices
        let m = build_partition_model(3, 10, 2).unwrap();
        let g = m.graph.retain_edges(|e| !e.contains(0) || e.contains(1));
        let r = partition_factor(&g, m.a, m.b, p31(), None).unwrap();
        assert!(r.used_fallback);
        assert_eq!(r.outcome, find_factor(&g, p31(), None).unwrap().outcome);
        if let Some(t) = r.tiling {
            assert_eq!(verify_tiling(&g, p31(), t.copies(), true), Ok(()));
        }
    }

    #[test]
    fn pipeline_ideal_model() {
        let m = build_partition_model(3, 10, 2).unwrap();
        let r = run_pipeline(&m.graph, p31(), 0.01, WitnessMode::Exhaustive, None).unwrap();
        let t = r.factor().unwrap();
        assert_eq!(t.len(), 2);
        let s = r.state.as_ref().unwrap();
        assert_eq!((s.q, s.p), (0, Some(0)));
        assert!(s.class.v0.is_empty());
        assert_eq!(s.b2.len(), 4 * s.a2.len());
        let text = r.render(Some("cert.txt"));
        for section in ["WITNESS", "CLASSIFY", "CLAIM1", "STAGE1", "STAGE2", "STAGE3", "STAGE4", "RESULT"] {
            assert!(text.contains(&format!("{section}\n")), "missing {section}");
        }
        assert!(text.ends_with("RESULT\nFACTOR cert.txt\n"));
    }

    #[test]
    fn pipeline_extremal_graph_fails_at_stage1() {
        let g = h0();
        let r = run_pipeline(&g, p31(), 0.01, WitnessMode::Exhaustive, None).unwrap();
        let f = r.failure().unwrap();
        assert_eq!((f.stage, f.reason), (Stage::Y1, FailReason::NoCopy));
        let hyp = r.trace.find("n/(2k-ell) <= codeg(H)").unwrap();
        assert_eq!((hyp.lhs, hyp.rhs, hyp.pass), (2.0, 1.0, false));
        assert!(r.render(None).ends_with("FAIL STAGE1 no-copy\n"));
    }

    #[test]
    fn pipeline_rejects_bad_parameters() {
        let g = KGraph::complete(10, 3).unwrap();
        assert!(run_pipeline(&g, YPattern::new(3, 2).unwrap(), 0.01, WitnessMode::Exhaustive, None).is_err());
        assert!(run_pipeline(&g, YPattern::new(3, 0).unwrap(), 0.01, WitnessMode::Exhaustive, None).is_err());
        assert!(run_pipeline(&g, p31(), 0.0, WitnessMode::Exhaustive, None).is_err());
        let g9 = KGraph::complete(9, 3).unwrap();
        assert!(run_pipeline(&g9, p31(), 0.01, WitnessMode::Exhaustive, None).is_err());
    }

    #[test]
    fn pipeline_non_extremal_reports_no_witness() {
        let g = KGraph::complete(10, 3).unwrap();
        let r = run_pipeline(&g, p31(), 0.01, WitnessMode::Exhaustive, None).unwrap();
        let f = r.failure().unwrap();
        assert_eq!((f.stage, f.reason), (Stage::Witness, FailReason::NoWitness));
        assert!(r.render(None).ends_with("FAIL WITNESS no-witness\n"));
    }
}
