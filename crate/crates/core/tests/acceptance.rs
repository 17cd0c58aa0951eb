//! Acceptance gate: runs criteria 1-8 and prints one PASS/FAIL line each.
//! Exits non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tile_lab::cli::{batch_report, parse_batch_spec};
use tile_lab::construct::{build_extremal, build_partition_model, random_codegree_graph, thin_edges, ExtremalSpec, GenSpec, InteriorMode};
use tile_lab::pipeline::{run_pipeline, Section, WitnessMode};
use tile_lab::solver::{brute_force_factor, find_max_tiling};
use tile_lab::{enumerate_copies, find_factor, verify_tiling, Certificate, KGraph, Outcome, VertexSet, YCopy, YPattern};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn pat(k: usize, ell: usize) -> YPattern {
    YPattern::new(k, ell).unwrap()
}

fn lower_bound() -> Verdict {
    let mut seen = Vec::new();
    for (k, ell, n) in [(3, 1, 10), (3, 1, 15), (4, 1, 14), (4, 2, 12)] {
        let p = pat(k, ell);
        let ex = build_extremal(ExtremalSpec {
            k,
            ell,
            n,
            interior: InteriorMode::Empty,
        })
        .map_err(|e| e.to_string())?;
        let want = (n / p.span()) as u64 - 1;
        let delta = ex.graph.min_d_degree(k - 1).map_err(|e| e.to_string())?;
        let naive = naive_min_degree(&ex.graph, k - 1);
        ensure!(delta == want && naive == want, "({k},{ell},{n}): delta = {delta}, naive = {naive}, want {want}");
        let r = find_factor(&ex.graph, p, None).map_err(|e| e.to_string())?;
        ensure!(r.outcome == Outcome::NoneExhaustive, "({k},{ell},{n}): solver says {}", r.outcome);
        seen.push(format!("({k},{ell},{n}) delta={delta} nodes={}", r.stats.nodes));
    }
    Ok(seen.join(", "))
}

fn oracle_equivalence() -> Verdict {
    let mut summary = Vec::new();
    for (k, ell, n) in [(3, 1, 10), (3, 2, 8), (4, 2, 12)] {
        let p = pat(k, ell);
        let floor = (n / p.span()) as u64;
        let (mut found, mut none) = (0, 0);
        for seed in 0..100 {
            let h = random_codegree_graph(k, n, floor, 0.5, seed).map_err(|e| e.to_string())?;
            let fast = find_factor(&h, p, None).map_err(|e| e.to_string())?;
            let slow = brute_force_factor(&h, p).map_err(|e| e.to_string())?;
            ensure!(
                fast.outcome == slow.outcome,
                "({k},{ell},{n}) seed {seed}: solver {} vs oracle {}",
                fast.outcome,
                slow.outcome
            );
            if let Some(t) = &fast.tiling {
                ensure!(verify_tiling(&h, p, t.copies(), true).is_ok(), "seed {seed}: unverifiable factor");
                found += 1;
            } else {
                none += 1;
            }
        }
        // Random floors rarely block a factor, so also compare on the lower-bound graph.
        let ex = build_extremal(ExtremalSpec {
            k,
            ell,
            n,
            interior: InteriorMode::Empty,
        })
        .map_err(|e| e.to_string())?;
        let fast = find_factor(&ex.graph, p, None).map_err(|e| e.to_string())?.outcome;
        let slow = brute_force_factor(&ex.graph, p).map_err(|e| e.to_string())?.outcome;
        ensure!(fast == slow, "({k},{ell},{n}) lower-bound graph: solver {fast} vs oracle {slow}");
        summary.push(format!("({k},{ell},{n}) found={found} none={none} lower-bound={fast}"));
    }
    Ok(format!("0 disagreements; {}", summary.join(", ")))
}

fn copy_counts() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0usize;
    for i in 0..500 {
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k..=12);
        let ell = rng.gen_range(0..k);
        let density = rng.gen_range(0.0..0.6);
        let h = random_graph(n, k, density, i);
        let fast = enumerate_copies(&h, pat(k, ell)).map_err(|e| e.to_string())?.len();
        let naive = naive_copy_count(&h, ell);
        ensure!(fast == naive, "graph {i} (n={n},k={k},ell={ell}): {fast} vs naive {naive}");
        total += fast;
    }
    let k5 = enumerate_copies(&KGraph::complete(5, 3).unwrap(), pat(3, 1)).unwrap().len();
    let k4 = enumerate_copies(&KGraph::complete(4, 3).unwrap(), pat(3, 2)).unwrap().len();
    let (o5, o4) = (
        naive_copy_count(&KGraph::complete(5, 3).unwrap(), 1),
        naive_copy_count(&KGraph::complete(4, 3).unwrap(), 2),
    );
    ensure!(k5 == 15 && o5 == 15, "K5/Y(3,1): {k5}, oracle {o5}");
    ensure!(k4 == 6 && o4 == 6, "K4/Y(3,2): {k4}, oracle {o4}");
    Ok(format!("500 graphs, {total} copies matched; K5/Y(3,1)=15, K4/Y(3,2)=6"))
}

fn identity_run() -> Verdict {
    let m = build_partition_model(3, 10, 2).map_err(|e| e.to_string())?;
    let r = run_pipeline(&m.graph, pat(3, 1), 0.01, WitnessMode::Exhaustive, None).map_err(|e| e.to_string())?;
    let s = r.state.as_ref().ok_or("no pipeline state")?;
    ensure!(s.class.v0.is_empty(), "V0 = {{{}}}", s.class.v0);
    ensure!(s.q == 0 && s.p == Some(0), "q = {}, p = {:?}", s.q, s.p);
    ensure!(s.b2.len() == 8 && s.a2.len() == 2, "|A2| = {}, |B2| = {}", s.a2.len(), s.b2.len());
    let t = r.factor().ok_or_else(|| format!("pipeline failed: {}", r.render(None)))?;
    ensure!(t.len() == 2, "{} tiles", t.len());
    let cert = Certificate::parse(&Certificate::factor(pat(3, 1), 10, t).to_text()).map_err(|e| e.to_string())?;
    ensure!(cert.verify(&m.graph).is_ok(), "certificate rejected");
    let text = r.render(Some("cert"));
    for line in ["q = 0", "|A1| = 2, |B1| = 8, |V1| = 10, p = 0", "|Y3| = 0, |A2| = 2, |B2| = 8 = (2k-ell-1)|A2| = 8", "|Y4| = 2"] {
        ensure!(text.lines().any(|l| l == line), "trace lacks {line:?}");
    }
    Ok("V0={}, q=0, p=0, |B2|=8=4|A2|, 2 verified tiles".into())
}

struct Perturbed {
    graph: KGraph,
    pattern: YPattern,
}

fn perturbations() -> Vec<Perturbed> {
    let mut out = Vec::new();
    for (k, ell, n, x) in [(3, 1, 10, 2), (3, 1, 15, 3), (4, 1, 14, 2), (4, 2, 12, 2)] {
        let p = pat(k, ell);
        let m = build_partition_model(k, n, x).unwrap();
        let floor = (n / p.span()) as u64;
        let meeting = m.graph.edges().iter().filter(|e| !e.is_disjoint(m.a)).count();
        for seed in 0..50u64 {
            let cap = meeting * (seed as usize % 6) / 100;
            let graph = thin_edges(&m.graph, |e| !e.is_disjoint(m.a), floor, cap, seed);
            out.push(Perturbed { graph, pattern: p });
        }
    }
    out
}

fn perturbation_soundness(instances: &[Perturbed]) -> Verdict {
    let (mut factors, mut failures, mut stage4) = (0, 0, 0);
    for (i, inst) in instances.iter().enumerate() {
        let (h, p) = (&inst.graph, inst.pattern);
        let floor = (h.n() / p.span()) as u64;
        ensure!(h.codegree() >= floor, "instance {i}: codegree {} below {floor}", h.codegree());
        let r = run_pipeline(h, p, 0.01, WitnessMode::Exhaustive, None).map_err(|e| format!("instance {i}: {e}"))?;
        if let Some(s) = &r.state {
            if r.trace.lines().iter().any(|(sec, _)| *sec == Section::Stage4) {
                stage4 += 1;
                ensure!(
                    s.b2.len() == (p.span() - 1) * s.a2.len(),
                    "instance {i}: |B2| = {} vs |A2| = {}",
                    s.b2.len(),
                    s.a2.len()
                );
            }
        }
        match (r.factor(), r.failure()) {
            (Some(t), None) => {
                let cert = Certificate::parse(&Certificate::factor(p, h.n(), t).to_text()).map_err(|e| e.to_string())?;
                ensure!(cert.verify(h).is_ok(), "instance {i}: invalid certificate");
                let direct = find_factor(h, p, None).map_err(|e| e.to_string())?;
                ensure!(direct.outcome == Outcome::Found, "instance {i}: solver disagrees with pipeline");
                factors += 1;
            }
            (None, Some(_)) => failures += 1,
            _ => return Err(format!("instance {i}: neither factor nor structured failure")),
        }
    }
    Ok(format!(
        "{} runs: {factors} verified factors, {failures} stage failures, 0 invalid certificates, balance held in {stage4} stage-4 runs",
        instances.len()
    ))
}

fn claim1_diagnostics(instances: &[Perturbed]) -> Verdict {
    let xi: f64 = 0.01;
    let mut lines = 0;
    for (i, inst) in instances.iter().enumerate() {
        let (h, p) = (&inst.graph, inst.pattern);
        let r = run_pipeline(h, p, xi, WitnessMode::Exhaustive, None).map_err(|e| e.to_string())?;
        let Some(s) = &r.state else {
            return Err(format!("instance {i}: no witness"));
        };
        let b = s.witness.b.to_vec();
        let full = choose(b.len(), h.k() - 1) as f64;
        let eps1 = xi.cbrt();
        let bound = 2.0 * eps1 * eps1 * b.len() as f64;
        let (mut ap, mut bp, mut v0) = (Vec::new(), Vec::new(), Vec::new());
        for v in 0..h.n() {
            let deg = naive_deg_in(h, &[v], &b) as f64;
            if deg >= (1.0 - eps1) * full {
                ap.push(v)
            } else if deg <= eps1 * full {
                bp.push(v)
            } else {
                v0.push(v)
            }
        }
        let a: Vec<usize> = (0..h.n()).filter(|v| !b.contains(v)).collect();
        let minus = |x: &[usize], y: &[usize]| x.iter().filter(|v| !y.contains(v)).count() as f64;
        let expected = [
            (minus(&a, &ap), bound),
            (minus(&b, &bp), bound),
            (minus(&ap, &a), bound),
            (minus(&bp, &b), bound),
            (v0.len() as f64, 2.0 * bound),
        ];
        ensure!(r.claim1.len() == 5, "instance {i}: {} claim lines", r.claim1.len());
        for (line, (lhs, rhs)) in r.claim1.iter().zip(expected) {
            ensure!(
                line.lhs == lhs && line.rhs == rhs && line.pass == (lhs <= rhs),
                "instance {i}: {line} vs recomputed {lhs} <= {rhs}"
            );
            lines += 1;
        }
    }
    Ok(format!("{lines} lines on {} instances match recomputation", instances.len()))
}

fn invariant_suite() -> Verdict {
    let mut copies_checked = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k..=10);
        let ell = rng.gen_range(0..k);
        let h = random_graph(n, k, rng.gen_range(0.0..1.0), seed);
        let p = pat(k, ell);
        let fail = |what: &str| format!("seed {seed} (n={n},k={k},ell={ell}): {what}");

        for d in 0..=k {
            let total: u64 = combinations(n, d).iter().map(|s| h.degree(set(s)).unwrap()).sum();
            ensure!(total == choose(k, d) * h.edge_count() as u64, "{}", fail("handshake"));
        }
        let x: VertexSet = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let y = h.vertices().difference(x);
        for i in 0..=k.min(x.len()) {
            if k - i > y.len() {
                continue;
            }
            let c = h.subset_counts(x, y, i, k - i).unwrap();
            ensure!(c.e + c.e_bar == choose(x.len(), i) * choose(y.len(), k - i), "{}", fail("complement"));
            ensure!(c.e == naive_type_count(&h, &x.to_vec(), &y.to_vec(), i, k - i), "{}", fail("type count"));
        }
        for v in 0..n {
            let d = h.deg_in(VertexSet::singleton(v), y).unwrap();
            let link = h.link_graph(VertexSet::singleton(v), y).unwrap();
            ensure!(d.deg == link.graph.edge_count() as u64, "{}", fail("deg_in vs link"));
        }

        let text = h.to_text();
        let back = KGraph::parse(&text).map_err(|e| fail(&e.to_string()))?;
        ensure!(back == h && back.to_text() == text, "{}", fail("graph round trip"));

        let copies = enumerate_copies(&h, p).unwrap();
        for c in copies.iter().take(20) {
            ensure!(c.to_string().parse::<YCopy>().ok() == Some(*c), "{}", fail("copy round trip"));
            copies_checked += 1;
        }

        let max = find_max_tiling(&h, p, None).unwrap();
        ensure!(verify_tiling(&h, p, max.copies(), false).is_ok(), "{}", fail("max tiling invalid"));
        let cert = Certificate::partial(p, n, &max);
        ensure!(Certificate::parse(&cert.to_text()).ok() == Some(cert.clone()), "{}", fail("certificate round trip"));
        let r = find_factor(&h, p, None).unwrap();
        if let Some(t) = &r.tiling {
            ensure!(verify_tiling(&h, p, t.copies(), true).is_ok(), "{}", fail("factor invalid"));
            ensure!(
                Certificate::factor(p, n, t).verify(&h).is_ok(),
                "{}",
                fail("factor certificate invalid")
            );
        }
        if let (Some(a), Some(b)) = (copies.first(), copies.iter().find(|c| !c.vertices().is_disjoint(copies[0].vertices()) && *c != &copies[0])) {
            ensure!(verify_tiling(&h, p, &[*a, *b], false).is_err(), "{}", fail("overlap accepted"));
        }
    }
    Ok(format!("1000 graphs (chacha8 seeds 0..1000), {copies_checked} copy round trips"))
}

fn smoke_report() -> Verdict {
    let rows = parse_batch_spec("random:k=3,n=10,floor=2,density=0.5 seeds=0..200 ell=1").map_err(|e| e.to_string())?;
    let report = batch_report(&rows);
    ensure!(report.rows.len() == 200, "{} rows", report.rows.len());
    for row in &report.rows {
        ensure!(row.codegree >= 2, "seed {}: codegree {}", row.seed, row.codegree);
        ensure!(row.outcome != "error", "seed {}: {}", row.seed, row.note);
        if row.outcome == "found" {
            ensure!(row.verified, "seed {}: found row not verified", row.seed);
            let spec: GenSpec = row.spec.parse().map_err(|e: tile_lab::Error| e.to_string())?;
            let h = spec.build().map_err(|e| e.to_string())?.graph;
            let t = find_factor(&h, pat(3, 1), None).unwrap().tiling.ok_or("factor vanished")?;
            ensure!(verify_tiling(&h, pat(3, 1), t.copies(), true).is_ok(), "seed {}: re-verification failed", row.seed);
        }
    }
    let found = report.count("found");
    Ok(format!(
        "200 rows, found-rate {found}/200 ({:.1}%), every found row verified",
        100.0 * found as f64 / 200.0
    ))
}

fn main() {
    let start = Instant::now();
    let instances = perturbations();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("1 lower-bound reproduction", Box::new(lower_bound)),
        ("2 oracle equivalence", Box::new(oracle_equivalence)),
        ("3 copy-count oracle", Box::new(copy_counts)),
        ("4 pipeline identity run", Box::new(identity_run)),
        ("5 pipeline soundness under perturbation", Box::new(|| perturbation_soundness(&instances))),
        ("6 claim diagnostics", Box::new(|| claim1_diagnostics(&instances))),
        ("7 invariant suite", Box::new(invariant_suite)),
        ("8 smoke report", Box::new(smoke_report)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{secs:.2}s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
