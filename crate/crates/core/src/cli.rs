//! The `tile-lab` command line.
//!
//! Every verb takes `key=value` options after its positional paths. Exit
//! codes: 0 for success (any certificate produced was verified in the same
//! run), 2 for a valid negative outcome (no factor, stage failure, invalid
//! certificate), 1 for usage, I/O and parse errors.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::construct::{GenSpec, RNG_NAME};
use crate::error::{invalid, Error, Result};
use crate::graph::KGraph;
use crate::pattern::{enumerate_copies, YPattern};
use crate::pipeline::{run_pipeline, WitnessMode};
use crate::solver::{find_factor, find_max_tiling, verify_tiling, Budget, Certificate, Outcome};

pub const REPORT_HEADER: &str = "# tile-lab report v1";
pub const REPORT_COLUMNS: &str = "# row\tseed\tspec\tk\tell\tn\tcodegree\toutcome\tcopies\tnodes\tverified\tnote";

#[derive(Debug, Parser)]
#[command(name = "tile-lab", version, about = "Tile k-uniform hypergraphs with two-edge patterns")]
struct Cli {
    /// Worker threads for batch reports (0 = all cores).
    #[arg(long, env = "TILE_LAB_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a graph, e.g. `gen extremal k=3 ell=1 n=10`.
    Gen {
        kind: String,
        options: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Minimum d-degree (default d = k-1).
    Codegree { graph: PathBuf, options: Vec<String> },
    /// Count (and with `list=true` print) the copies of Y(k, ell).
    Copies { graph: PathBuf, options: Vec<String> },
    /// Decide whether a factor exists; writes a certificate when one does.
    Solve {
        graph: PathBuf,
        options: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Large vertex-disjoint tiling by greedy search and local swaps.
    MaxTiling {
        graph: PathBuf,
        options: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Staged factor construction for near-extremal graphs.
    Pipeline {
        graph: PathBuf,
        options: Vec<String>,
        /// Certificate path.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Where to write the stage report (default: standard output).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a certificate against a graph.
    Verify { graph: PathBuf, certificate: PathBuf },
    /// Run every instance listed in a batch spec file.
    Report {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// `key=value` options with typed access; leftovers are a usage error.
struct Options {
    verb: &'static str,
    map: BTreeMap<String, String>,
}

impl Options {
    fn parse(verb: &'static str, items: &[String]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in items {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("{verb}: expected key=value, got {item:?}")))?;
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return invalid(format!("{verb}: option {key} given twice"));
            }
        }
        Ok(Options { verb, map })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidArgument(format!("{}: bad value {key}={raw}", self.verb))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::InvalidArgument(format!("{}: missing option {key}", self.verb)))
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(key) => invalid(format!("{}: unknown option {key}", self.verb)),
            None => Ok(()),
        }
    }
}

/// Reads a graph file in the text format.
pub fn parse_graph_file(path: &Path) -> Result<KGraph> {
    KGraph::parse(&fs::read_to_string(path)?)
}

fn distinct(input: &Path, output: Option<&PathBuf>) -> Result<()> {
    if output.is_some_and(|o| o == input) {
        return invalid(format!("output path {} equals the input path", input.display()));
    }
    Ok(())
}

/// Writes an artifact to `path`, or to `out` ahead of the summary.
fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pattern_for(h: &KGraph, opts: &mut Options) -> Result<YPattern> {
    let ell = opts.require("ell")?;
    YPattern::new(h.k(), ell)
}

struct Exit(i32);

/// Entry point shared by the binary and the tests.
pub fn main_with_args(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(cli, out) {
        Ok(Exit(code)) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<Exit> {
    match cli.command {
        Command::Gen { kind, options, output } => gen(&kind, &options, output.as_ref(), out),
        Command::Codegree { graph, options } => {
            let h = parse_graph_file(&graph)?;
            let mut opts = Options::parse("codegree", &options)?;
            let d = opts.take("d")?.unwrap_or(h.k().saturating_sub(1));
            opts.finish()?;
            let min = h.min_d_degree(d)?;
            writeln!(out, "codegree n={} k={} d={d} min={min}", h.n(), h.k())?;
            Ok(Exit(0))
        }
        Command::Copies { graph, options } => {
            let h = parse_graph_file(&graph)?;
            let mut opts = Options::parse("copies", &options)?;
            let pattern = pattern_for(&h, &mut opts)?;
            let list = opts.take("list")?.unwrap_or(false);
            opts.finish()?;
            let copies = enumerate_copies(&h, pattern)?;
            if list {
                for c in &copies {
                    writeln!(out, "{c}")?;
                }
            }
            writeln!(out, "copies {pattern} count={}", copies.len())?;
            Ok(Exit(0))
        }
        Command::Solve { graph, options, output } => {
            distinct(&graph, output.as_ref())?;
            let h = parse_graph_file(&graph)?;
            let mut opts = Options::parse("solve", &options)?;
            let pattern = pattern_for(&h, &mut opts)?;
            let budget: Budget = opts.take("budget")?;
            opts.finish()?;
            let result = find_factor(&h, pattern, budget)?;
            let nodes = result.stats.nodes;
            match (result.outcome, result.tiling) {
                (Outcome::Found, Some(t)) => {
                    let cert = Certificate::factor(pattern, h.n(), &t);
                    let text = cert.to_text();
                    let reread = Certificate::parse(&text)?;
                    if let Err(defect) = reread.verify(&h) {
                        return Err(Error::Internal(format!("solver certificate failed verification: {defect}")));
                    }
                    emit(out, output.as_ref(), &text)?;
                    writeln!(out, "solve found copies={} nodes={nodes}", t.len())?;
                    Ok(Exit(0))
                }
                (outcome, _) => {
                    writeln!(out, "solve {outcome} nodes={nodes}")?;
                    Ok(Exit(2))
                }
            }
        }
        Command::MaxTiling { graph, options, output } => {
            distinct(&graph, output.as_ref())?;
            let h = parse_graph_file(&graph)?;
            let mut opts = Options::parse("max-tiling", &options)?;
            let pattern = pattern_for(&h, &mut opts)?;
            let budget: Budget = opts.take("budget")?;
            opts.finish()?;
            let t = find_max_tiling(&h, pattern, budget)?;
            let spanning = t.covered().len() == h.n();
            let cert = if spanning {
                Certificate::factor(pattern, h.n(), &t)
            } else {
                Certificate::partial(pattern, h.n(), &t)
            };
            if let Err(defect) = cert.verify(&h) {
                return Err(Error::Internal(format!("tiling failed verification: {defect}")));
            }
            emit(out, output.as_ref(), &cert.to_text())?;
            writeln!(
                out,
                "max-tiling copies={} covered={} n={}",
                t.len(),
                t.covered().len(),
                h.n()
            )?;
            Ok(Exit(0))
        }
        Command::Pipeline {
            graph,
            options,
            output,
            report,
        } => {
            distinct(&graph, output.as_ref())?;
            distinct(&graph, report.as_ref())?;
            if output.is_some() && output == report {
                return invalid("certificate and report paths coincide");
            }
            let h = parse_graph_file(&graph)?;
            let mut opts = Options::parse("pipeline", &options)?;
            let pattern = pattern_for(&h, &mut opts)?;
            let xi = opts.take("xi")?.unwrap_or(0.01);
            let budget: Budget = opts.take("budget")?;
            let mode_name: String = opts.take("mode")?.unwrap_or_else(|| "auto".into());
            let restarts = opts.take("restarts")?.unwrap_or(32);
            let seed = opts.take("seed")?.unwrap_or(0);
            opts.finish()?;
            let mode = match mode_name.as_str() {
                "auto" => match WitnessMode::auto(h.n()) {
                    WitnessMode::LocalSearch { .. } => WitnessMode::LocalSearch { restarts, seed },
                    m => m,
                },
                "exhaustive" => WitnessMode::Exhaustive,
                "local_search" | "local" => WitnessMode::LocalSearch { restarts, seed },
                other => return invalid(format!("pipeline: unknown mode {other:?}")),
            };
            let result = run_pipeline(&h, pattern, xi, mode, budget)?;
            let cert_name = output.as_ref().map(|p| p.display().to_string());
            let text = result.render(cert_name.as_deref().or(Some("-")));
            let code = match result.factor() {
                Some(t) => {
                    let cert = Certificate::factor(pattern, h.n(), t);
                    if let Err(defect) = cert.verify(&h) {
                        return Err(Error::Internal(format!("pipeline certificate failed verification: {defect}")));
                    }
                    if let Some(p) = &output {
                        fs::write(p, cert.to_text())?;
                    }
                    0
                }
                None => 2,
            };
            emit(out, report.as_ref(), &text)?;
            match result.failure() {
                None => writeln!(out, "pipeline factor copies={}", result.factor().map_or(0, |t| t.len()))?,
                Some(f) => writeln!(out, "pipeline fail {} {}", f.stage, f.reason.code())?,
            }
            Ok(Exit(code))
        }
        Command::Verify { graph, certificate } => {
            let h = parse_graph_file(&graph)?;
            let cert = Certificate::parse(&fs::read_to_string(&certificate)?)?;
            match cert.verify(&h) {
                Ok(()) => {
                    writeln!(out, "verify ok copies={}", cert.copies.len())?;
                    Ok(Exit(0))
                }
                Err(defect) => {
                    writeln!(out, "verify invalid reason={}", defect.code())?;
                    Ok(Exit(2))
                }
            }
        }
        Command::Report { spec, output } => {
            distinct(&spec, output.as_ref())?;
            let rows = parse_batch_spec(&fs::read_to_string(&spec)?)?;
            let report = match cli.threads {
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                    .install(|| batch_report(&rows)),
                None => batch_report(&rows),
            };
            emit(out, output.as_ref(), &report.to_text())?;
            writeln!(out, "{}", report.summary())?;
            Ok(Exit(0))
        }
    }
}

fn gen(kind: &str, options: &[String], output: Option<&PathBuf>, out: &mut dyn Write) -> Result<Exit> {
    let spec = if kind.contains(':') {
        if !options.is_empty() {
            return invalid("gen: give either a full spec string or a kind with options");
        }
        kind.parse::<GenSpec>()?
    } else {
        GenSpec::from_parts(kind, &Options::parse("gen", options)?.map)?
    };
    let built = spec.build()?;
    let h = &built.graph;
    let mut text = format!("# spec: {spec}\n");
    text.push_str(&h.to_text());
    emit(out, output, &text)?;
    let d = h.k().saturating_sub(1);
    write!(out, "gen ok n={} edges={} delta{d}={}", h.n(), h.edge_count(), h.min_d_degree(d)?)?;
    if let GenSpec::Random { seed, .. } = spec {
        write!(out, " seed={seed} rng={RNG_NAME}")?;
    }
    writeln!(out)?;
    Ok(Exit(0))
}

/// One line of a batch spec: `<generator spec> seeds=a..b ell=L [budget=N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchRow {
    pub spec: GenSpec,
    /// Half-open seed range.
    pub seeds: std::ops::Range<u64>,
    pub ell: usize,
    pub budget: Budget,
}

/// Parses a batch spec; `#` comments and blank lines are skipped.
pub fn parse_batch_spec(text: &str) -> Result<Vec<BatchRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| crate::error::parse_err(i + 1, msg);
        let mut fields = line.split_whitespace();
        let spec: GenSpec = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e: Error| bad(e.to_string()))?;
        let items: Vec<String> = fields.map(String::from).collect();
        let mut opts = Options::parse("report", &items).map_err(|e| bad(e.to_string()))?;
        let seeds = match opts.take::<String>("seeds").map_err(|e| bad(e.to_string()))? {
            None => 0..1,
            Some(raw) => parse_seed_range(&raw).ok_or_else(|| bad(format!("bad seed range {raw:?}")))?,
        };
        let ell = opts.require("ell").map_err(|e| bad(e.to_string()))?;
        let budget = opts.take("budget").map_err(|e| bad(e.to_string()))?;
        opts.finish().map_err(|e| bad(e.to_string()))?;
        YPattern::new(spec.k(), ell).map_err(|e| bad(e.to_string()))?;
        rows.push(BatchRow {
            spec,
            seeds,
            ell,
            budget,
        });
    }
    Ok(rows)
}

fn parse_seed_range(raw: &str) -> Option<std::ops::Range<u64>> {
    match raw.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.parse().ok()?, b.parse().ok()?);
            (a <= b).then_some(a..b)
        }
        None => raw.parse().ok().map(|s: u64| s..s + 1),
    }
}

/// One instance in a batch report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub row: usize,
    pub seed: u64,
    pub spec: String,
    pub k: usize,
    pub ell: usize,
    pub n: usize,
    pub codegree: u64,
    /// `found`, `none`, `budget` or `error`.
    pub outcome: String,
    pub copies: usize,
    pub nodes: u64,
    pub verified: bool,
    pub note: String,
}

impl fmt::Display for ReportRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.row,
            self.seed,
            self.spec,
            self.k,
            self.ell,
            self.n,
            self.codegree,
            self.outcome,
            self.copies,
            self.nodes,
            if self.verified { "yes" } else { "no" },
            if self.note.is_empty() { "-" } else { &self.note }
        )
    }
}

impl FromStr for ReportRow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let f: Vec<&str> = s.split('\t').collect();
        if f.len() != 12 {
            return invalid(format!("report row has {} fields, expected 12", f.len()));
        }
        let num = |i: usize| -> Result<u64> {
            f[i].parse()
                .map_err(|_| Error::InvalidArgument(format!("report field {} is not a number: {:?}", i + 1, f[i])))
        };
        let verified = match f[10] {
            "yes" => true,
            "no" => false,
            other => return invalid(format!("bad verified flag {other:?}")),
        };
        Ok(ReportRow {
            row: num(0)? as usize,
            seed: num(1)?,
            spec: f[2].to_string(),
            k: num(3)? as usize,
            ell: num(4)? as usize,
            n: num(5)? as usize,
            codegree: num(6)?,
            outcome: f[7].to_string(),
            copies: num(8)? as usize,
            nodes: num(9)?,
            verified,
            note: if f[11] == "-" { String::new() } else { f[11].to_string() },
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchReport {
    pub rows: Vec<ReportRow>,
}

impl BatchReport {
    pub fn count(&self, outcome: &str) -> usize {
        self.rows.iter().filter(|r| r.outcome == outcome).count()
    }

    pub fn max_nodes(&self) -> u64 {
        self.rows.iter().map(|r| r.nodes).max().unwrap_or(0)
    }

    pub fn summary(&self) -> String {
        format!(
            "report instances={} found={} none={} budget={} error={} max_nodes={}",
            self.rows.len(),
            self.count("found"),
            self.count("none"),
            self.count("budget"),
            self.count("error"),
            self.max_nodes()
        )
    }

    pub fn to_text(&self) -> String {
        let mut text = format!("{REPORT_HEADER}\n{REPORT_COLUMNS}\n");
        for r in &self.rows {
            text.push_str(&format!("{r}\n"));
        }
        text.push_str(&format!("# {}\n", self.summary()));
        text
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, REPORT_HEADER)) => {}
            _ => return Err(crate::error::parse_err(1, format!("expected {REPORT_HEADER:?}"))),
        }
        let rows = lines
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .map(|(i, l)| l.parse().map_err(|e: Error| crate::error::parse_err(i + 1, e.to_string())))
            .collect::<Result<_>>()?;
        Ok(BatchReport { rows })
    }
}

fn clean(msg: &str) -> String {
    msg.replace(['\t', '\n'], " ")
}

fn run_instance(row: usize, batch: &BatchRow, seed: u64) -> ReportRow {
    let spec = batch.spec.with_seed(seed);
    let mut r = ReportRow {
        row,
        seed,
        spec: spec.to_string(),
        k: spec.k(),
        ell: batch.ell,
        n: 0,
        codegree: 0,
        outcome: "error".into(),
        copies: 0,
        nodes: 0,
        verified: false,
        note: String::new(),
    };
    let mut attempt = || -> Result<()> {
        let h = spec.build()?.graph;
        r.n = h.n();
        r.codegree = h.codegree();
        let pattern = YPattern::new(h.k(), batch.ell)?;
        let result = find_factor(&h, pattern, batch.budget)?;
        r.nodes = result.stats.nodes;
        r.note = result.note.clone().unwrap_or_default();
        match (result.outcome, result.tiling) {
            (Outcome::Found, Some(t)) => {
                r.copies = t.len();
                match verify_tiling(&h, pattern, t.copies(), true) {
                    Ok(()) => {
                        r.verified = true;
                        r.outcome = "found".into();
                    }
                    Err(defect) => r.note = format!("certificate rejected: {defect}"),
                }
            }
            (Outcome::BudgetExceeded, _) => r.outcome = "budget".into(),
            _ => r.outcome = "none".into(),
        }
        Ok(())
    };
    if let Err(e) = attempt() {
        r.outcome = "error".into();
        r.note = e.to_string();
    }
    r.note = clean(&r.note);
    r
}

/// Runs every (row, seed) instance in parallel; rows come back sorted by
/// spec row, then seed. Found factors are verified before being counted.
pub fn batch_report(rows: &[BatchRow]) -> BatchReport {
    let jobs: Vec<(usize, u64)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.seeds.clone().map(move |s| (i, s)))
        .collect();
    let mut out: Vec<ReportRow> = jobs
        .par_iter()
        .map(|&(i, seed)| run_instance(i, &rows[i], seed))
        .collect();
    out.sort_by_key(|r| (r.row, r.seed));
    BatchReport { rows: out }
}
