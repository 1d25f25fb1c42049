//! Corpus sweep: every program under every configuration, one CSV row each.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::certificate::{check_certificate, export_certificate_noted, minimize_invariant, Oracle};
use crate::encode::{Placement, SpecMode};
use crate::ir::{parse_program, Program};
use crate::pdr::PdrError;
use crate::repair::{repair, Activation, RepairError, RepairOptions, RepairResult};
use crate::threat::ThreatModel;

pub const CSV_HEADER: &str =
    "benchmark,ni,nb,nm,placement,incremental,mode,nf,time_ms,verdict,lemmas_kept,lemmas_dropped";

/// Window used for the bounded configurations unless overridden.
pub const DEFAULT_BOUND: u32 = 8;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Config {
    pub placement: Placement,
    pub activation: Activation,
    pub incremental: bool,
    pub mode: SpecMode,
}

impl Config {
    pub fn baseline() -> Config {
        Config {
            placement: Placement::EveryInst,
            activation: Activation::SplitPoint,
            incremental: false,
            mode: SpecMode::Unbounded,
        }
    }

    /// Short stable name, used for certificate files.
    pub fn slug(&self) -> String {
        format!(
            "{}.{}.{}.{}",
            self.placement,
            self.activation,
            if self.incremental { "inc" } else { "noninc" },
            self.mode.to_string().replace(':', "")
        )
    }
}

/// The baseline, then {after-branch, before-memory} x {on, off} x
/// {unbounded, bounded:k}.
pub fn configurations(bound: u32) -> Vec<Config> {
    let mut out = vec![Config::baseline()];
    for placement in [Placement::AfterBranch, Placement::BeforeMemory] {
        for incremental in [true, false] {
            for mode in [SpecMode::Unbounded, SpecMode::Bounded(bound)] {
                out.push(Config { placement, activation: Activation::Nearest, incremental, mode });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowVerdict {
    SafeAfterRepair,
    SafeUnmodified,
    Timeout,
    Resource,
    Error,
}

impl RowVerdict {
    pub fn is_safe(self) -> bool {
        matches!(self, RowVerdict::SafeAfterRepair | RowVerdict::SafeUnmodified)
    }
}

impl fmt::Display for RowVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowVerdict::SafeAfterRepair => "SAFE-after-repair",
            RowVerdict::SafeUnmodified => "SAFE-unmodified",
            RowVerdict::Timeout => "TIMEOUT",
            RowVerdict::Resource => "RESOURCE",
            RowVerdict::Error => "ERROR",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub benchmark: String,
    pub ni: usize,
    pub nb: usize,
    pub nm: usize,
    pub config: Config,
    pub nf: usize,
    pub time_ms: u128,
    pub verdict: RowVerdict,
    pub lemmas_kept: usize,
    pub lemmas_dropped: usize,
    // not in the CSV
    pub sites: usize,
    pub fences: Vec<String>,
    pub queries: u64,
    pub certificate: Option<String>,
    pub certificate_ok: bool,
    pub error: Option<String>,
}

impl BenchRow {
    pub fn csv(&self, timing: bool) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.benchmark,
            self.ni,
            self.nb,
            self.nm,
            self.config.placement,
            if self.config.incremental { "on" } else { "off" },
            self.config.mode,
            self.nf,
            if timing { self.time_ms } else { 0 },
            self.verdict,
            self.lemmas_kept,
            self.lemmas_dropped
        )
    }
}

pub fn to_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv(timing));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub threat: ThreatModel,
    pub loads_only: bool,
    pub seed: u64,
    pub bound: u32,
    pub timeout: Duration,
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            threat: ThreatModel::Strong,
            loads_only: false,
            seed: 0,
            bound: DEFAULT_BOUND,
            timeout: DEFAULT_TIMEOUT,
            parallel: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {msg}")]
    Load { path: PathBuf, msg: String },
    #[error("no .sir files in {0}")]
    Empty(PathBuf),
}

/// Programs in `dir`, named by file stem, in file name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, Program)>, CorpusError> {
    let load = |path: &Path, e: &dyn fmt::Display| CorpusError::Load { path: path.to_path_buf(), msg: e.to_string() };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| load(dir, &e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sir"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CorpusError::Empty(dir.to_path_buf()));
    }
    files
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|e| load(&path, &e))?;
            let p = parse_program(&text).map_err(|e| load(&path, &e))?;
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            Ok((stem, p))
        })
        .collect()
}

pub fn repair_options(cfg: &Config, opts: &BenchOptions) -> RepairOptions {
    RepairOptions {
        placement: cfg.placement,
        activation: cfg.activation,
        incremental: cfg.incremental,
        mode: cfg.mode,
        threat: opts.threat,
        loads_only: opts.loads_only,
        seed: opts.seed,
        deadline: Some(Instant::now() + opts.timeout),
        ..Default::default()
    }
}

/// Header lines recorded in every certificate.
pub fn certificate_notes(opts: &RepairOptions) -> Vec<String> {
    let mut n = vec![format!("threat {}", opts.threat)];
    if opts.loads_only {
        n.push("loads-only".into());
    }
    n.extend([
        format!("placement {}", opts.placement),
        format!("activation {}", opts.activation),
        format!("incremental {}", if opts.incremental { "on" } else { "off" }),
        format!("seed {}", opts.seed),
    ]);
    n
}

/// Certificate for a finished repair, with redundant lemmas dropped, and
/// whether it checks.
pub fn certify(r: &RepairResult, opts: &RepairOptions) -> (String, bool) {
    let inv = minimize_invariant(&r.system, &r.invariant);
    let text = export_certificate_noted(&r.system, &inv, &certificate_notes(opts));
    let ok = check_certificate(&text, &Oracle::Internal).is_ok_and(|v| v.passed());
    (text, ok)
}

pub fn run_row(name: &str, p: &Program, cfg: &Config, opts: &BenchOptions) -> BenchRow {
    let ro = repair_options(cfg, opts);
    let start = Instant::now();
    let result = repair(p, &ro);
    let mut row = BenchRow {
        benchmark: name.to_string(),
        ni: p.insts.len(),
        nb: p.conditional_instructions().len(),
        nm: p.memory_instructions().len(),
        config: *cfg,
        nf: 0,
        time_ms: 0,
        verdict: RowVerdict::Error,
        lemmas_kept: 0,
        lemmas_dropped: 0,
        sites: 0,
        fences: Vec::new(),
        queries: 0,
        certificate: None,
        certificate_ok: false,
        error: None,
    };
    match result {
        Ok(r) => {
            let (cert, ok) = certify(&r, &ro);
            row.time_ms = start.elapsed().as_millis();
            row.nf = r.fences.len();
            row.verdict = if r.fences.is_empty() { RowVerdict::SafeUnmodified } else { RowVerdict::SafeAfterRepair };
            row.lemmas_kept = r.lemmas_kept();
            row.lemmas_dropped = r.lemmas_dropped();
            row.sites = r.sites.len();
            row.queries = r.queries;
            row.fences = r.fences;
            row.certificate = Some(cert);
            row.certificate_ok = ok;
        }
        Err(e) => {
            row.time_ms = start.elapsed().as_millis();
            row.verdict = match e {
                RepairError::Pdr(PdrError::Timeout) => RowVerdict::Timeout,
                RepairError::Pdr(PdrError::Resource(_)) => RowVerdict::Resource,
                _ => RowVerdict::Error,
            };
            row.error = Some(e.to_string());
        }
    }
    row
}

/// One row per (program, configuration), program-major, in input order.
pub fn run_bench(corpus: &[(String, Program)], opts: &BenchOptions) -> Vec<BenchRow> {
    let configs = configurations(opts.bound);
    let jobs: Vec<(&str, &Program, &Config)> =
        corpus.iter().flat_map(|(n, p)| configs.iter().map(move |c| (n.as_str(), p, c))).collect();
    let run = |&(n, p, c): &(&str, &Program, &Config)| run_row(n, p, c, opts);
    if opts.parallel {
        par_map(&jobs, run)
    } else {
        jobs.iter().map(run).collect()
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(xs: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    xs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R>(xs: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    xs.iter().map(f).collect()
}

/// Write each row's certificate as `<benchmark>.<config>.cert.smt2`.
pub fn write_certificates(rows: &[BenchRow], dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for r in rows {
        if let Some(c) = &r.certificate {
            let file = format!("{}.{}{}", r.benchmark, r.config.slug(), crate::certificate::EXTENSION);
            fs::write(dir.join(file), c)?;
        }
    }
    Ok(())
}
