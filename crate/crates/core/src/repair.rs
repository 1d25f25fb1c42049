//! Fence insertion driven by leaking executions found by the PDR engine.
//!
//! Each leak is analysed, one fence on its speculating suffix is activated,
//! and verification resumes, either keeping the frames that survive the
//! change or starting over.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::encode::{
    encode_speculative, fence_sites, EncodeError, FenceSite, PcPoint, Placement, SitePosition, SpecMode, Trace,
    TransitionSystem,
};
use crate::ir::{Label, Program};
use crate::pdr::{Engine, EngineOptions, Invariant, PdrError, Rule, RuleSink, Step};
use crate::threat::{compute_vinst_with, ThreatModel, VInstSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    /// The applicable fence closest to the bad state.
    Nearest,
    /// The first applicable fence after speculation starts.
    SplitPoint,
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(Activation::Nearest),
            "split-point" => Ok(Activation::SplitPoint),
            _ => Err(format!("unknown activation `{s}`")),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Nearest => "nearest",
            Activation::SplitPoint => "split-point",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RepairOptions {
    pub placement: Placement,
    pub activation: Activation,
    pub incremental: bool,
    pub mode: SpecMode,
    pub threat: ThreatModel,
    /// Leave stores out of the vulnerable set.
    pub loads_only: bool,
    pub seed: u64,
    /// Fences active from the start.
    pub fences: BTreeSet<String>,
    pub conflict_budget: Option<u64>,
    pub deadline: Option<Instant>,
    pub check_frames: bool,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            placement: Placement::AfterBranch,
            activation: Activation::Nearest,
            incremental: true,
            mode: SpecMode::Unbounded,
            threat: ThreatModel::Strong,
            loads_only: false,
            seed: 0,
            fences: BTreeSet::new(),
            conflict_budget: None,
            deadline: None,
            check_frames: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Pdr(#[from] PdrError),
    #[error("malformed leak trace: {0}")]
    MalformedTrace(String),
    #[error("no inactive fence site lies on the speculating part of the leak")]
    NoSiteCoversLeak,
    #[error("activating `{0}` does not rule out the leak")]
    TraceNotKilled(String),
    #[error("more repair iterations than fence sites")]
    NoProgress,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationStats {
    pub fence: String,
    pub trace_len: usize,
    pub split_point: usize,
    pub queries: u64,
    pub lemmas_kept: usize,
    pub lemmas_dropped: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    /// Activated sites in order.
    pub fences: Vec<String>,
    pub invariant: Invariant,
    pub iterations: usize,
    pub stats: Vec<IterationStats>,
    /// The repaired system, with every fence of `fences` active.
    pub system: TransitionSystem,
    pub vinst: VInstSet,
    pub sites: Vec<FenceSite>,
    /// Solver queries over the whole run.
    pub queries: u64,
    /// Every leaking execution found, in order.
    pub traces: Vec<Trace>,
}

impl RepairResult {
    pub fn lemmas_kept(&self) -> usize {
        self.stats.iter().map(|s| s.lemmas_kept).sum()
    }

    pub fn lemmas_dropped(&self) -> usize {
        self.stats.iter().map(|s| s.lemmas_dropped).sum()
    }
}

/// The unique index where `spec` becomes positive.
pub fn speculative_split_point(t: &Trace, ts: &TransitionSystem) -> Result<usize, RepairError> {
    t.split_point(ts).map_err(RepairError::MalformedTrace)
}

/// First transition from `from` on that `site`, if active, would stop.
fn blocking_step(t: &Trace, ts: &TransitionSystem, site: &FenceSite, from: usize) -> Option<usize> {
    (from..t.inputs.len()).find(|&i| blocks(t, ts, site, i))
}

fn blocks(t: &Trace, ts: &TransitionSystem, site: &FenceSite, i: usize) -> bool {
    let (cur, next) = (&t.states[i], &t.states[i + 1]);
    let point = ts.pc_point(cur);
    match site.position {
        SitePosition::Before => {
            let at = if ts.meta.vinst.contains(&site.anchor) {
                PcPoint::Assertion(site.anchor)
            } else {
                PcPoint::Inst(site.anchor)
            };
            point == at && ts.spec_value(cur) > 0
        }
        SitePosition::AfterBranchThen | SitePosition::AfterBranchElse => {
            let b = site.branch.expect("edge sites name their branch");
            if point != PcPoint::Inst(b) || ts.spec_value(next) == 0 {
                return false;
            }
            let taken = choice(t, ts, b, i);
            taken == (site.position == SitePosition::AfterBranchThen)
        }
    }
}

fn choice(t: &Trace, ts: &TransitionSystem, b: Label, i: usize) -> bool {
    let name = format!("choice@{b}");
    let j = ts.inputs.iter().position(|v| v.name == name).expect("speculative branches have a choice input");
    t.inputs[i][j] == 1
}

/// Pick an inactive fence site on the speculating suffix of `t`.
pub fn choose_fence(t: &Trace, ts: &TransitionSystem, activation: Activation) -> Result<String, RepairError> {
    let k = speculative_split_point(t, ts)?;
    let active = ts.active_fences();
    let mut hits: Vec<(usize, &FenceSite)> = ts
        .meta
        .sites
        .iter()
        .filter(|s| !active.contains(&s.id))
        .filter_map(|s| blocking_step(t, ts, s, k - 1).map(|i| (i, s)))
        .collect();
    hits.sort_by_key(|&(i, _)| i);
    let pick = match activation {
        Activation::Nearest => hits.last().map(|(_, s)| s),
        Activation::SplitPoint => hits.first().map(|(_, s)| s),
    };
    pick.map(|s| s.id.clone()).ok_or(RepairError::NoSiteCoversLeak)
}

fn engine_options(opts: &RepairOptions) -> EngineOptions {
    EngineOptions {
        seed: opts.seed,
        conflict_budget: opts.conflict_budget,
        deadline: opts.deadline,
        check_frames: opts.check_frames,
    }
}

pub fn repair(p: &Program, opts: &RepairOptions) -> Result<RepairResult, RepairError> {
    repair_logged(p, opts, None)
}

/// Alternate PDR steps and fence activations until the system is safe.
pub fn repair_logged(p: &Program, opts: &RepairOptions, sink: Option<RuleSink>) -> Result<RepairResult, RepairError> {
    let vinst = compute_vinst_with(p, opts.threat, opts.loads_only);
    let sites = fence_sites(p, &vinst, opts.placement);
    let mut ts = encode_speculative(p, &vinst, &sites, opts.mode, &opts.fences)?;
    let mut engine = Engine::new(&ts, engine_options(opts))?;
    engine.set_sink(sink);
    let mut fences = Vec::new();
    let mut stats = Vec::new();
    let mut traces = Vec::new();
    let mut spent = 0u64;
    let mut started = Instant::now();
    let mut mark = 0u64;
    loop {
        match engine.step()? {
            Step::Continue => {}
            Step::Safe => {
                let invariant = engine.invariant()?;
                return Ok(RepairResult {
                    iterations: fences.len(),
                    fences,
                    invariant,
                    stats,
                    system: ts,
                    vinst,
                    sites,
                    queries: spent + engine.stats().queries,
                    traces,
                });
            }
            Step::LeakFound(h) => {
                if fences.len() >= sites.len() {
                    return Err(RepairError::NoProgress);
                }
                let trace = engine.reconstruct(h)?;
                let k = speculative_split_point(&trace, &ts)?;
                let site = choose_fence(&trace, &ts, opts.activation)?;
                let next = ts.add_fence(&site)?;
                let limit = blocking_step(&trace, &ts, ts.site(&site).unwrap(), k - 1).unwrap();
                match trace.replay_divergence(&next) {
                    Some(d) if d <= limit => {}
                    _ => return Err(RepairError::TraceNotKilled(site)),
                }
                engine.fire(Rule::AddFence, engine.level(), 0);
                engine.reset_q();
                engine.reset_reach();
                let (kept, dropped) = if opts.incremental {
                    let r = engine.revalidate(&next)?;
                    (r.kept, r.dropped)
                } else {
                    spent += engine.stats().queries;
                    let sink = engine.take_sink();
                    engine = Engine::new(&next, engine_options(opts))?;
                    engine.set_sink(sink);
                    (0, 0)
                };
                let total = spent + engine.stats().queries;
                stats.push(IterationStats {
                    fence: site.clone(),
                    trace_len: trace.len(),
                    split_point: k,
                    queries: total - mark,
                    lemmas_kept: kept,
                    lemmas_dropped: dropped,
                    wall: started.elapsed(),
                });
                mark = total;
                started = Instant::now();
                fences.push(site);
                traces.push(trace);
                ts = next;
            }
        }
    }
}
