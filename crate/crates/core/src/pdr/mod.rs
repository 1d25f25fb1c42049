//! Property-directed reachability (IC3) over the bit-level view of a
//! transition system.
//!
//! The engine exposes its frames, obligation queue and set of reachable
//! states so that a repair loop can change the initial states and resume.

mod generalize;
mod invariant;
mod solver;
#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::encode::{Trace, TransitionSystem};
use crate::logic::{BitLit, BitSystem, Cube, ResourceError};

pub use generalize::generalize;
pub use invariant::{Invariant, StateBit};
use solver::{FrameSolver, Lifter, Query};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PdrError {
    #[error("an initial state is already bad")]
    RequireViolated,
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error("time limit reached")]
    Timeout,
    #[error("engine has not proven safety")]
    NotSafe,
    #[error("cube is not inductive relative to the given frame")]
    Precondition,
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Safe,
    Cex,
    Unfold,
    Candidate,
    Predecessor,
    NewLemma,
    ReQueue,
    Push,
    MaxIndSubset,
    Successor,
    ResetQ,
    ResetReach,
    AddFence,
}

impl Rule {
    pub const ALL: [Rule; 13] = [
        Rule::Safe,
        Rule::Cex,
        Rule::Unfold,
        Rule::Candidate,
        Rule::Predecessor,
        Rule::NewLemma,
        Rule::ReQueue,
        Rule::Push,
        Rule::MaxIndSubset,
        Rule::Successor,
        Rule::ResetQ,
        Rule::ResetReach,
        Rule::AddFence,
    ];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One rule application: rule, level, size of the cube involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleEvent {
    pub rule: Rule,
    pub level: usize,
    pub cube: usize,
}

impl fmt::Display for RuleEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.rule, self.level, self.cube)
    }
}

pub type RuleSink = Box<dyn FnMut(&RuleEvent) + Send>;

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    pub seed: u64,
    /// Conflicts per SAT call.
    pub conflict_budget: Option<u64>,
    pub deadline: Option<Instant>,
    /// Re-check the frame properties after every step.
    pub check_frames: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub queries: u64,
    pub rules: BTreeMap<Rule, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachHit {
    Init,
    State(usize),
}

/// Names the obligation whose cube met a reachable state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakHandle {
    pub obligation: usize,
    pub hit: ReachHit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Continue,
    Safe,
    LeakFound(LeakHandle),
}

#[derive(Debug, Clone)]
pub struct Obligation {
    pub cube: Cube,
    pub level: usize,
    /// The obligation this one is a predecessor of.
    pub parent: Option<usize>,
    /// Input values taking any state of `cube` into the parent's cube.
    pub inputs: Vec<u64>,
    key: u64,
}

/// A concrete reachable state, derived from `pred` under `inputs`; roots
/// are initial states.
#[derive(Debug, Clone)]
pub struct ReachState {
    pub bits: Vec<bool>,
    pub pred: Option<usize>,
    pub inputs: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Revalidation {
    pub kept: usize,
    pub dropped: usize,
}

pub struct Engine {
    ts: TransitionSystem,
    bits: BitSystem,
    init: Cube,
    n: usize,
    /// Lemmas (blocked cubes) by the highest level they hold at; index 0 unused.
    frames: Vec<Vec<Cube>>,
    inf: Vec<Cube>,
    solver: FrameSolver,
    lifter: Lifter,
    obligations: Vec<Obligation>,
    queue: BTreeSet<(usize, u64, usize)>,
    seq: u64,
    reach: Vec<ReachState>,
    check_safe: bool,
    safe: bool,
    opts: EngineOptions,
    stats: EngineStats,
    sink: Option<RuleSink>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine").field("level", &self.n).field("lemmas", &self.lemma_count()).finish()
    }
}

const GARBAGE_LIMIT: usize = 2000;

/// Fresh engine with F_0 = Init and every other frame true.
pub fn pdr_init(ts: &TransitionSystem) -> Result<Engine, PdrError> {
    Engine::new(ts, EngineOptions::default())
}

pub fn pdr_step(e: &mut Engine) -> Result<Step, PdrError> {
    e.step()
}

pub fn reconstruct_execution(e: &Engine, leak: LeakHandle) -> Result<Trace, PdrError> {
    e.reconstruct(leak)
}

pub fn extract_invariant(e: &Engine) -> Result<Invariant, PdrError> {
    e.invariant()
}

/// Outcome of running the engine to completion.
#[derive(Debug, Clone)]
pub enum Verdict {
    Safe(Invariant),
    Unsafe(Trace),
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe(_))
    }
}

/// Run to a verdict with default options.
pub fn verify(ts: &TransitionSystem) -> Result<Verdict, PdrError> {
    pdr_init(ts)?.run()
}

fn init_cube(bits: &BitSystem) -> Cube {
    let coi: BTreeSet<usize> = bits.coi.iter().copied().collect();
    bits.init_cube().retain(|l| coi.contains(&(l.latch as usize)))
}

impl Engine {
    pub fn new(ts: &TransitionSystem, opts: EngineOptions) -> Result<Engine, PdrError> {
        let bits = BitSystem::compile(ts);
        let init = init_cube(&bits);
        let solver = FrameSolver::new(&bits, &bits.coi, &init, opts.seed, opts.conflict_budget);
        let lifter = Lifter::new(&bits, opts.seed, opts.conflict_budget);
        let mut e = Engine {
            ts: ts.clone(),
            bits,
            init,
            n: 0,
            frames: vec![Vec::new()],
            inf: Vec::new(),
            solver,
            lifter,
            obligations: Vec::new(),
            queue: BTreeSet::new(),
            seq: 0,
            reach: Vec::new(),
            check_safe: true,
            safe: false,
            opts,
            stats: EngineStats::default(),
            sink: None,
        };
        e.require()?;
        Ok(e)
    }

    fn require(&mut self) -> Result<(), PdrError> {
        let f = self.solver.init_only();
        match self.solver.bad_state(&self.bits, &f, &mut self.stats.queries)? {
            Some(_) => Err(PdrError::RequireViolated),
            None => Ok(()),
        }
    }

    pub fn set_sink(&mut self, sink: Option<RuleSink>) {
        self.sink = sink;
    }

    pub fn take_sink(&mut self) -> Option<RuleSink> {
        self.sink.take()
    }

    pub fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    pub fn bits(&self) -> &BitSystem {
        &self.bits
    }

    pub fn level(&self) -> usize {
        self.n
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    /// Lemmas at exactly level `k` (delta representation).
    pub fn frame_delta(&self, k: usize) -> &[Cube] {
        &self.frames[k]
    }

    pub fn inf_lemmas(&self) -> &[Cube] {
        &self.inf
    }

    pub fn lemma_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum::<usize>() + self.inf.len()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn obligation(&self, id: usize) -> &Obligation {
        &self.obligations[id]
    }

    pub fn reach_states(&self) -> &[ReachState] {
        &self.reach
    }

    pub fn is_safe(&self) -> bool {
        self.safe
    }

    /// Record a rule application.
    pub fn fire(&mut self, rule: Rule, level: usize, cube: usize) {
        *self.stats.rules.entry(rule).or_default() += 1;
        if let Some(sink) = self.sink.as_mut() {
            sink(&RuleEvent { rule, level, cube });
        }
    }

    /// Step until a verdict; a leak is turned into a concrete trace.
    pub fn run(&mut self) -> Result<Verdict, PdrError> {
        loop {
            match self.step()? {
                Step::Continue => {}
                Step::Safe => return Ok(Verdict::Safe(self.invariant()?)),
                Step::LeakFound(h) => return Ok(Verdict::Unsafe(self.reconstruct(h)?)),
            }
        }
    }

    /// Apply the next rule chosen by the schedule.
    pub fn step(&mut self) -> Result<Step, PdrError> {
        if self.safe {
            return Ok(Step::Safe);
        }
        if self.opts.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(PdrError::Timeout);
        }
        let out = self.schedule()?;
        if self.opts.check_frames {
            self.check_frames()?;
        }
        self.collect_garbage();
        Ok(out)
    }

    fn schedule(&mut self) -> Result<Step, PdrError> {
        if self.check_safe {
            self.check_safe = false;
            let f = self.solver.inf_only();
            if self.solver.bad_state(&self.bits, &f, &mut self.stats.queries)?.is_none() {
                self.safe = true;
                self.fire(Rule::Safe, self.n, self.inf.len());
                return Ok(Step::Safe);
            }
        }
        if let Some(&(_, _, id)) = self.queue.first() {
            return self.discharge(id);
        }
        if self.n == 0 {
            self.unfold();
            return Ok(Step::Continue);
        }
        let f = self.solver.frame(self.n, self.n);
        match self.solver.bad_state(&self.bits, &f, &mut self.stats.queries)? {
            Some(s) => {
                let c = self.lifter.lift_bad(&s, &mut self.stats.queries)?;
                let len = c.len();
                self.enqueue(c, self.n, None, Vec::new());
                self.fire(Rule::Candidate, self.n, len);
            }
            None => {
                self.unfold();
                self.push_all()?;
            }
        }
        Ok(Step::Continue)
    }

    fn unfold(&mut self) {
        self.n += 1;
        self.frames.push(Vec::new());
        self.solver.ensure_level(self.n);
        self.fire(Rule::Unfold, self.n, 0);
    }

    fn enqueue(&mut self, cube: Cube, level: usize, parent: Option<usize>, inputs: Vec<u64>) -> usize {
        let id = self.obligations.len();
        self.seq += 1;
        self.obligations.push(Obligation { cube, level, parent, inputs, key: self.seq });
        self.queue.insert((level, self.seq, id));
        id
    }

    fn requeue(&mut self, id: usize, level: usize) {
        let ob = &mut self.obligations[id];
        self.queue.remove(&(ob.level, ob.key, id));
        self.seq += 1;
        ob.level = level;
        ob.key = self.seq;
        self.queue.insert((level, self.seq, id));
    }

    fn dequeue(&mut self, id: usize) {
        let ob = &self.obligations[id];
        self.queue.remove(&(ob.level, ob.key, id));
    }

    /// Where `cube` meets Reach, if anywhere.
    fn reach_hit(&self, cube: &Cube) -> Option<ReachHit> {
        if cube.intersects(&self.init) {
            return Some(ReachHit::Init);
        }
        self.reach.iter().position(|r| cube.contains_bits(&r.bits)).map(ReachHit::State)
    }

    /// Whether a concrete state (on the cone of influence) is in Reach.
    fn reach_member(&self, state: &[bool]) -> Option<ReachHit> {
        if self.init.contains_bits(state) {
            return Some(ReachHit::Init);
        }
        self.reach.iter().position(|r| self.bits.coi.iter().all(|&i| r.bits[i] == state[i])).map(ReachHit::State)
    }

    fn discharge(&mut self, id: usize) -> Result<Step, PdrError> {
        let cube = self.obligations[id].cube.clone();
        let j = self.obligations[id].level;
        if let Some(hit) = self.reach_hit(&cube) {
            self.fire(Rule::Cex, j, cube.len());
            return Ok(Step::LeakFound(LeakHandle { obligation: id, hit }));
        }
        if j == 0 {
            return Err(PdrError::Internal("obligation at level 0 outside Reach".into()));
        }
        let f = self.solver.frame(j - 1, self.n);
        match self.solver.rel_ind(&self.bits, &cube, &f, true, &mut self.stats.queries)? {
            Query::Sat { state, inputs } => {
                let words = self.bits.input_words(&inputs);
                if let Some(from) = self.reach_member(&state) {
                    let pred = match from {
                        ReachHit::Init => {
                            self.reach.push(ReachState { bits: state.clone(), pred: None, inputs: Vec::new() });
                            self.reach.len() - 1
                        }
                        ReachHit::State(i) => i,
                    };
                    let next = self.bits.step_bits(&state, &inputs);
                    self.reach.push(ReachState { bits: next, pred: Some(pred), inputs: words });
                    self.fire(Rule::Successor, j, cube.len());
                } else {
                    let m0 = self.lifter.lift_pred(&self.bits, &state, &inputs, &cube, &mut self.stats.queries)?;
                    let len = m0.len();
                    self.enqueue(m0, j - 1, Some(id), words);
                    self.fire(Rule::Predecessor, j - 1, len);
                }
            }
            Query::Unsat(core) => {
                self.dequeue(id);
                let c = self.exclude_reach(core, &cube);
                let c = self.generalize_at(c, j - 1)?;
                let mut k = j;
                while k < self.n {
                    let f = self.solver.frame(k, self.n);
                    match self.solver.rel_ind(&self.bits, &c, &f, true, &mut self.stats.queries)? {
                        Query::Unsat(_) => k += 1,
                        Query::Sat { .. } => break,
                    }
                }
                let len = c.len();
                self.add_lemma(c, k);
                self.fire(Rule::NewLemma, k, len);
                if k < self.n {
                    self.requeue(id, k + 1);
                    self.fire(Rule::ReQueue, k + 1, cube.len());
                }
            }
        }
        Ok(Step::Continue)
    }

    /// Extend `c ⊆ m` with literals of `m` until it avoids Init and every
    /// concrete Reach state. `m` itself avoids both.
    fn exclude_reach(&self, c: Cube, m: &Cube) -> Cube {
        let mut lits: Vec<BitLit> = c.lits().to_vec();
        let mut c = c;
        if c.intersects(&self.init) {
            let l = *m
                .lits()
                .iter()
                .find(|l| self.init.lits().iter().any(|i| i.latch == l.latch && i.value != l.value))
                .expect("obligation cube avoids Init");
            lits.push(l);
            c = Cube::new(lits.clone());
        }
        for r in &self.reach {
            if c.contains_bits(&r.bits) {
                let l = *m
                    .lits()
                    .iter()
                    .find(|l| r.bits[l.latch as usize] != l.value)
                    .expect("obligation cube avoids Reach");
                lits.push(l);
                c = Cube::new(lits.clone());
            }
        }
        c
    }

    /// Drop literals of `c` while its negation stays inductive relative to
    /// F_`level`, disjoint from Init and from concrete Reach states.
    fn generalize_at(&mut self, c: Cube, level: usize) -> Result<Cube, PdrError> {
        generalize::drop_literals(c, |d| {
            if d.is_empty() || d.intersects(&self.init) || self.reach.iter().any(|r| d.contains_bits(&r.bits)) {
                return Ok(None);
            }
            let f = self.solver.frame(level, self.n);
            match self.solver.rel_ind(&self.bits, d, &f, true, &mut self.stats.queries)? {
                Query::Unsat(core) => Ok(Some(self.exclude_reach(core, d))),
                Query::Sat { .. } => Ok(None),
            }
        })
    }

    /// Add the lemma blocking `c` at level `k`, removing weaker lemmas.
    fn add_lemma(&mut self, c: Cube, k: usize) {
        if self.inf.iter().any(|o| c.subsumed_by(o)) || self.frames[k..].iter().flatten().any(|o| c.subsumed_by(o)) {
            return;
        }
        for f in &mut self.frames[1..=k] {
            f.retain(|o| !o.subsumed_by(&c));
        }
        self.solver.add_lemma(&c, Some(k));
        self.frames[k].push(c);
    }

    /// Push every lemma as far as it goes; detect an inductive frame.
    fn push_all(&mut self) -> Result<(), PdrError> {
        for k in 1..self.n {
            let lemmas = self.frames[k].clone();
            for c in lemmas {
                if !self.frames[k].contains(&c) || self.reach.iter().any(|r| c.contains_bits(&r.bits)) {
                    continue;
                }
                let f = self.solver.frame(k, self.n);
                if let Query::Unsat(_) = self.solver.rel_ind(&self.bits, &c, &f, false, &mut self.stats.queries)? {
                    self.frames[k].retain(|o| *o != c);
                    let len = c.len();
                    self.add_lemma(c, k + 1);
                    self.fire(Rule::Push, k + 1, len);
                }
            }
            if self.frames[k].is_empty() {
                let moved: Vec<Cube> = self.frames[k + 1..].iter_mut().flat_map(std::mem::take).collect();
                for c in &moved {
                    self.solver.add_lemma(c, None);
                }
                self.fire(Rule::MaxIndSubset, k, moved.len());
                self.inf.extend(moved);
                self.check_safe = true;
                break;
            }
        }
        Ok(())
    }

    fn collect_garbage(&mut self) {
        if self.solver.garbage > GARBAGE_LIMIT {
            self.rebuild_solver();
        }
        if self.lifter.garbage > GARBAGE_LIMIT {
            self.lifter = Lifter::new(&self.bits, self.opts.seed, self.opts.conflict_budget);
        }
    }

    fn rebuild_solver(&mut self) {
        let mut s = FrameSolver::new(&self.bits, &self.bits.coi, &self.init, self.opts.seed, self.opts.conflict_budget);
        s.ensure_level(self.n);
        for (k, f) in self.frames.iter().enumerate().skip(1) {
            for c in f {
                s.add_lemma(c, Some(k));
            }
        }
        for c in &self.inf {
            s.add_lemma(c, None);
        }
        self.solver = s;
    }

    pub fn invariant(&self) -> Result<Invariant, PdrError> {
        if !self.safe {
            return Err(PdrError::NotSafe);
        }
        Ok(Invariant::from_cubes(&self.bits, &self.inf))
    }

    /// Full-width state from latch bits; bits outside the cone take their
    /// initial value or zero.
    fn word_state(&self, bits: &[bool]) -> Vec<u64> {
        let mut in_coi = vec![false; self.bits.latches.len()];
        for &i in &self.bits.coi {
            in_coi[i] = true;
        }
        let mut out = vec![0u64; self.ts.vars.len()];
        for (i, l) in self.bits.latches.iter().enumerate() {
            let b = if in_coi[i] { bits[i] } else { l.init.unwrap_or(false) };
            out[l.var.0 as usize] |= (b as u64) << l.bit;
        }
        out
    }

    /// Concrete execution from Init through the leaking obligation chain to
    /// a bad state, checked against the transition relation.
    pub fn reconstruct(&self, leak: LeakHandle) -> Result<Trace, PdrError> {
        let mut states: Vec<Vec<u64>>;
        let mut inputs: Vec<Vec<u64>> = Vec::new();
        match leak.hit {
            ReachHit::Init => {
                let mut bits = vec![false; self.bits.latches.len()];
                for l in self.init.lits().iter().chain(self.obligations[leak.obligation].cube.lits()) {
                    bits[l.latch as usize] = l.value;
                }
                states = vec![self.word_state(&bits)];
            }
            ReachHit::State(r) => {
                let mut chain = vec![r];
                while let Some(p) = self.reach[*chain.last().unwrap()].pred {
                    chain.push(p);
                }
                chain.reverse();
                states = vec![self.word_state(&self.reach[chain[0]].bits)];
                for &i in &chain[1..] {
                    let inp = self.reach[i].inputs.clone();
                    states.push(self.ts.step(states.last().unwrap(), &inp));
                    inputs.push(inp);
                }
            }
        }
        let mut cur = leak.obligation;
        while let Some(p) = self.obligations[cur].parent {
            let inp = self.obligations[cur].inputs.clone();
            states.push(self.ts.step(states.last().unwrap(), &inp));
            inputs.push(inp);
            cur = p;
        }
        let trace = Trace { states, inputs };
        trace
            .check_counterexample(&self.ts)
            .map_err(|e| PdrError::Internal(format!("reconstructed trace is invalid: {e}")))?;
        Ok(trace)
    }

    /// Q ← ∅.
    pub fn reset_q(&mut self) {
        self.queue.clear();
        self.obligations.clear();
        self.fire(Rule::ResetQ, self.n, 0);
    }

    /// Reach ← Init.
    pub fn reset_reach(&mut self) {
        self.reach.clear();
        self.fire(Rule::ResetReach, self.n, 0);
    }

    /// Switch to `ts`, which must differ from the current system only in its
    /// initial states, keeping every lemma that still holds. A lemma is
    /// re-admitted level by level: at level 1 it must exclude the new Init
    /// and all its successors, at level j the successors of the re-admitted
    /// F_{j-1}. Lemmas failing at level j end at j-1; at level 1 they go.
    pub fn revalidate(&mut self, ts: &TransitionSystem) -> Result<Revalidation, PdrError> {
        let before = self.lemma_count();
        let bits = BitSystem::compile(ts);
        if bits.coi != self.bits.coi || bits.latches.len() != self.bits.latches.len() {
            return Err(PdrError::Internal("revalidation needs an identical transition relation".into()));
        }
        let init = init_cube(&bits);
        let n = self.n;
        let keep_inf = self.inf.iter().all(|c| !c.intersects(&init));
        let mut candidates: Vec<(Cube, usize)> = Vec::new();
        for (k, f) in self.frames.iter().enumerate().skip(1) {
            candidates.extend(f.iter().map(|c| (c.clone(), k)));
        }
        let inf = if keep_inf {
            std::mem::take(&mut self.inf)
        } else {
            candidates.extend(self.inf.drain(..).map(|c| (c, n)));
            Vec::new()
        };
        candidates.retain(|(c, _)| !c.intersects(&init));

        let mut check = FrameSolver::new(&bits, &bits.coi, &init, self.opts.seed, self.opts.conflict_budget);
        check.ensure_level(n);
        for c in &inf {
            check.add_lemma(c, None);
        }
        let mut frames: Vec<Vec<Cube>> = vec![Vec::new(); n + 1];
        let mut alive: Vec<(Cube, usize)> = candidates;
        for j in 1..=n {
            let f = check.frame(j - 1, n);
            let mut passed = Vec::new();
            for (c, old) in alive {
                if let Query::Unsat(_) = check.rel_ind(&bits, &c, &f, false, &mut self.stats.queries)? {
                    passed.push((c, old));
                } else if j > 1 {
                    frames[j - 1].push(c);
                }
            }
            for (c, _) in &passed {
                check.add_lemma(c, Some(j));
            }
            let (stay, go): (Vec<_>, Vec<_>) = passed.into_iter().partition(|(_, old)| *old == j);
            frames[j].extend(stay.into_iter().map(|(c, _)| c));
            alive = go;
        }

        self.ts = ts.clone();
        self.bits = bits;
        self.init = init;
        self.frames = frames;
        self.inf = inf;
        self.safe = false;
        self.check_safe = !self.inf.is_empty();
        self.rebuild_solver();
        self.lifter = Lifter::new(&self.bits, self.opts.seed, self.opts.conflict_budget);
        self.require()?;

        // Levels below N must exclude Bad.
        for j in 1..self.n {
            let f = self.solver.frame(j, self.n);
            if self.solver.bad_state(&self.bits, &f, &mut self.stats.queries)?.is_some() {
                let above: Vec<Cube> = self.frames[j + 1..].iter_mut().flat_map(std::mem::take).collect();
                self.frames.truncate(j + 1);
                self.frames[j].extend(above);
                self.n = j;
                self.rebuild_solver();
                break;
            }
        }
        let kept = self.lemma_count();
        Ok(Revalidation { kept, dropped: before - kept })
    }

    /// The four frame properties, decided by a fresh solver.
    pub fn check_frames(&self) -> Result<(), PdrError> {
        let fail = |what: String| Err(PdrError::Internal(format!("frame property violated: {what}")));
        let mut q = 0u64;
        let all: Vec<&Cube> = self.frames.iter().flatten().chain(&self.inf).collect();
        if let Some(c) = all.iter().find(|c| c.intersects(&self.init)) {
            return fail(format!("lemma {c} excludes an initial state"));
        }
        let mut s = FrameSolver::new(&self.bits, &self.bits.coi, &self.init, self.opts.seed.wrapping_add(1), None);
        s.ensure_level(self.n);
        for (k, f) in self.frames.iter().enumerate().skip(1) {
            for c in f {
                s.add_lemma(c, Some(k));
            }
        }
        for c in &self.inf {
            s.add_lemma(c, None);
        }
        for j in 0..self.n {
            let f = if j == 0 { s.init_only() } else { s.frame(j, self.n) };
            if s.bad_state(&self.bits, &f, &mut q)?.is_some() {
                return fail(format!("F_{j} meets Bad"));
            }
            let above = self.frames[j + 1..].iter().flatten().chain(&self.inf);
            for c in above {
                if let Query::Sat { .. } = s.rel_ind(&self.bits, c, &f, false, &mut q)? {
                    return fail(format!("F_{j} has a successor in blocked cube {c}"));
                }
            }
        }
        for c in &self.inf {
            if let Query::Sat { .. } = s.rel_ind(&self.bits, c, &s.inf_only(), false, &mut q)? {
                return fail(format!("F_inf is not inductive for {c}"));
            }
        }
        Ok(())
    }
}
