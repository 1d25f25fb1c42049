//! Transition systems for programs under standard and speculative semantics.
//!
//! Every system is functional: a state plus a valuation of the per-step
//! input variables determines the successor. Nondeterministic branch
//! direction and out-of-bounds load values are such inputs.

mod build;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ir::Label;
use crate::logic::{mask, Term, VarId};

pub use build::{encode_speculative, encode_speculative_with, encode_standard, encode_standard_with, fence_sites};
pub use trace::Trace;

pub const DEFAULT_STATE_BIT_BUDGET: usize = 4096;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("state needs {bits} bits, over the budget of {budget}")]
    Capacity { bits: usize, budget: usize },
    #[error("fence `{0}` is already active")]
    AlreadyActive(String),
    #[error("no fence site named `{0}`")]
    UnknownSite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecMode {
    Unbounded,
    Bounded(u32),
}

impl FromStr for SpecMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "unbounded" {
            return Ok(SpecMode::Unbounded);
        }
        match s.strip_prefix("bounded:").map(str::parse::<u32>) {
            Some(Ok(k)) if k >= 1 => Ok(SpecMode::Bounded(k)),
            _ => Err(format!("bad mode `{s}` (expected unbounded or bounded:<k> with k >= 1)")),
        }
    }
}

impl fmt::Display for SpecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecMode::Unbounded => f.write_str("unbounded"),
            SpecMode::Bounded(k) => write!(f, "bounded:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placement {
    EveryInst,
    AfterBranch,
    BeforeMemory,
}

impl FromStr for Placement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "every-inst" => Ok(Placement::EveryInst),
            "after-branch" => Ok(Placement::AfterBranch),
            "before-memory" => Ok(Placement::BeforeMemory),
            _ => Err(format!("unknown placement `{s}`")),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::EveryInst => "every-inst",
            Placement::AfterBranch => "after-branch",
            Placement::BeforeMemory => "before-memory",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SitePosition {
    Before,
    AfterBranchThen,
    AfterBranchElse,
}

/// A place where a fence may be activated. Edge sites sit on one outgoing
/// side of a conditional branch; `anchor` is that side's first instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FenceSite {
    pub id: String,
    pub anchor: Label,
    pub position: SitePosition,
    pub branch: Option<Label>,
}

impl FenceSite {
    pub fn before(l: Label) -> FenceSite {
        FenceSite { id: format!("before@{l}"), anchor: l, position: SitePosition::Before, branch: None }
    }

    pub fn then_side(branch: Label, target: Label) -> FenceSite {
        FenceSite {
            id: format!("then@{branch}"),
            anchor: target,
            position: SitePosition::AfterBranchThen,
            branch: Some(branch),
        }
    }

    pub fn else_side(branch: Label, target: Label) -> FenceSite {
        FenceSite {
            id: format!("else@{branch}"),
            anchor: target,
            position: SitePosition::AfterBranchElse,
            branch: Some(branch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    Data,
    Cell { array: String, index: u32 },
    Pc,
    Spec,
    Fence { site: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVar {
    pub name: String,
    pub kind: VarKind,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputVar {
    pub name: String,
    pub width: u32,
}

/// Updates apply when `guard` holds; variables not mentioned keep their value.
#[derive(Debug, Clone)]
pub struct GuardedUpdate {
    pub name: String,
    pub guard: Term,
    pub updates: Vec<(VarId, Term)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PcPoint {
    Inst(Label),
    Exit,
    Assertion(Label),
    Bottom,
    Unused,
}

impl fmt::Display for PcPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcPoint::Inst(l) => write!(f, "{l}"),
            PcPoint::Exit => f.write_str("exit"),
            PcPoint::Assertion(l) => write!(f, "a({l})"),
            PcPoint::Bottom => f.write_str("bad"),
            PcPoint::Unused => f.write_str("?"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcTable {
    pub width: u32,
    pub n_labels: u32,
    /// Assertion node code for each VInst label.
    pub assertion: BTreeMap<Label, u64>,
}

impl PcTable {
    pub fn bottom(&self) -> u64 {
        mask(self.width)
    }

    pub fn label_code(&self, l: Label) -> u64 {
        l.0 as u64
    }

    /// First code point executed on entering `l`.
    pub fn entry(&self, l: Label) -> u64 {
        self.assertion.get(&l).copied().unwrap_or(l.0 as u64)
    }

    pub fn decode(&self, code: u64) -> PcPoint {
        if code == self.bottom() {
            PcPoint::Bottom
        } else if code < self.n_labels as u64 {
            PcPoint::Inst(Label(code as u32))
        } else if code == self.n_labels as u64 {
            PcPoint::Exit
        } else {
            self.assertion
                .iter()
                .find(|(_, &c)| c == code)
                .map(|(l, _)| PcPoint::Assertion(*l))
                .unwrap_or(PcPoint::Unused)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub program: String,
    pub pc: PcTable,
    /// `None` for the standard semantics.
    pub mode: Option<SpecMode>,
    pub vinst: BTreeSet<Label>,
    pub sites: Vec<FenceSite>,
}

#[derive(Debug, Clone)]
pub struct TransitionSystem {
    /// State variables have ids `0..vars.len()`.
    pub vars: Vec<StateVar>,
    /// Input variables have ids `vars.len()..`.
    pub inputs: Vec<InputVar>,
    /// Initial constraint as fixed values; other variables start arbitrary.
    pub init: Vec<(VarId, u64)>,
    /// Exclusive and exhaustive.
    pub trans: Vec<GuardedUpdate>,
    pub bad: Term,
    pub meta: Meta,
    pub(crate) pc: VarId,
    pub(crate) spec: Option<VarId>,
}

impl TransitionSystem {
    pub fn name(&self) -> &str {
        &self.meta.program
    }

    pub fn state_bits(&self) -> usize {
        self.vars.iter().map(|v| v.width as usize).sum()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn input_id(&self, j: usize) -> VarId {
        VarId((self.vars.len() + j) as u32)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(|i| VarId(i as u32))
    }

    pub fn var_name(&self, id: VarId) -> String {
        let i = id.0 as usize;
        if i < self.vars.len() {
            self.vars[i].name.clone()
        } else {
            self.inputs[i - self.vars.len()].name.clone()
        }
    }

    pub fn width_of(&self, id: VarId) -> u32 {
        let i = id.0 as usize;
        if i < self.vars.len() {
            self.vars[i].width
        } else {
            self.inputs[i - self.vars.len()].width
        }
    }

    pub fn pc_var(&self) -> VarId {
        self.pc
    }

    pub fn spec_var(&self) -> Option<VarId> {
        self.spec
    }

    pub fn fence_var(&self, site: &str) -> Option<VarId> {
        self.vars
            .iter()
            .position(|v| matches!(&v.kind, VarKind::Fence { site: s } if s == site))
            .map(|i| VarId(i as u32))
    }

    pub fn site(&self, id: &str) -> Option<&FenceSite> {
        self.meta.sites.iter().find(|s| s.id == id)
    }

    /// Fence sites whose variable is initially true.
    pub fn active_fences(&self) -> BTreeSet<String> {
        self.meta
            .sites
            .iter()
            .filter(|s| {
                let v = self.fence_var(&s.id).unwrap();
                self.init.iter().any(|&(x, c)| x == v && c == 1)
            })
            .map(|s| s.id.clone())
            .collect()
    }

    pub fn init_formula(&self) -> Term {
        let eqs: Vec<Term> = self.init.iter().map(|&(v, c)| Term::var(v, self.width_of(v)).eq_const(c)).collect();
        Term::and_all(&eqs)
    }

    pub fn init_value(&self, v: VarId) -> Option<u64> {
        self.init.iter().find(|(x, _)| *x == v).map(|&(_, c)| c)
    }

    /// Next-state function of every state variable as one term.
    pub fn next_terms(&self) -> Vec<Term> {
        let mut next: Vec<Term> =
            (0..self.vars.len()).map(|i| Term::var(VarId(i as u32), self.vars[i].width)).collect();
        for gu in self.trans.iter().rev() {
            for (v, t) in &gu.updates {
                let i = v.0 as usize;
                next[i] = Term::ite(&gu.guard, t, &next[i]);
            }
        }
        next
    }

    pub fn is_init(&self, state: &[u64]) -> bool {
        self.init.iter().all(|&(v, c)| state[v.0 as usize] == c)
    }

    pub fn is_bad(&self, state: &[u64]) -> bool {
        let env: Vec<u64> = state.iter().copied().chain(std::iter::repeat_n(0, self.inputs.len())).collect();
        self.bad.eval(&env) == 1
    }

    /// Successor of `state` under the given input valuation.
    pub fn step(&self, state: &[u64], inputs: &[u64]) -> Vec<u64> {
        let env: Vec<u64> = state.iter().chain(inputs).copied().collect();
        let mut next = state.to_vec();
        let gu = self.trans.iter().find(|g| g.guard.eval(&env) == 1).expect("transition relation is total");
        for (v, t) in &gu.updates {
            next[v.0 as usize] = t.eval(&env);
        }
        next
    }

    pub fn pc_point(&self, state: &[u64]) -> PcPoint {
        self.meta.pc.decode(state[self.pc.0 as usize])
    }

    pub fn spec_value(&self, state: &[u64]) -> u64 {
        self.spec.map_or(0, |s| state[s.0 as usize])
    }

    /// Same system with the initial value of the fence at `site` set to true.
    pub fn add_fence(&self, site: &str) -> Result<TransitionSystem, EncodeError> {
        let v = self.fence_var(site).ok_or_else(|| EncodeError::UnknownSite(site.to_string()))?;
        let mut out = self.clone();
        let slot = out.init.iter_mut().find(|(x, _)| *x == v).expect("fence variables are initialised");
        if slot.1 == 1 {
            return Err(EncodeError::AlreadyActive(site.to_string()));
        }
        slot.1 = 1;
        Ok(out)
    }

    /// Render a term with this system's variable names.
    pub fn show(&self, t: &Term) -> String {
        let names = |v: VarId| self.var_name(v);
        let out = t.display(&names).to_string();
        out
    }

    /// Human-readable listing of variables, Init, guarded updates and Bad.
    pub fn describe(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "system {}", self.name());
        if let Some(m) = self.meta.mode {
            let _ = writeln!(s, "mode {m}");
        }
        for (i, v) in self.vars.iter().enumerate() {
            let init = self.init_value(VarId(i as u32)).map(|c| format!(" = {c}")).unwrap_or_default();
            let _ = writeln!(s, "state {} : u{}{init}", v.name, v.width);
        }
        for v in &self.inputs {
            let _ = writeln!(s, "input {} : u{}", v.name, v.width);
        }
        for (l, c) in &self.meta.pc.assertion {
            let _ = writeln!(s, "assertion node {l} = {c}");
        }
        let _ = writeln!(s, "pc bottom = {}", self.meta.pc.bottom());
        for t in &self.trans {
            let _ = writeln!(s, "{}: when {}", t.name, self.show(&t.guard));
            for (v, e) in &t.updates {
                let _ = writeln!(s, "    {}' := {}", self.var_name(*v), self.show(e));
            }
        }
        let _ = writeln!(s, "bad {}", self.show(&self.bad));
        s
    }
}
