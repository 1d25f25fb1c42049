use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::ir::{index_width, natural_width, BinOp, Expr, Instruction, Program};
use crate::logic::Op;
use crate::threat::VInstSet;

/// Fence sites for a placement strategy.
pub fn fence_sites(p: &Program, vinst: &VInstSet, placement: Placement) -> Vec<FenceSite> {
    match placement {
        Placement::EveryInst => p
            .labels()
            .filter(|l| {
                !matches!(p.insts[l.index()], Instruction::Halt | Instruction::Assume(_) | Instruction::Assert(_))
            })
            .map(FenceSite::before)
            .collect(),
        Placement::AfterBranch => p
            .labels()
            .filter_map(|l| match &p.insts[l.index()] {
                Instruction::CondBranch { then_target, else_target, .. } => {
                    Some([FenceSite::then_side(l, *then_target), FenceSite::else_side(l, *else_target)])
                }
                _ => None,
            })
            .flatten()
            .collect(),
        Placement::BeforeMemory => vinst.labels.iter().map(|&l| FenceSite::before(l)).collect(),
    }
}

pub fn encode_standard(p: &Program) -> Result<TransitionSystem, EncodeError> {
    encode_standard_with(p, DEFAULT_STATE_BIT_BUDGET)
}

pub fn encode_standard_with(p: &Program, budget: usize) -> Result<TransitionSystem, EncodeError> {
    Builder::new(p, None, budget)?.finish()
}

pub fn encode_speculative(
    p: &Program,
    vinst: &VInstSet,
    sites: &[FenceSite],
    mode: SpecMode,
    active: &BTreeSet<String>,
) -> Result<TransitionSystem, EncodeError> {
    encode_speculative_with(p, vinst, sites, mode, active, DEFAULT_STATE_BIT_BUDGET)
}

pub fn encode_speculative_with(
    p: &Program,
    vinst: &VInstSet,
    sites: &[FenceSite],
    mode: SpecMode,
    active: &BTreeSet<String>,
    budget: usize,
) -> Result<TransitionSystem, EncodeError> {
    let mut seen = BTreeSet::new();
    for s in sites {
        assert!(seen.insert(s.id.as_str()), "duplicate fence site `{}`", s.id);
    }
    if let Some(bad) = active.iter().find(|a| !seen.contains(a.as_str())) {
        return Err(EncodeError::UnknownSite(bad.clone()));
    }
    let spec = Speculation { vinst: vinst.labels.clone(), sites: sites.to_vec(), mode, active: active.clone() };
    Builder::new(p, Some(spec), budget)?.finish()
}

struct Speculation {
    vinst: BTreeSet<Label>,
    sites: Vec<FenceSite>,
    mode: SpecMode,
    active: BTreeSet<String>,
}

struct Builder<'p> {
    p: &'p Program,
    spec_cfg: Option<Speculation>,
    vars: Vec<StateVar>,
    inputs: Vec<InputVar>,
    scalars: BTreeMap<String, VarId>,
    cells: BTreeMap<String, Vec<VarId>>,
    fences: BTreeMap<String, VarId>,
    choice: BTreeMap<Label, VarId>,
    oob: BTreeMap<Label, VarId>,
    pc: VarId,
    spec: Option<VarId>,
    table: PcTable,
}

fn min_pc_width(max_code: u64) -> u32 {
    (1..=64).find(|&w| mask(w) > max_code).expect("pc code space fits in 64 bits")
}

fn spec_width(mode: SpecMode) -> u32 {
    match mode {
        SpecMode::Unbounded => 1,
        SpecMode::Bounded(k) => 64 - (k as u64).leading_zeros(),
    }
}

impl<'p> Builder<'p> {
    fn new(p: &'p Program, spec_cfg: Option<Speculation>, budget: usize) -> Result<Self, EncodeError> {
        let n = p.insts.len() as u32;
        let mut assertion = BTreeMap::new();
        if let Some(s) = &spec_cfg {
            for (j, l) in s.vinst.iter().enumerate() {
                assertion.insert(*l, (n + 1 + j as u32) as u64);
            }
        }
        let max_code = n as u64 + assertion.len() as u64;
        let table = PcTable { width: min_pc_width(max_code), n_labels: n, assertion };

        let mut vars = Vec::new();
        let mut scalars = BTreeMap::new();
        for v in &p.vars {
            scalars.insert(v.name.clone(), VarId(vars.len() as u32));
            vars.push(StateVar { name: v.name.clone(), kind: VarKind::Data, width: v.width });
        }
        let mut cells = BTreeMap::new();
        for a in &p.arrays {
            let ids = (0..a.len)
                .map(|j| {
                    vars.push(StateVar {
                        name: format!("{}[{j}]", a.name),
                        kind: VarKind::Cell { array: a.name.clone(), index: j },
                        width: a.elem_width,
                    });
                    VarId(vars.len() as u32 - 1)
                })
                .collect();
            cells.insert(a.name.clone(), ids);
        }
        let pc = VarId(vars.len() as u32);
        vars.push(StateVar { name: "pc".into(), kind: VarKind::Pc, width: table.width });
        let mut spec = None;
        let mut fences = BTreeMap::new();
        if let Some(s) = &spec_cfg {
            spec = Some(VarId(vars.len() as u32));
            vars.push(StateVar { name: "spec".into(), kind: VarKind::Spec, width: spec_width(s.mode) });
            for site in &s.sites {
                fences.insert(site.id.clone(), VarId(vars.len() as u32));
                vars.push(StateVar {
                    name: format!("fence[{}]", site.id),
                    kind: VarKind::Fence { site: site.id.clone() },
                    width: 1,
                });
            }
        }
        let bits: usize = vars.iter().map(|v| v.width as usize).sum();
        if bits > budget {
            return Err(EncodeError::Capacity { bits, budget });
        }

        let mut inputs = Vec::new();
        let mut choice = BTreeMap::new();
        let mut oob = BTreeMap::new();
        let base = vars.len();
        for l in p.labels() {
            match &p.insts[l.index()] {
                Instruction::CondBranch { .. } if spec_cfg.is_some() => {
                    choice.insert(l, VarId((base + inputs.len()) as u32));
                    inputs.push(InputVar { name: format!("choice@{l}"), width: 1 });
                }
                Instruction::Load { array, index, .. } => {
                    let arr = p.array(array).unwrap();
                    let iw = index_width(p, arr, index);
                    if iw >= 64 || (1u64 << iw) > arr.len as u64 {
                        oob.insert(l, VarId((base + inputs.len()) as u32));
                        inputs.push(InputVar { name: format!("oob@{l}"), width: arr.elem_width });
                    }
                }
                _ => {}
            }
        }

        Ok(Builder { p, spec_cfg, vars, inputs, scalars, cells, fences, choice, oob, pc, spec, table })
    }

    fn scalar(&self, name: &str) -> Term {
        let id = self.scalars[name];
        Term::var(id, self.vars[id.0 as usize].width)
    }

    fn expr(&self, e: &Expr, w: u32) -> Term {
        match e {
            Expr::Var(v) => self.scalar(v),
            Expr::Const(c) => Term::constant(*c, w),
            Expr::Not(a) => self.expr(a, w).not(),
            Expr::Bin(op, a, b) => {
                let ow = if op.is_comparison() {
                    natural_width(self.p, a).or_else(|| natural_width(self.p, b)).expect("validated")
                } else {
                    w
                };
                let (x, y) = (self.expr(a, ow), self.expr(b, ow));
                let op = match op {
                    BinOp::Add => Op::Add,
                    BinOp::Sub => Op::Sub,
                    BinOp::Mul => Op::Mul,
                    BinOp::And => Op::And,
                    BinOp::Or => Op::Or,
                    BinOp::Xor => Op::Xor,
                    BinOp::Eq => Op::Eq,
                    BinOp::Ult => Op::Ult,
                    BinOp::Ule => Op::Ule,
                };
                Term::bin(op, &x, &y)
            }
            Expr::Ite(c, a, b) => Term::ite(&self.expr(c, 1), &self.expr(a, w), &self.expr(b, w)),
            Expr::Zext(t, a) => self.expr(a, natural_width(self.p, a).expect("validated")).zext(*t),
            Expr::Trunc(t, a) => self.expr(a, natural_width(self.p, a).expect("validated")).trunc(*t),
        }
    }

    fn index(&self, array: &str, e: &Expr) -> Term {
        let arr = self.p.array(array).unwrap();
        self.expr(e, index_width(self.p, arr, e))
    }

    /// Cells an index of this width can address.
    fn addressable(&self, array: &str, idx: &Term) -> usize {
        let len = self.cells[array].len();
        if idx.width() >= 64 {
            len
        } else {
            len.min(1usize << idx.width())
        }
    }

    fn load(&self, l: Label, array: &str, idx: &Term) -> Term {
        let cells = &self.cells[array];
        let w = self.vars[cells[0].0 as usize].width;
        let reach = self.addressable(array, idx);
        let cell = |j: usize| Term::var(cells[j], w);
        let (mut acc, upto) = match self.oob.get(&l) {
            Some(&v) => (Term::var(v, w), reach),
            None => (cell(reach - 1), reach - 1),
        };
        for j in (0..upto).rev() {
            acc = Term::ite(&idx.eq_const(j as u64), &cell(j), &acc);
        }
        acc
    }

    fn store(&self, array: &str, idx: &Term, value: &Term) -> Vec<(VarId, Term)> {
        let cells = &self.cells[array];
        let reach = self.addressable(array, idx);
        (0..reach)
            .map(|j| {
                let old = Term::var(cells[j], value.width());
                (cells[j], Term::ite(&idx.eq_const(j as u64), value, &old))
            })
            .collect()
    }

    fn pc_term(&self) -> Term {
        Term::var(self.pc, self.table.width)
    }

    fn pc_const(&self, code: u64) -> Term {
        Term::constant(code, self.table.width)
    }

    fn at(&self, code: u64) -> Term {
        self.pc_term().eq_const(code)
    }

    fn spec_term(&self) -> Option<Term> {
        self.spec.map(|s| Term::var(s, self.vars[s.0 as usize].width))
    }

    fn speculating(&self) -> Term {
        match self.spec_term() {
            Some(s) => s.eq_const(0).not(),
            None => Term::ff(),
        }
    }

    /// Successor value of spec when the step keeps speculating or starts to.
    fn spec_inc(&self) -> Term {
        let s = self.spec_term().unwrap();
        match self.spec_cfg.as_ref().unwrap().mode {
            SpecMode::Unbounded => Term::constant(1, 1),
            SpecMode::Bounded(_) => s.add(&Term::constant(1, s.width())),
        }
    }

    fn fence(&self, site: &str) -> Term {
        Term::var(self.fences[site], 1)
    }

    fn site_at(&self, l: Label, pos: SitePosition) -> Option<&FenceSite> {
        self.spec_cfg.as_ref()?.sites.iter().find(|s| {
            s.position == pos
                && match pos {
                    SitePosition::Before => s.anchor == l,
                    _ => s.branch == Some(l),
                }
        })
    }

    /// The condition under which a Before-fence at `l` blocks the step.
    fn before_fence_blocks(&self, l: Label) -> Term {
        match self.site_at(l, SitePosition::Before) {
            Some(s) => self.fence(&s.id).and(&self.speculating()),
            None => Term::ff(),
        }
    }

    fn goto(&self, target: Label) -> Term {
        self.pc_const(self.table.entry(target))
    }

    fn finish(self) -> Result<TransitionSystem, EncodeError> {
        let mut trans = Vec::new();
        let window = match self.spec_cfg.as_ref().map(|s| s.mode) {
            Some(SpecMode::Bounded(k)) => {
                self.spec_term().unwrap().ult(&Term::constant(k as u64, self.spec_term().unwrap().width()))
            }
            _ => Term::tt(),
        };
        for l in self.p.labels() {
            if let Some(gu) = self.instruction(l) {
                trans.push(GuardedUpdate { guard: self.at(l.0 as u64).and(&window), ..gu });
            }
        }
        for (&l, &code) in &self.table.assertion {
            let blocked = self.before_fence_blocks(l);
            let pc_next =
                Term::ite(&self.speculating(), &self.pc_const(self.table.bottom()), &self.pc_const(l.0 as u64));
            trans.push(GuardedUpdate {
                name: format!("assert-nonspec {l}"),
                guard: self.at(code).and(&window),
                updates: stuck_if(&blocked, vec![(self.pc, pc_next)], &self),
            });
        }
        let covered: Vec<Term> = trans.iter().map(|g| g.guard.clone()).collect();
        trans.push(GuardedUpdate { name: "stutter".into(), guard: Term::or_all(&covered).not(), updates: vec![] });

        let mut init = vec![(self.pc, self.table.entry(Label(0)))];
        if let (Some(s), Some(cfg)) = (self.spec, &self.spec_cfg) {
            init.push((s, 0));
            for site in &cfg.sites {
                init.push((self.fences[&site.id], cfg.active.contains(&site.id) as u64));
            }
        }
        let bad = self.at(self.table.bottom());
        let meta = Meta {
            program: self.p.name.clone(),
            pc: self.table.clone(),
            mode: self.spec_cfg.as_ref().map(|s| s.mode),
            vinst: self.spec_cfg.as_ref().map(|s| s.vinst.clone()).unwrap_or_default(),
            sites: self.spec_cfg.as_ref().map(|s| s.sites.clone()).unwrap_or_default(),
        };
        Ok(TransitionSystem {
            vars: self.vars,
            inputs: self.inputs,
            init,
            trans,
            bad,
            meta,
            pc: self.pc,
            spec: self.spec,
        })
    }

    /// The update for instruction `l`, without the pc guard.
    fn instruction(&self, l: Label) -> Option<GuardedUpdate> {
        let inst = &self.p.insts[l.index()];
        let name = format!("{l} {}", inst.kind_name());
        let next = self.goto(self.p.fallthrough(l));
        let speculative = self.spec_cfg.is_some();
        // In speculative mode a Before-fence at a VInst label is checked at
        // its assertion node, which runs first.
        let blocked = if speculative && !self.table.assertion.contains_key(&l) {
            self.before_fence_blocks(l)
        } else {
            Term::ff()
        };
        let keep_spec = |mut ups: Vec<(VarId, Term)>| {
            // A one-bit flag is already its own successor.
            let counting = matches!(self.spec_cfg.as_ref().map(|c| c.mode), Some(SpecMode::Bounded(_)));
            if let (Some(s), true) = (self.spec, counting) {
                let st = self.spec_term().unwrap();
                let upd = Term::ite(&self.speculating(), &self.spec_inc(), &st);
                if !upd.same(&st) {
                    ups.push((s, upd));
                }
            }
            ups
        };
        let updates = match inst {
            Instruction::Assign { dest, expr } => {
                let w = self.vars[self.scalars[dest].0 as usize].width;
                keep_spec(vec![(self.scalars[dest], self.expr(expr, w)), (self.pc, next)])
            }
            Instruction::Goto(t) => keep_spec(vec![(self.pc, self.goto(*t))]),
            Instruction::Load { dest, array, index } => {
                let idx = self.index(array, index);
                keep_spec(vec![(self.scalars[dest], self.load(l, array, &idx)), (self.pc, next)])
            }
            Instruction::Store { array, index, value } => {
                let idx = self.index(array, index);
                let w = self.vars[self.cells[array][0].0 as usize].width;
                let mut ups = self.store(array, &idx, &self.expr(value, w));
                ups.push((self.pc, next));
                keep_spec(ups)
            }
            Instruction::Assume(c) => {
                let c = self.expr(c, 1);
                let ups = keep_spec(vec![(self.pc, next)]);
                stuck_if(&c.not(), ups, self)
            }
            Instruction::Assert(c) => {
                let c = self.expr(c, 1);
                let ups = keep_spec(vec![(self.pc, next)]);
                let mut ups = stuck_if(&c.not(), ups, self);
                for (v, t) in &mut ups {
                    if *v == self.pc {
                        *t = Term::ite(&c, t, &self.pc_const(self.table.bottom()));
                    }
                }
                ups
            }
            Instruction::Halt => return None,
            Instruction::CondBranch { cond, then_target, else_target } => {
                let c = self.expr(cond, 1);
                let (t, e) = (self.goto(*then_target), self.goto(*else_target));
                if !speculative {
                    vec![(self.pc, Term::ite(&c, &t, &e))]
                } else {
                    let taken = Term::var(self.choice[&l], 1);
                    let mispredict = taken.xor(&c);
                    let st = self.spec_term().unwrap();
                    let spec_next = Term::ite(
                        &mispredict.or(&self.speculating()),
                        &self.spec_inc(),
                        &Term::constant(0, st.width()),
                    );
                    let now_spec = mispredict.or(&self.speculating());
                    let mut edge_block = Term::ff();
                    if let Some(s) = self.site_at(l, SitePosition::AfterBranchThen) {
                        edge_block = edge_block.or(&self.fence(&s.id).and(&taken).and(&now_spec));
                    }
                    if let Some(s) = self.site_at(l, SitePosition::AfterBranchElse) {
                        edge_block = edge_block.or(&self.fence(&s.id).and(&taken.not()).and(&now_spec));
                    }
                    let ups = vec![(self.pc, Term::ite(&taken, &t, &e)), (self.spec.unwrap(), spec_next)];
                    let blocked = blocked.or(&edge_block);
                    return Some(GuardedUpdate { name, guard: Term::tt(), updates: stuck_if(&blocked, ups, self) });
                }
            }
        };
        Some(GuardedUpdate { name, guard: Term::tt(), updates: stuck_if(&blocked, updates, self) })
    }
}

/// Turn every update into a stutter when `cond` holds.
fn stuck_if(cond: &Term, ups: Vec<(VarId, Term)>, b: &Builder<'_>) -> Vec<(VarId, Term)> {
    if cond.as_const() == Some(0) {
        return ups;
    }
    ups.into_iter()
        .map(|(v, t)| {
            let old = Term::var(v, b.vars[v.0 as usize].width);
            (v, Term::ite(cond, &old, &t))
        })
        .collect()
}
