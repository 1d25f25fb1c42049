//! A CDCL SAT solver: two watched literals, first-UIP learning with clause
//! minimisation, VSIDS with phase saving, Luby restarts, learnt clause
//! reduction, and solving under assumptions with final-conflict cores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, negated: bool) -> Lit {
        Lit(v.0 << 1 | negated as u32)
    }

    pub fn pos(v: Var) -> Lit {
        Lit::new(v, false)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

const FALSE: u8 = 0;
const TRUE: u8 = 1;
const UNDEF: u8 = 2;

fn lit_val(assigns: &[u8], l: Lit) -> u8 {
    let v = assigns[l.var().0 as usize];
    if v == UNDEF {
        UNDEF
    } else {
        v ^ l.is_negated() as u8
    }
}

type CRef = u32;

#[derive(Debug)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: Lit,
}

/// Binary max-heap over variables keyed by activity.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn grow(&mut self, n: usize) {
        self.pos.resize(n, None);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize].is_some()
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = Some(i);
        self.up(i, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0] as usize] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if let Some(i) = self.pos[v as usize] {
            self.up(i, act);
        }
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[parent] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child =
                if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[l] as usize] { r } else { l };
            if act[self.heap[child] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }
}

enum SearchOutcome {
    Sat,
    Unsat,
    Restart,
    OutOfBudget,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

pub struct Solver {
    clauses: Vec<Clause>,
    learnts: Vec<CRef>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    var_inc: f64,
    cla_inc: f64,
    max_learnts: f64,
    ok: bool,
    model: Vec<bool>,
    core: Vec<Lit>,
    conflict_budget: Option<u64>,
    rng: ChaCha8Rng,
    pub stats: SolverStats,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver").field("vars", &self.assigns.len()).field("clauses", &self.clauses.len()).finish()
    }
}

impl Default for Solver {
    fn default() -> Self {
        Self::new(0)
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let (mut size, mut seq) = (1u64, 0i32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

impl Solver {
    pub fn new(seed: u64) -> Solver {
        Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            phase: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            heap: VarHeap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            var_inc: 1.0,
            cla_inc: 1.0,
            max_learnts: 2000.0,
            ok: true,
            model: Vec::new(),
            core: Vec::new(),
            conflict_budget: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: SolverStats::default(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    /// Conflicts allowed per `solve` call; `None` means unlimited.
    pub fn set_conflict_budget(&mut self, budget: Option<u64>) {
        self.conflict_budget = budget;
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assigns.len() as u32;
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(None);
        self.phase.push(false);
        self.activity.push(self.rng.gen::<f64>() * 1e-5);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.grow(self.assigns.len());
        self.heap.insert(v, &self.activity);
        Var(v)
    }

    fn value(&self, l: Lit) -> u8 {
        lit_val(&self.assigns, l)
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<CRef>) {
        let v = l.var().0 as usize;
        self.assigns[v] = !l.is_negated() as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            self.phase[v] = !l.is_negated();
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl);
        self.qhead = start;
    }

    /// Add a clause. Returns false once the clause set is unsatisfiable at
    /// the root.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        let mut out = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i + 1 < c.len() && c[i + 1] == !l {
                return true;
            }
            match self.value(l) {
                TRUE => return true,
                FALSE => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(out, false);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> CRef {
        let cref = self.clauses.len() as CRef;
        self.watches[lits[0].idx()].push(Watcher { cref, blocker: lits[1] });
        self.watches[lits[1].idx()].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(Clause { lits, learnt, deleted: false, activity: 0.0 });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.idx()]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if lit_val(&self.assigns, w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let c = &mut self.clauses[w.cref as usize];
                if c.deleted {
                    continue;
                }
                if c.lits[0] == false_lit {
                    c.lits.swap(0, 1);
                }
                let first = c.lits[0];
                let nw = Watcher { cref: w.cref, blocker: first };
                if first != w.blocker && lit_val(&self.assigns, first) == TRUE {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.lits.len() {
                    if lit_val(&self.assigns, c.lits[k]) != FALSE {
                        c.lits.swap(1, k);
                        let l1 = c.lits[1];
                        self.watches[l1.idx()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if lit_val(&self.assigns, first) == FALSE {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.idx()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: u32) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: CRef) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn analyze(&mut self, mut confl: CRef) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let dl = self.decision_level() as u32;
        loop {
            self.bump_clause(confl);
            let skip = usize::from(p.is_some());
            let n = self.clauses[confl as usize].lits.len();
            for k in skip..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().0 as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v as u32);
                    if self.level[v] >= dl {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().0 as usize] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[pl.var().0 as usize] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[pl.var().0 as usize].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Drop literals whose reason is subsumed by the rest of the clause.
        let mut keep = vec![learnt[0]];
        for &q in &learnt[1..] {
            let v = q.var().0 as usize;
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|&x| {
                    let xv = x.var().0 as usize;
                    self.seen[xv] || self.level[xv] == 0
                }),
            };
            if !redundant {
                keep.push(q);
            }
        }
        for &q in &learnt[1..] {
            self.seen[q.var().0 as usize] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var().0 as usize] > self.level[learnt[max_i].var().0 as usize] {
                    max_i = k;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().0 as usize] as usize
        };
        (learnt, bt)
    }

    /// Assumptions responsible for `p` (an assumption) being false.
    fn analyze_final(&mut self, p: Lit) {
        self.core.clear();
        self.core.push(p);
        if self.decision_level() == 0 {
            return;
        }
        self.seen[p.var().0 as usize] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => self.core.push(l),
                Some(r) => {
                    for k in 1..self.clauses[r as usize].lits.len() {
                        let x = self.clauses[r as usize].lits[k].var().0 as usize;
                        if self.level[x] > 0 {
                            self.seen[x] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.var().0 as usize] = false;
    }

    fn locked(&self, cref: CRef) -> bool {
        let l0 = self.clauses[cref as usize].lits[0];
        self.value(l0) == TRUE && self.reason[l0.var().0 as usize] == Some(cref)
    }

    fn reduce_db(&mut self) {
        let mut ls = std::mem::take(&mut self.learnts);
        ls.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            ca.activity.partial_cmp(&cb.activity).unwrap().then(a.cmp(&b))
        });
        let half = ls.len() / 2;
        let mut kept = Vec::with_capacity(ls.len());
        for (i, &cref) in ls.iter().enumerate() {
            let small = self.clauses[cref as usize].lits.len() <= 2;
            if i < half && !small && !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == UNDEF {
                return Some(Lit::new(Var(v), !self.phase[v as usize]));
            }
        }
        None
    }

    fn search(&mut self, restart_after: u64, assumptions: &[Lit], used: &mut u64) -> SearchOutcome {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                conflicts += 1;
                *used += 1;
                self.stats.conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SearchOutcome::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let l0 = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(l0, Some(cref));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
                continue;
            }
            if let Some(b) = self.conflict_budget {
                if *used >= b {
                    self.cancel_until(0);
                    return SearchOutcome::OutOfBudget;
                }
            }
            if conflicts >= restart_after {
                self.cancel_until(0);
                return SearchOutcome::Restart;
            }
            if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                self.reduce_db();
                self.max_learnts *= 1.1;
            }
            let mut next = None;
            while self.decision_level() < assumptions.len() {
                let p = assumptions[self.decision_level()];
                match self.value(p) {
                    TRUE => self.trail_lim.push(self.trail.len()),
                    FALSE => {
                        self.analyze_final(p);
                        return SearchOutcome::Unsat;
                    }
                    _ => {
                        next = Some(p);
                        break;
                    }
                }
            }
            let next = match next {
                Some(p) => p,
                None => match self.pick_branch() {
                    Some(p) => {
                        self.stats.decisions += 1;
                        p
                    }
                    None => return SearchOutcome::Sat,
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, None);
        }
    }

    /// Solve under assumptions. `None` means the conflict budget ran out.
    pub fn solve(&mut self, assumptions: &[Lit]) -> Option<bool> {
        self.stats.solves += 1;
        self.model.clear();
        self.core.clear();
        if !self.ok {
            return Some(false);
        }
        self.cancel_until(0);
        let mut used = 0u64;
        let mut restarts = 0u64;
        loop {
            let budget = (luby(2.0, restarts) * 100.0) as u64;
            match self.search(budget, assumptions, &mut used) {
                SearchOutcome::Sat => {
                    self.model = self.assigns.iter().map(|&a| a == TRUE).collect();
                    self.cancel_until(0);
                    return Some(true);
                }
                SearchOutcome::Unsat => {
                    self.cancel_until(0);
                    return Some(false);
                }
                SearchOutcome::OutOfBudget => return None,
                SearchOutcome::Restart => restarts += 1,
            }
        }
    }

    /// Value of `l` in the last satisfying assignment.
    pub fn model_value(&self, l: Lit) -> bool {
        self.model[l.var().0 as usize] ^ l.is_negated()
    }

    pub fn has_model(&self) -> bool {
        !self.model.is_empty()
    }

    /// After an unsat answer under assumptions: a subset of the assumptions
    /// that is already inconsistent with the clauses. Empty when the clauses
    /// alone are unsatisfiable.
    pub fn core(&self) -> &[Lit] {
        &self.core
    }

    pub fn is_ok(&self) -> bool {
        self.ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(s: &mut Solver, n: usize) -> Vec<Lit> {
        (0..n).map(|_| Lit::pos(s.new_var())).collect()
    }

    #[test]
    fn trivial_conflict() {
        let mut s = Solver::new(0);
        let x = lits(&mut s, 1)[0];
        s.add_clause(&[x]);
        s.add_clause(&[!x]);
        assert_eq!(s.solve(&[]), Some(false));
    }

    /// No hole holds two pigeons, every pigeon sits somewhere.
    fn pigeonhole(s: &mut Solver, pigeons: usize, holes: usize) {
        let p: Vec<Vec<Lit>> = (0..pigeons).map(|_| lits(s, holes)).collect();
        for row in &p {
            s.add_clause(row);
        }
        for (a, pa) in p.iter().enumerate() {
            for pb in &p[a + 1..] {
                for (x, y) in pa.iter().zip(pb) {
                    s.add_clause(&[!*x, !*y]);
                }
            }
        }
    }

    #[test]
    fn pigeonhole_is_unsat() {
        // 4 pigeons, 3 holes.
        let mut s = Solver::new(1);
        pigeonhole(&mut s, 4, 3);
        assert_eq!(s.solve(&[]), Some(false));
    }

    #[test]
    fn assumptions_and_core() {
        let mut s = Solver::new(0);
        let v = lits(&mut s, 3);
        s.add_clause(&[!v[0], !v[1]]);
        assert_eq!(s.solve(&[v[0], v[2]]), Some(true));
        assert!(s.model_value(v[0]) && !s.model_value(v[1]));
        assert_eq!(s.solve(&[v[2], v[0], v[1]]), Some(false));
        let core: Vec<Lit> = s.core().to_vec();
        assert!(core.contains(&v[0]) && core.contains(&v[1]) && !core.contains(&v[2]));
        assert_eq!(s.solve(&[]), Some(true));
    }

    #[test]
    fn budget_exhaustion_reports_none() {
        let mut s = Solver::new(0);
        pigeonhole(&mut s, 8, 7);
        s.set_conflict_budget(Some(10));
        assert_eq!(s.solve(&[]), None);
    }

    #[test]
    fn luby_sequence() {
        let seq: Vec<u32> = (0..9).map(|i| luby(2.0, i) as u32).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1]);
    }
}
