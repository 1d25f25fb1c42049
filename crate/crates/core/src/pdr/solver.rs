//! Incremental SAT queries over the frames and the transition relation.

use std::collections::HashMap;

use crate::logic::sat::{Lit, Solver};
use crate::logic::{BitLit, BitSystem, Cube, ResourceError, Tseitin};

/// Answer of a relative-induction query.
pub(crate) enum Query {
    /// A predecessor: latch bits and input bits of the current state.
    Sat { state: Vec<bool>, inputs: Vec<bool> },
    /// Unsat; the literals of the target cube that the refutation used.
    Unsat(Cube),
}

/// Transition relation over a set of latches, with the
/// next-state literal of each latch serving as its primed copy.
pub(crate) struct TrEncoding {
    pub s: Solver,
    pub cnf: Tseitin,
    pub cur: Vec<Option<Lit>>,
    pub next: Vec<Option<Lit>>,
    pub bad: Lit,
    /// Latches with current and next literals.
    pub latches: Vec<usize>,
    budget: Option<u64>,
}

impl TrEncoding {
    pub fn new(bits: &BitSystem, latches: &[usize], seed: u64, budget: Option<u64>) -> TrEncoding {
        let mut s = Solver::new(seed);
        s.set_conflict_budget(budget);
        let mut cnf = Tseitin::new();
        let n = bits.latches.len();
        let mut cur = vec![None; n];
        let mut next = vec![None; n];
        for &i in latches {
            cur[i] = Some(cnf.lit(&mut s, &bits.aig, bits.latches[i].cur));
        }
        for &i in latches {
            next[i] = Some(cnf.lit(&mut s, &bits.aig, bits.latches[i].next));
        }
        let bad = cnf.lit(&mut s, &bits.aig, bits.bad);
        TrEncoding { s, cnf, cur, next, bad, latches: latches.to_vec(), budget }
    }

    pub fn cur_lit(&self, l: BitLit) -> Lit {
        let x = self.cur[l.latch as usize].expect("literal outside the cone of influence");
        if l.value {
            x
        } else {
            !x
        }
    }

    pub fn next_lit(&self, l: BitLit) -> Lit {
        let x = self.next[l.latch as usize].expect("literal outside the cone of influence");
        if l.value {
            x
        } else {
            !x
        }
    }

    pub fn solve(&mut self, assumptions: &[Lit], queries: &mut u64) -> Result<bool, ResourceError> {
        *queries += 1;
        self.s.solve(assumptions).ok_or(ResourceError(self.budget.unwrap_or(0)))
    }

    pub fn fresh(&mut self) -> Lit {
        Lit::pos(self.s.new_var())
    }

    /// Disable a temporary activation literal for good.
    pub fn retire(&mut self, act: Lit) {
        self.s.add_clause(&[!act]);
    }

    pub fn model_state(&self, bits: &BitSystem) -> Vec<bool> {
        let mut out = vec![false; bits.latches.len()];
        for &i in &self.latches {
            out[i] = self.s.model_value(self.cur[i].unwrap());
        }
        out
    }

    pub fn model_inputs(&self, bits: &BitSystem) -> Vec<bool> {
        bits.inputs.iter().map(|l| self.cnf.var_of(l.node()).is_some_and(|v| self.s.model_value(Lit::pos(v)))).collect()
    }

    /// Assumption literals fixing every mapped input bit.
    pub fn input_assumptions(&self, bits: &BitSystem, values: &[bool]) -> Vec<Lit> {
        bits.inputs
            .iter()
            .zip(values)
            .filter_map(|(l, &b)| self.cnf.var_of(l.node()).map(|v| Lit::new(v, !b)))
            .collect()
    }
}

/// Frames F_1..F_N and F_inf as clauses guarded by one activation literal per
/// level. F_j is queried by assuming the literals of levels j..=N and inf.
pub(crate) struct FrameSolver {
    pub tr: TrEncoding,
    init_act: Lit,
    acts: Vec<Lit>,
    inf_act: Lit,
    /// Temporary clauses added since the last rebuild.
    pub garbage: usize,
}

impl FrameSolver {
    pub fn new(bits: &BitSystem, latches: &[usize], init: &Cube, seed: u64, budget: Option<u64>) -> FrameSolver {
        let mut tr = TrEncoding::new(bits, latches, seed, budget);
        let init_act = tr.fresh();
        let inf_act = tr.fresh();
        for &l in init.lits() {
            if tr.cur[l.latch as usize].is_some() {
                let x = tr.cur_lit(l);
                tr.s.add_clause(&[!init_act, x]);
            }
        }
        let acts = vec![init_act];
        FrameSolver { tr, init_act, acts, inf_act, garbage: 0 }
    }

    /// Make room for level `n`.
    pub fn ensure_level(&mut self, n: usize) {
        while self.acts.len() <= n {
            let a = self.tr.fresh();
            self.acts.push(a);
        }
    }

    /// `level = None` means F_inf.
    pub fn add_lemma(&mut self, c: &Cube, level: Option<usize>) {
        let act = match level {
            Some(k) => {
                self.ensure_level(k);
                self.acts[k]
            }
            None => self.inf_act,
        };
        let mut clause = vec![!act];
        clause.extend(c.lits().iter().map(|&l| !self.tr.cur_lit(l)));
        self.tr.s.add_clause(&clause);
    }

    /// F_j with `n` the current top level. F_0 is Init together with every
    /// lemma, which it implies.
    pub fn frame(&self, j: usize, n: usize) -> Vec<Lit> {
        let mut a = vec![self.inf_act];
        if j == 0 {
            a.push(self.init_act);
        }
        a.extend(self.acts.iter().take(n + 1).skip(j.max(1)).copied());
        a
    }

    /// Init without any lemma.
    pub fn init_only(&self) -> Vec<Lit> {
        vec![self.init_act]
    }

    pub fn inf_only(&self) -> Vec<Lit> {
        vec![self.inf_act]
    }

    /// A state of `frame` satisfying Bad.
    pub fn bad_state(
        &mut self,
        bits: &BitSystem,
        frame: &[Lit],
        queries: &mut u64,
    ) -> Result<Option<Vec<bool>>, ResourceError> {
        let mut a = frame.to_vec();
        a.push(self.tr.bad);
        Ok(if self.tr.solve(&a, queries)? { Some(self.tr.model_state(bits)) } else { None })
    }

    /// F ∧ [¬c] ∧ Tr ∧ c′.
    pub fn rel_ind(
        &mut self,
        bits: &BitSystem,
        c: &Cube,
        frame: &[Lit],
        exclude: bool,
        queries: &mut u64,
    ) -> Result<Query, ResourceError> {
        let mut a = frame.to_vec();
        let tmp = if exclude {
            let t = self.tr.fresh();
            let mut clause = vec![!t];
            clause.extend(c.lits().iter().map(|&l| !self.tr.cur_lit(l)));
            self.tr.s.add_clause(&clause);
            a.push(t);
            self.garbage += 1;
            Some(t)
        } else {
            None
        };
        let mut back: HashMap<Lit, Vec<BitLit>> = HashMap::new();
        for &l in c.lits() {
            let x = self.tr.next_lit(l);
            back.entry(x).or_default().push(l);
            a.push(x);
        }
        let sat = self.tr.solve(&a, queries)?;
        let out = if sat {
            Query::Sat { state: self.tr.model_state(bits), inputs: self.tr.model_inputs(bits) }
        } else {
            let used: Vec<BitLit> = self.tr.s.core().iter().filter_map(|x| back.get(x)).flatten().copied().collect();
            Query::Unsat(Cube::new(used))
        };
        if let Some(t) = tmp {
            self.tr.retire(t);
        }
        Ok(out)
    }
}

/// Shrinks concrete states to cubes that still force a target.
pub(crate) struct Lifter {
    tr: TrEncoding,
    pub garbage: usize,
}

impl Lifter {
    pub fn new(bits: &BitSystem, seed: u64, budget: Option<u64>) -> Lifter {
        Lifter { tr: TrEncoding::new(bits, &bits.coi, seed, budget), garbage: 0 }
    }

    /// Sub-cube of `state` all of whose states satisfy Bad.
    pub fn lift_bad(&mut self, state: &[bool], queries: &mut u64) -> Result<Cube, ResourceError> {
        let act = self.tr.fresh();
        let bad = self.tr.bad;
        self.tr.s.add_clause(&[!act, !bad]);
        self.lift(state, &[], act, queries)
    }

    /// Sub-cube of `state` all of whose states step into `target` under
    /// `inputs`.
    pub fn lift_pred(
        &mut self,
        bits: &BitSystem,
        state: &[bool],
        inputs: &[bool],
        target: &Cube,
        queries: &mut u64,
    ) -> Result<Cube, ResourceError> {
        let act = self.tr.fresh();
        let mut clause = vec![!act];
        clause.extend(target.lits().iter().map(|&l| !self.tr.next_lit(l)));
        self.tr.s.add_clause(&clause);
        let fixed = self.tr.input_assumptions(bits, inputs);
        self.lift(state, &fixed, act, queries)
    }

    fn lift(&mut self, state: &[bool], fixed: &[Lit], act: Lit, queries: &mut u64) -> Result<Cube, ResourceError> {
        self.garbage += 1;
        let mut a = vec![act];
        a.extend_from_slice(fixed);
        let mut back: HashMap<Lit, BitLit> = HashMap::new();
        for &i in &self.tr.latches {
            let l = BitLit { latch: i as u32, value: state[i] };
            let x = self.tr.cur_lit(l);
            back.insert(x, l);
            a.push(x);
        }
        let sat = self.tr.solve(&a, queries)?;
        assert!(!sat, "lifting query must be unsatisfiable");
        let cube = Cube::new(self.tr.s.core().iter().filter_map(|x| back.get(x)).copied().collect());
        self.tr.retire(act);
        Ok(cube)
    }
}
