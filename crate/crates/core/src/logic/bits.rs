//! Bit-level view of a transition system: one latch per state bit, a
//! next-state literal per latch, and Tseitin clauses on demand.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::aig::{Aig, AigLit, AigNode, Blaster, Word};
use super::sat::{Lit, Solver, Var};
use super::term::VarId;
use crate::encode::TransitionSystem;

#[derive(Debug, Clone)]
pub struct Latch {
    /// The AIG input node holding the current value.
    pub cur: AigLit,
    pub next: AigLit,
    pub init: Option<bool>,
    pub var: VarId,
    pub bit: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Latch(usize),
    Input(usize),
}

#[derive(Debug, Clone)]
pub struct BitSystem {
    pub aig: Aig,
    pub latches: Vec<Latch>,
    /// Input bits, grouped per input variable by `input_bits`.
    pub inputs: Vec<AigLit>,
    pub bad: AigLit,
    pub var_bits: Vec<Vec<usize>>,
    pub input_bits: Vec<Vec<usize>>,
    /// Latches in the cone of influence of `bad`, ascending.
    pub coi: Vec<usize>,
    roles: HashMap<u32, Role>,
}

impl BitSystem {
    pub fn compile(ts: &TransitionSystem) -> BitSystem {
        let mut aig = Aig::new();
        let mut latches = Vec::new();
        let mut var_bits = Vec::new();
        let mut roles = HashMap::new();
        let mut words: Vec<Word> = Vec::new();
        for (i, v) in ts.vars.iter().enumerate() {
            let init = ts.init_value(VarId(i as u32));
            let mut idx = Vec::new();
            let mut word = Vec::new();
            for b in 0..v.width {
                let cur = aig.input();
                roles.insert(cur.node(), Role::Latch(latches.len()));
                idx.push(latches.len());
                word.push(cur);
                latches.push(Latch {
                    cur,
                    next: AigLit::FALSE,
                    init: init.map(|c| c >> b & 1 == 1),
                    var: VarId(i as u32),
                    bit: b,
                });
            }
            var_bits.push(idx);
            words.push(word);
        }
        let mut inputs = Vec::new();
        let mut input_bits = Vec::new();
        for v in &ts.inputs {
            let mut idx = Vec::new();
            let mut word = Vec::new();
            for _ in 0..v.width {
                let l = aig.input();
                roles.insert(l.node(), Role::Input(inputs.len()));
                idx.push(inputs.len());
                inputs.push(l);
                word.push(l);
            }
            input_bits.push(idx);
            words.push(word);
        }
        let next_terms = ts.next_terms();
        let mut bl = Blaster::new(&mut aig);
        let mut bind = |_: &mut Aig, v: VarId, _: u32| words[v.0 as usize].clone();
        let bad = bl.blast(&ts.bad, &mut bind)[0];
        for (i, t) in next_terms.iter().enumerate() {
            let w = bl.blast(t, &mut bind);
            for (b, &l) in var_bits[i].iter().zip(&w) {
                latches[*b].next = l;
            }
        }
        let mut sys = BitSystem { aig, latches, inputs, bad, var_bits, input_bits, coi: Vec::new(), roles };
        sys.coi = sys.cone_of_influence();
        sys
    }

    pub fn role(&self, node: u32) -> Option<Role> {
        self.roles.get(&node).copied()
    }

    fn cone_of_influence(&self) -> Vec<usize> {
        let mut mark = vec![false; self.latches.len()];
        let mut frontier = vec![self.bad];
        loop {
            let mut added = Vec::new();
            for n in self.aig.support(frontier.iter().copied()) {
                if let Some(Role::Latch(i)) = self.role(n) {
                    if !mark[i] {
                        mark[i] = true;
                        added.push(i);
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            frontier = added.iter().map(|&i| self.latches[i].next).collect();
        }
        (0..self.latches.len()).filter(|&i| mark[i]).collect()
    }

    /// Input bits that influence the next state of COI latches.
    pub fn coi_inputs(&self) -> Vec<usize> {
        let roots: Vec<AigLit> = self.coi.iter().map(|&i| self.latches[i].next).collect();
        let mut out: Vec<usize> = self
            .aig
            .support(roots)
            .into_iter()
            .filter_map(|n| match self.role(n) {
                Some(Role::Input(j)) => Some(j),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Bit values of a word-level state, indexed by latch.
    pub fn state_bits(&self, state: &[u64]) -> Vec<bool> {
        self.latches.iter().map(|l| state[l.var.0 as usize] >> l.bit & 1 == 1).collect()
    }

    pub fn input_bit_values(&self, inputs: &[u64]) -> Vec<bool> {
        let mut out = vec![false; self.inputs.len()];
        for (j, idx) in self.input_bits.iter().enumerate() {
            for (b, &k) in idx.iter().enumerate() {
                out[k] = inputs[j] >> b & 1 == 1;
            }
        }
        out
    }

    /// Word-level input values from bit values.
    pub fn input_words(&self, bits: &[bool]) -> Vec<u64> {
        self.input_bits.iter().map(|idx| idx.iter().enumerate().map(|(b, &k)| (bits[k] as u64) << b).sum()).collect()
    }

    /// Cube over `latches` fixing them to their values in `state`.
    pub fn cube_of(&self, state: &[u64], latches: &[usize]) -> Cube {
        let bits = self.state_bits(state);
        Cube::new(latches.iter().map(|&i| BitLit { latch: i as u32, value: bits[i] }).collect())
    }

    /// Simulate one step at bit level.
    pub fn step_bits(&self, cur: &[bool], inputs: &[bool]) -> Vec<bool> {
        let vals = self.simulate(cur, inputs);
        self.latches.iter().map(|l| super::aig::lit_value(&vals, l.next)).collect()
    }

    pub fn simulate(&self, cur: &[bool], inputs: &[bool]) -> Vec<bool> {
        self.aig.simulate(|n| match self.role(n) {
            Some(Role::Latch(i)) => cur[i],
            Some(Role::Input(j)) => inputs[j],
            None => false,
        })
    }

    pub fn init_cube(&self) -> Cube {
        Cube::new(
            self.latches
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.init.map(|value| BitLit { latch: i as u32, value }))
                .collect(),
        )
    }
}

/// A literal over a latch's current value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitLit {
    pub latch: u32,
    pub value: bool,
}

/// Conjunction of latch literals, sorted by latch, at most one per latch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cube(Vec<BitLit>);

impl Cube {
    pub fn new(mut lits: Vec<BitLit>) -> Cube {
        lits.sort();
        lits.dedup();
        debug_assert!(lits.windows(2).all(|w| w[0].latch != w[1].latch), "contradictory cube");
        Cube(lits)
    }

    pub fn lits(&self) -> &[BitLit] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_bits(&self, bits: &[bool]) -> bool {
        self.0.iter().all(|l| bits[l.latch as usize] == l.value)
    }

    /// Whether every state in `self` is in `other` (syntactic subsumption).
    pub fn subsumed_by(&self, other: &Cube) -> bool {
        other.0.iter().all(|l| self.0.binary_search(l).is_ok())
    }

    /// Two cubes share a state iff they agree on all common latches.
    pub fn intersects(&self, other: &Cube) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.latch.cmp(&b.latch) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if a.value != b.value {
                        return false;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        true
    }

    pub fn without(&self, k: usize) -> Cube {
        let mut v = self.0.clone();
        v.remove(k);
        Cube(v)
    }

    pub fn retain(&self, keep: impl Fn(&BitLit) -> bool) -> Cube {
        Cube(self.0.iter().copied().filter(|l| keep(l)).collect())
    }

    pub fn latches(&self) -> BTreeSet<u32> {
        self.0.iter().map(|l| l.latch).collect()
    }

    /// Word-level rendering: fully fixed variables print as `name=value`,
    /// partial ones as `name[bit]=0/1`.
    pub fn render(&self, bits: &BitSystem, ts: &TransitionSystem) -> String {
        let mut parts = Vec::new();
        let mut by_var: std::collections::BTreeMap<u32, Vec<BitLit>> = Default::default();
        for l in &self.0 {
            by_var.entry(bits.latches[l.latch as usize].var.0).or_default().push(*l);
        }
        for (v, ls) in by_var {
            let name = &ts.vars[v as usize].name;
            if ls.len() == ts.vars[v as usize].width as usize {
                let val: u64 = ls.iter().map(|l| (l.value as u64) << bits.latches[l.latch as usize].bit).sum();
                parts.push(format!("{name}={val}"));
            } else {
                for l in ls {
                    parts.push(format!("{name}.{}={}", bits.latches[l.latch as usize].bit, l.value as u8));
                }
            }
        }
        parts.join(" & ")
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.0.iter().map(|l| format!("{}b{}", if l.value { "" } else { "!" }, l.latch)).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Lazily Tseitin-encodes AIG cones into a solver.
#[derive(Debug, Default, Clone)]
pub struct Tseitin {
    map: HashMap<u32, Var>,
}

impl Tseitin {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solver variable already assigned to an AIG node, if any.
    pub fn var_of(&self, node: u32) -> Option<Var> {
        self.map.get(&node).copied()
    }

    /// Bind an AIG node to an existing solver variable.
    pub fn bind(&mut self, node: u32, v: Var) {
        self.map.insert(node, v);
    }

    pub fn lit(&mut self, s: &mut Solver, g: &Aig, l: AigLit) -> Lit {
        let mut stack = vec![(l.node(), false)];
        while let Some((n, expanded)) = stack.pop() {
            if self.map.contains_key(&n) {
                continue;
            }
            match g.node(n) {
                AigNode::False => {
                    let v = s.new_var();
                    s.add_clause(&[!Lit::pos(v)]);
                    self.map.insert(n, v);
                }
                AigNode::Input => {
                    let v = s.new_var();
                    self.map.insert(n, v);
                }
                AigNode::And(a, b) => {
                    if !expanded {
                        stack.push((n, true));
                        stack.push((a.node(), false));
                        stack.push((b.node(), false));
                        continue;
                    }
                    let la = Lit::new(self.map[&a.node()], a.is_negated());
                    let lb = Lit::new(self.map[&b.node()], b.is_negated());
                    let v = s.new_var();
                    let lv = Lit::pos(v);
                    s.add_clause(&[!lv, la]);
                    s.add_clause(&[!lv, lb]);
                    s.add_clause(&[lv, !la, !lb]);
                    self.map.insert(n, v);
                }
            }
        }
        Lit::new(self.map[&l.node()], l.is_negated())
    }
}

pub fn blast_word(aig: &mut Aig, t: &super::Term, words: &[Word]) -> Word {
    let mut bl = Blaster::new(aig);
    bl.blast(t, &mut |_, v, _| words[v.0 as usize].clone())
}
