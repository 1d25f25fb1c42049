//! Vulnerable-instruction selection for the strong and classical threat
//! models.
//!
//! The classical model needs to know which memory accesses amount to a
//! nested access at an attacker-controlled position, e.g. `b[a[i]]` with `i`
//! an input. Taint therefore has two kinds: *controlled* values derive from
//! `input` variables through arithmetic, and *loaded* values were read from
//! memory at a controlled (or loaded) index. An access is vulnerable when its
//! index carries loaded taint.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::ir::{Expr, Instruction, Label, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThreatModel {
    Strong,
    Classical,
}

impl FromStr for ThreatModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(ThreatModel::Strong),
            "classical" => Ok(ThreatModel::Classical),
            _ => Err(format!("unknown threat model `{s}` (expected strong|classical)")),
        }
    }
}

impl fmt::Display for ThreatModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThreatModel::Strong => "strong",
            ThreatModel::Classical => "classical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VInstReason {
    StrongAllMemory,
    TaintedIndex,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VInstSet {
    pub labels: BTreeSet<Label>,
    pub rationale: BTreeMap<Label, VInstReason>,
}

impl VInstSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, l: Label) -> bool {
        self.labels.contains(&l)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn insert(&mut self, l: Label, why: VInstReason) {
        self.labels.insert(l);
        self.rationale.insert(l, why);
    }
}

/// Taint of scalars and (wholesale) array contents at one program point.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintState {
    pub controlled: BTreeSet<String>,
    pub loaded: BTreeSet<String>,
}

impl TaintState {
    /// Every name carrying either kind of taint.
    pub fn tainted(&self) -> BTreeSet<&str> {
        self.controlled.iter().chain(self.loaded.iter()).map(String::as_str).collect()
    }

    fn join(&mut self, other: &TaintState) -> bool {
        let before = (self.controlled.len(), self.loaded.len());
        self.controlled.extend(other.controlled.iter().cloned());
        self.loaded.extend(other.loaded.iter().cloned());
        before != (self.controlled.len(), self.loaded.len())
    }

    /// (controlled, loaded) taint of an expression's value.
    fn of_expr(&self, e: &Expr) -> (bool, bool) {
        let vars = e.vars();
        (vars.iter().any(|v| self.controlled.contains(*v)), vars.iter().any(|v| self.loaded.contains(*v)))
    }

    fn set(&mut self, name: &str, (c, l): (bool, bool)) {
        if c {
            self.controlled.insert(name.to_string());
        } else {
            self.controlled.remove(name);
        }
        if l {
            self.loaded.insert(name.to_string());
        } else {
            self.loaded.remove(name);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintFacts {
    pub before: TaintState,
    pub after: TaintState,
}

pub type TaintMap = BTreeMap<Label, TaintFacts>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorklistOrder {
    Fifo,
    Lifo,
}

fn transfer(inst: &Instruction, s: &TaintState) -> TaintState {
    let mut out = s.clone();
    match inst {
        Instruction::Assign { dest, expr } => out.set(dest, s.of_expr(expr)),
        Instruction::Load { dest, array, index } => {
            let (ic, il) = s.of_expr(index);
            let ac = s.controlled.contains(array);
            let al = s.loaded.contains(array);
            out.set(dest, (ac, ic || il || al));
        }
        Instruction::Store { array, value, .. } => {
            let (vc, vl) = s.of_expr(value);
            if vc {
                out.controlled.insert(array.clone());
            }
            if vl {
                out.loaded.insert(array.clone());
            }
        }
        _ => {}
    }
    out
}

/// Per-label taint before and after each instruction.
pub fn taint_map(p: &Program) -> TaintMap {
    taint_map_with_order(p, WorklistOrder::Fifo)
}

/// Monotone fixpoint over the control-flow graph using the given worklist
/// discipline. The result is independent of the order.
pub fn taint_map_with_order(p: &Program, order: WorklistOrder) -> TaintMap {
    let n = p.insts.len();
    let mut entry: Vec<Option<TaintState>> = vec![None; n];
    let mut seed = TaintState::default();
    seed.controlled.extend(p.inputs().map(|v| v.name.clone()));
    entry[0] = Some(seed);

    let mut work: VecDeque<usize> = VecDeque::from([0]);
    let mut queued = vec![false; n];
    queued[0] = true;
    while let Some(i) = match order {
        WorklistOrder::Fifo => work.pop_front(),
        WorklistOrder::Lifo => work.pop_back(),
    } {
        queued[i] = false;
        let inst = &p.insts[i];
        let out = transfer(inst, entry[i].as_ref().expect("queued label has a state"));
        for succ in p.successors(Label(i as u32)) {
            let j = succ.index();
            if j >= n {
                continue;
            }
            let changed = match &mut entry[j] {
                Some(st) => st.join(&out),
                slot @ None => {
                    *slot = Some(out.clone());
                    true
                }
            };
            if changed && !queued[j] {
                queued[j] = true;
                work.push_back(j);
            }
        }
    }

    entry
        .into_iter()
        .enumerate()
        .filter_map(|(i, st)| {
            st.map(|before| {
                let after = transfer(&p.insts[i], &before);
                (Label(i as u32), TaintFacts { before, after })
            })
        })
        .collect()
}

/// VInst for the given threat model, including stores.
pub fn compute_vinst(p: &Program, model: ThreatModel) -> VInstSet {
    compute_vinst_with(p, model, false)
}

/// VInst, optionally restricted to loads.
pub fn compute_vinst_with(p: &Program, model: ThreatModel, loads_only: bool) -> VInstSet {
    let mut set = VInstSet::empty();
    let keep = |inst: &Instruction| match inst {
        Instruction::Load { .. } => true,
        Instruction::Store { .. } => !loads_only,
        _ => false,
    };
    match model {
        ThreatModel::Strong => {
            for l in p.memory_instructions() {
                if keep(&p.insts[l.index()]) {
                    set.insert(l, VInstReason::StrongAllMemory);
                }
            }
        }
        ThreatModel::Classical => {
            let taint = taint_map(p);
            for (l, facts) in &taint {
                let inst = &p.insts[l.index()];
                if !keep(inst) {
                    continue;
                }
                let index = match inst {
                    Instruction::Load { index, .. } | Instruction::Store { index, .. } => index,
                    _ => unreachable!(),
                };
                if facts.before.of_expr(index).1 {
                    set.insert(*l, VInstReason::TaintedIndex);
                }
            }
        }
    }
    set
}

/// Render the taint map in the text form used by `specfence taint`.
pub fn render_taint_map(p: &Program, map: &TaintMap) -> String {
    let mut out = String::new();
    for l in p.labels() {
        // Display impls ignore width, so pad the rendered text
        let inst = p.insts[l.index()].to_string();
        match map.get(&l) {
            Some(f) => {
                let fmt_set = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
                out.push_str(&format!(
                    "{l}: {inst:<28} controlled={{{}}} loaded={{{}}}\n",
                    fmt_set(&f.after.controlled),
                    fmt_set(&f.after.loaded)
                ));
            }
            None => out.push_str(&format!("{l}: {inst:<28} unreachable\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_program, FIG1_SOURCE};

    fn set(ls: &[u32]) -> BTreeSet<Label> {
        ls.iter().map(|&l| Label(l)).collect()
    }

    #[test]
    fn fig1_vinst() {
        let p = parse_program(FIG1_SOURCE).unwrap();
        assert_eq!(compute_vinst(&p, ThreatModel::Strong).labels, set(&[1, 2]));
        assert_eq!(compute_vinst(&p, ThreatModel::Classical).labels, set(&[2]));
    }

    #[test]
    fn fig1_taint_map() {
        let p = parse_program(FIG1_SOURCE).unwrap();
        let m = taint_map(&p);
        assert_eq!(m[&Label(0)].before.tainted(), BTreeSet::from(["i"]));
        assert_eq!(m[&Label(1)].after.tainted(), BTreeSet::from(["i", "k"]));
    }

    #[test]
    fn direct_propagation_and_kill() {
        let p =
            parse_program("program t\ninput a : u8\nvar x : u8\nvar y : u8\nL0: x := a\nL1: y := x + 1\nL2: halt\n")
                .unwrap();
        assert!(taint_map(&p)[&Label(1)].after.tainted().contains("y"));

        let q = parse_program("program t\nvar x : u8\nL0: x := 5\nL1: halt\n").unwrap();
        assert!(taint_map(&q).values().all(|f| f.after.tainted().is_empty()));
    }

    #[test]
    fn no_inputs_means_empty_classical_vinst() {
        let src = FIG1_SOURCE.replace("input i", "var i");
        let p = parse_program(&src).unwrap();
        assert!(compute_vinst(&p, ThreatModel::Classical).is_empty());
    }

    #[test]
    fn stored_loaded_value_taints_array() {
        let p = parse_program(
            "program t\ninput i : u4\nvar k : u4\nvar z : u4\narray a[16] : u4\narray c[16] : u4\narray b[16] : u4\n\
             L0: k := load a[i]\nL1: store c[0] := k\nL2: z := load c[1]\nL3: z := load b[z]\nL4: halt\n",
        )
        .unwrap();
        assert_eq!(compute_vinst(&p, ThreatModel::Classical).labels, set(&[3]));
        assert_eq!(compute_vinst_with(&p, ThreatModel::Strong, true).labels, set(&[0, 2, 3]));
    }
}
