use crate::encode::TransitionSystem;
use crate::logic::{BitSystem, Cube, Term, VarId};

/// A single bit of a state variable with a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateBit {
    pub var: VarId,
    pub bit: u32,
    pub value: bool,
}

impl StateBit {
    pub fn holds(&self, state: &[u64]) -> bool {
        (state[self.var.0 as usize] >> self.bit & 1 == 1) == self.value
    }

    pub fn term(&self, ts: &TransitionSystem) -> Term {
        let w = ts.width_of(self.var);
        let m = 1u64 << self.bit;
        Term::var(self.var, w).and(&Term::constant(m, w)).eq_const(if self.value { m } else { 0 })
    }
}

/// Conjunction of clauses, each the negation of a blocked cube.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Invariant {
    pub blocked: Vec<Vec<StateBit>>,
}

impl Invariant {
    /// The invariant `true`.
    pub fn truth() -> Invariant {
        Invariant::default()
    }

    pub fn from_cubes(bits: &BitSystem, cubes: &[Cube]) -> Invariant {
        let mut blocked: Vec<Vec<StateBit>> = cubes
            .iter()
            .map(|c| {
                c.lits()
                    .iter()
                    .map(|l| {
                        let latch = &bits.latches[l.latch as usize];
                        StateBit { var: latch.var, bit: latch.bit, value: l.value }
                    })
                    .collect()
            })
            .collect();
        blocked.sort();
        blocked.dedup();
        Invariant { blocked }
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn holds(&self, state: &[u64]) -> bool {
        self.blocked.iter().all(|cube| !cube.iter().all(|b| b.holds(state)))
    }

    pub fn to_term(&self, ts: &TransitionSystem) -> Term {
        let clauses: Vec<Term> = self
            .blocked
            .iter()
            .map(|cube| {
                let lits: Vec<Term> = cube.iter().map(|b| b.term(ts)).collect();
                Term::and_all(&lits).not()
            })
            .collect();
        Term::and_all(&clauses)
    }
}
