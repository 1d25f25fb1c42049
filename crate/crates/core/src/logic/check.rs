use std::collections::BTreeMap;

use thiserror::Error;

use super::aig::{Aig, Blaster, Word};
use super::bits::Tseitin;
use super::sat::{Lit, Solver};
use super::term::{Term, VarId};

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("solver conflict budget of {0} exhausted")]
pub struct ResourceError(pub u64);

/// Values for every variable occurring in the query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub values: BTreeMap<VarId, u64>,
}

impl Model {
    pub fn get(&self, v: VarId) -> u64 {
        self.values.get(&v).copied().unwrap_or(0)
    }

    pub fn eval(&self, t: &Term) -> u64 {
        let n = self.values.keys().next_back().map_or(0, |v| v.0 as usize + 1);
        let mut env = vec![0u64; n.max(t.vars().iter().next_back().map_or(0, |v| v.0 as usize + 1))];
        for (v, x) in &self.values {
            env[v.0 as usize] = *x;
        }
        t.eval(&env)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

pub fn check_sat(f: &Term) -> Result<SatResult, ResourceError> {
    check_sat_with(f, None, 0)
}

/// Decide a width-1 term by bit-blasting and CDCL.
pub fn check_sat_with(f: &Term, conflict_budget: Option<u64>, seed: u64) -> Result<SatResult, ResourceError> {
    assert_eq!(f.width(), 1, "formula must be boolean");
    let mut aig = Aig::new();
    let mut words: BTreeMap<VarId, Word> = BTreeMap::new();
    let root = Blaster::new(&mut aig)
        .blast(f, &mut |g, v, w| words.entry(v).or_insert_with(|| (0..w).map(|_| g.input()).collect()).clone())[0];
    let mut s = Solver::new(seed);
    s.set_conflict_budget(conflict_budget);
    let mut cnf = Tseitin::new();
    let r = cnf.lit(&mut s, &aig, root);
    s.add_clause(&[r]);
    let mut word_lits: Vec<(VarId, Vec<Lit>)> = Vec::new();
    for (v, w) in &words {
        word_lits.push((*v, w.iter().map(|&b| cnf.lit(&mut s, &aig, b)).collect()));
    }
    match s.solve(&[]) {
        None => Err(ResourceError(conflict_budget.unwrap_or(0))),
        Some(false) => Ok(SatResult::Unsat),
        Some(true) => {
            let values = word_lits
                .into_iter()
                .map(|(v, ls)| (v, ls.iter().enumerate().map(|(i, &l)| (s.model_value(l) as u64) << i).sum()))
                .collect();
            let m = Model { values };
            debug_assert_eq!(m.eval(f), 1, "model does not satisfy the query");
            Ok(SatResult::Sat(m))
        }
    }
}
