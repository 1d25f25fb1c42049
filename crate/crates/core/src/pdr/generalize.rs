use super::solver::{FrameSolver, Query};
use super::PdrError;
use crate::logic::{BitLit, BitSystem, Cube};

/// Remove literals from `c` while `attempt` accepts the smaller cube.
/// `attempt` may answer with a further-shrunk cube. Ends when a full pass
/// drops nothing, so no single literal of the result can be removed.
pub(crate) fn drop_literals<E>(
    mut c: Cube,
    mut attempt: impl FnMut(&Cube) -> Result<Option<Cube>, E>,
) -> Result<Cube, E> {
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < c.len() {
            match attempt(&c.without(i))? {
                Some(smaller) => {
                    c = smaller;
                    changed = true;
                }
                None => i += 1,
            }
        }
        if !changed {
            return Ok(c);
        }
    }
}

/// Add back a literal of `from` that conflicts with `init` if `c` meets it.
pub(crate) fn avoid_init(c: Cube, from: &Cube, init: &Cube) -> Cube {
    if !c.intersects(init) {
        return c;
    }
    let l = from
        .lits()
        .iter()
        .find(|l| init.lits().iter().any(|i| i.latch == l.latch && i.value != l.value))
        .expect("source cube avoids Init");
    let mut lits: Vec<BitLit> = c.lits().to_vec();
    lits.push(*l);
    Cube::new(lits)
}

/// Shrink `c` to a sub-cube whose negation is still inductive relative to
/// the conjunction of the negated `relative_to` cubes and still excludes
/// `init`.
pub fn generalize(bits: &BitSystem, c: &Cube, relative_to: &[Cube], init: &Cube) -> Result<Cube, PdrError> {
    let all: Vec<usize> = (0..bits.latches.len()).collect();
    let mut s = FrameSolver::new(bits, &all, init, 0, None);
    for r in relative_to {
        s.add_lemma(r, Some(1));
    }
    let f = s.frame(1, 1);
    let mut q = 0u64;
    let mut inductive = |d: &Cube, s: &mut FrameSolver| -> Result<Option<Cube>, PdrError> {
        if d.is_empty() || d.intersects(init) {
            return Ok(None);
        }
        match s.rel_ind(bits, d, &f, true, &mut q)? {
            Query::Unsat(core) => Ok(Some(avoid_init(core, d, init))),
            Query::Sat { .. } => Ok(None),
        }
    };
    if inductive(c, &mut s)?.is_none() {
        return Err(PdrError::Precondition);
    }
    drop_literals(c.clone(), |d| inductive(d, &mut s))
}
