//! Bounded model checking by unrolling the next-state functions.

use super::aig::{const_word, Aig, Blaster, Word};
use super::bits::Tseitin;
use super::sat::{Lit, Solver};
use super::term::VarId;
use crate::encode::{Trace, TransitionSystem};

/// Shortest counterexample of at most `max_depth` steps, if any.
pub fn bmc(ts: &TransitionSystem, max_depth: usize) -> Option<Trace> {
    let next = ts.next_terms();
    let n = ts.vars.len();
    let mut aig = Aig::new();
    let mut frames: Vec<Vec<Word>> = Vec::new();
    let mut frame_inputs: Vec<Vec<Word>> = Vec::new();
    let first: Vec<Word> = ts
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| match ts.init_value(VarId(i as u32)) {
            Some(c) => const_word(c, v.width),
            None => (0..v.width).map(|_| aig.input()).collect(),
        })
        .collect();
    frames.push(first);
    let mut s = Solver::new(0);
    let mut cnf = Tseitin::new();

    for depth in 0..=max_depth {
        let cur = frames[depth].clone();
        let bad = {
            let mut bl = Blaster::new(&mut aig);
            bl.blast(&ts.bad, &mut |_, v, _| cur[v.0 as usize].clone())[0]
        };
        let bad_lit = cnf.lit(&mut s, &aig, bad);
        if s.solve(&[bad_lit]) == Some(true) {
            return Some(extract(ts, &aig, &mut cnf, &mut s, &frames, &frame_inputs, bad_lit));
        }
        if depth == max_depth {
            break;
        }
        let ins: Vec<Word> = ts.inputs.iter().map(|v| (0..v.width).map(|_| aig.input()).collect()).collect();
        let mut bl = Blaster::new(&mut aig);
        let succ: Vec<Word> = next
            .iter()
            .map(|t| {
                bl.blast(t, &mut |_, v, _| {
                    let i = v.0 as usize;
                    if i < n {
                        cur[i].clone()
                    } else {
                        ins[i - n].clone()
                    }
                })
            })
            .collect();
        frame_inputs.push(ins);
        frames.push(succ);
    }
    None
}

fn extract(
    ts: &TransitionSystem,
    aig: &Aig,
    cnf: &mut Tseitin,
    s: &mut Solver,
    frames: &[Vec<Word>],
    frame_inputs: &[Vec<Word>],
    bad_lit: Lit,
) -> Trace {
    // Encode every word first, then re-solve so the model covers them.
    let mut lits = |words: &[Word], s: &mut Solver| -> Vec<Vec<Lit>> {
        words.iter().map(|w| w.iter().map(|&b| cnf.lit(s, aig, b)).collect()).collect()
    };
    let input_lits: Vec<Vec<Vec<Lit>>> = frame_inputs.iter().map(|f| lits(f, s)).collect();
    let state0 = lits(&frames[0], s);
    assert_eq!(s.solve(&[bad_lit]), Some(true));
    let value = |ls: &[Lit]| ls.iter().enumerate().map(|(i, &l)| (s.model_value(l) as u64) << i).sum::<u64>();
    let inputs: Vec<Vec<u64>> = input_lits.iter().map(|f| f.iter().map(|w| value(w)).collect()).collect();
    let mut states = vec![state0.iter().map(|w| value(w)).collect::<Vec<u64>>()];
    for inp in &inputs {
        states.push(ts.step(states.last().unwrap(), inp));
    }
    Trace { states, inputs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{encode_speculative, fence_sites, Placement, SpecMode};
    use crate::ir::{parse_program, FIG1_SOURCE};
    use crate::threat::{compute_vinst, ThreatModel};

    #[test]
    fn fig1_bmc_depth_three() {
        let p = parse_program(FIG1_SOURCE).unwrap();
        let v = compute_vinst(&p, ThreatModel::Classical);
        let sites = fence_sites(&p, &v, Placement::AfterBranch);
        let ts = encode_speculative(&p, &v, &sites, SpecMode::Unbounded, &Default::default()).unwrap();
        let t = bmc(&ts, 10).expect("leak");
        assert_eq!(t.len(), 4);
        assert!(t.check_counterexample(&ts).is_ok());
        let fenced = ts.add_fence("then@L0").unwrap();
        assert!(bmc(&fenced, 8).is_none());
    }
}
