use std::collections::BTreeSet;

use super::*;
use crate::encode::{
    encode_speculative, fence_sites, GuardedUpdate, InputVar, Meta, PcTable, Placement, SpecMode, StateVar, VarKind,
};
use crate::ir::{parse_program, FIG1_SOURCE};
use crate::logic::{check_sat, explicit_reachable, Reachability, Term, VarId, DEFAULT_STATE_BUDGET};
use crate::threat::{compute_vinst, ThreatModel};

fn fig1(active: &[&str]) -> TransitionSystem {
    let p = parse_program(FIG1_SOURCE).unwrap();
    let v = compute_vinst(&p, ThreatModel::Classical);
    let sites = fence_sites(&p, &v, Placement::AfterBranch);
    let act = active.iter().map(|s| s.to_string()).collect();
    encode_speculative(&p, &v, &sites, SpecMode::Unbounded, &act).unwrap()
}

fn checked(ts: &TransitionSystem) -> Engine {
    Engine::new(ts, EngineOptions { check_frames: true, ..Default::default() }).unwrap()
}

/// A counter `pc` (2 bits) that climbs to 2 and stays, a free frozen bit `f`,
/// and a free-running 2-bit `x` driven by an input. Bad is `pc = 3`.
fn toy() -> TransitionSystem {
    let vars = vec![
        StateVar { name: "pc".into(), kind: VarKind::Pc, width: 2 },
        StateVar { name: "f".into(), kind: VarKind::Data, width: 1 },
        StateVar { name: "x".into(), kind: VarKind::Data, width: 2 },
    ];
    let pc = Term::var(VarId(0), 2);
    let inp = Term::var(VarId(3), 2);
    let climb = pc.ult(&Term::constant(2, 2));
    let trans = vec![
        GuardedUpdate {
            name: "climb".into(),
            guard: climb.clone(),
            updates: vec![(VarId(0), pc.add(&Term::constant(1, 2))), (VarId(2), inp.clone())],
        },
        GuardedUpdate { name: "stay".into(), guard: climb.not(), updates: vec![(VarId(2), inp)] },
    ];
    TransitionSystem {
        vars,
        inputs: vec![InputVar { name: "in".into(), width: 2 }],
        init: vec![(VarId(0), 0)],
        trans,
        bad: pc.eq_const(3),
        meta: Meta {
            program: "toy".into(),
            pc: PcTable { width: 2, n_labels: 3, assertion: Default::default() },
            mode: None,
            vinst: BTreeSet::new(),
            sites: Vec::new(),
        },
        pc: VarId(0),
        spec: None,
    }
}

#[test]
fn fig1_leak_matches_explicit_oracle() {
    let ts = fig1(&[]);
    let mut e = checked(&ts);
    let t = match e.run().unwrap() {
        Verdict::Unsafe(t) => t,
        Verdict::Safe(_) => panic!("fig1 leaks"),
    };
    assert!(t.check_counterexample(&ts).is_ok());
    let Reachability::Unsafe(oracle) = explicit_reachable(&ts, DEFAULT_STATE_BUDGET) else { panic!() };
    assert_eq!(t.points(&ts).first(), oracle.points(&ts).first());
    assert_eq!(t.points(&ts).last(), oracle.points(&ts).last());
    assert_eq!(ts.spec_value(&t.states[0]), 0);
    assert!(ts.spec_value(t.last()) > 0);
    assert!(t.split_point(&ts).is_ok());
}

#[test]
fn fig1_then_fence_is_safe_with_strong_invariant() {
    let ts = fig1(&["then@L0"]);
    let mut e = checked(&ts);
    let inv = match e.run().unwrap() {
        Verdict::Safe(inv) => inv,
        Verdict::Unsafe(t) => panic!("unexpected leak {}", t.render(&ts)),
    };
    let pc = Term::var(ts.pc_var(), ts.width_of(ts.pc_var()));
    let spec = ts.spec_var().unwrap();
    let a2 = ts.meta.pc.entry(crate::ir::Label(2));
    let pre_bad = pc.eq_const(a2).and(&Term::var(spec, ts.width_of(spec)).ne(&Term::constant(0, ts.width_of(spec))));
    assert!(!check_sat(&inv.to_term(&ts).and(&pre_bad)).unwrap().is_sat());
    assert!(!check_sat(&inv.to_term(&ts).and(&ts.bad)).unwrap().is_sat());
    assert!(check_sat(&ts.init_formula().and(&inv.to_term(&ts).not())).unwrap() == crate::logic::SatResult::Unsat);
}

#[test]
fn false_bad_is_safe_immediately() {
    let mut ts = fig1(&[]);
    ts.bad = Term::ff();
    let mut e = pdr_init(&ts).unwrap();
    assert_eq!(pdr_step(&mut e).unwrap(), Step::Safe);
    assert!(e.level() <= 1);
    assert!(extract_invariant(&e).unwrap().is_empty());
}

#[test]
fn require_violation() {
    let mut ts = fig1(&[]);
    ts.bad = Term::tt();
    assert_eq!(pdr_init(&ts).unwrap_err(), PdrError::RequireViolated);
}

#[test]
fn invariant_needs_safe() {
    let e = pdr_init(&fig1(&[])).unwrap();
    assert_eq!(extract_invariant(&e).unwrap_err(), PdrError::NotSafe);
}

#[test]
fn rule_log_lines() {
    use std::sync::{Arc, Mutex};
    let lines = Arc::new(Mutex::new(Vec::new()));
    let sink = lines.clone();
    let mut e = pdr_init(&fig1(&["then@L0"])).unwrap();
    e.set_sink(Some(Box::new(move |ev| sink.lock().unwrap().push(ev.to_string()))));
    assert!(e.run().unwrap().is_safe());
    let lines = lines.lock().unwrap();
    assert!(lines.iter().any(|l| l.starts_with("Unfold ")));
    assert!(lines.last().unwrap().starts_with("Safe "));
    assert!(lines.iter().all(|l| l.split(' ').count() == 3));
}

#[test]
fn revalidation_keeps_frames_sound() {
    let ts = fig1(&[]);
    let mut e = checked(&ts);
    let leak = loop {
        if let Step::LeakFound(h) = e.step().unwrap() {
            break h;
        }
    };
    e.reconstruct(leak).unwrap();
    e.reset_q();
    e.reset_reach();
    let fenced = ts.add_fence("then@L0").unwrap();
    let before = e.lemma_count();
    let r = e.revalidate(&fenced).unwrap();
    assert_eq!(r.kept + r.dropped, before);
    e.check_frames().unwrap();
    assert!(e.run().unwrap().is_safe());
}

#[test]
fn generalize_drops_frozen_bit() {
    let ts = toy();
    let bits = BitSystem::compile(&ts);
    let init = bits.init_cube();
    let pc3_f1 = Cube::new(vec![
        BitLit { latch: 0, value: true },
        BitLit { latch: 1, value: true },
        BitLit { latch: 2, value: true },
    ]);
    let g = generalize(&bits, &pc3_f1, &[], &init).unwrap();
    assert_eq!(g, Cube::new(vec![BitLit { latch: 0, value: true }, BitLit { latch: 1, value: true }]));
    // already minimal
    assert_eq!(generalize(&bits, &g, &[], &init).unwrap(), g);
    // pc = 1 has a predecessor outside it
    let pc1 = Cube::new(vec![BitLit { latch: 0, value: true }, BitLit { latch: 1, value: false }]);
    assert_eq!(generalize(&bits, &pc1, &[], &init).unwrap_err(), PdrError::Precondition);
}

/// Relative inductiveness of the negation of `c` (w.r.t. `true`) and
/// disjointness from Init, by enumerating the toy system's states.
fn inductive_by_enumeration(ts: &TransitionSystem, bits: &BitSystem, c: &Cube) -> bool {
    let n = bits.latches.len();
    let states: Vec<Vec<bool>> = (0..1u32 << n).map(|m| (0..n).map(|i| m >> i & 1 == 1).collect()).collect();
    let word = |b: &[bool]| {
        let mut s = vec![0u64; ts.vars.len()];
        for (i, l) in bits.latches.iter().enumerate() {
            s[l.var.0 as usize] |= (b[i] as u64) << l.bit;
        }
        s
    };
    if states.iter().any(|b| c.contains_bits(b) && ts.is_init(&word(b))) {
        return false;
    }
    for b in &states {
        if c.contains_bits(b) {
            continue;
        }
        for inp in 0..4u64 {
            let next = ts.step(&word(b), &[inp]);
            if c.contains_bits(&bits.state_bits(&next)) {
                return false;
            }
        }
    }
    true
}

#[test]
fn generalize_is_one_minimal_against_enumeration() {
    let ts = toy();
    let bits = BitSystem::compile(&ts);
    let init = bits.init_cube();
    let n = bits.latches.len() as u32;
    // every full-state cube whose negation is inductive
    for m in 0..1u32 << n {
        let full = Cube::new((0..n).map(|i| BitLit { latch: i, value: m >> i & 1 == 1 }).collect());
        if !inductive_by_enumeration(&ts, &bits, &full) {
            continue;
        }
        let g = generalize(&bits, &full, &[], &init).unwrap();
        assert!(g.lits().iter().all(|l| full.lits().contains(l)));
        assert!(inductive_by_enumeration(&ts, &bits, &g), "{g}");
        for k in 0..g.len() {
            assert!(!inductive_by_enumeration(&ts, &bits, &g.without(k)), "{g} is not minimal");
        }
        // only pc matters for unreachability here
        assert!(g.lits().iter().all(|l| l.latch < 2), "{g}");
    }
}
