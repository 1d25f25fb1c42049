mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specfence::encode::SpecMode;
use specfence::encode::TransitionSystem;
use specfence::ir::{parse_program, pretty_print};
use specfence::logic::{
    bmc, check_sat, explicit_reachable, mask, Op, Reachability, SatResult, Term, VarId, DEFAULT_STATE_BUDGET,
};
use specfence::pdr::{verify, Verdict};
use specfence::threat::{compute_vinst, taint_map_with_order, ThreatModel, WorklistOrder};

const CASES: u32 = 1000;

const WIDTHS: [u32; 3] = [2, 3, 1];

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(|i| Term::var(VarId(i as u32), WIDTHS[i])),
        (0u64..8, 1u32..4).prop_map(|(c, w)| Term::constant(c & mask(w), w)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let ops = prop::sample::select(vec![Op::Add, Op::Sub, Op::Mul, Op::And, Op::Or, Op::Xor]);
        prop_oneof![
            (inner.clone(), inner.clone(), ops).prop_map(|(a, b, op)| {
                let w = a.width().max(b.width());
                Term::bin(op, &fit(&a, w), &fit(&b, w))
            }),
            inner.clone().prop_map(|a| a.not()),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, a, b)| {
                let w = a.width().max(b.width());
                Term::ite(&fit(&c, 1), &fit(&a, w), &fit(&b, w))
            }),
        ]
    })
}

fn fit(t: &Term, w: u32) -> Term {
    match t.width().cmp(&w) {
        std::cmp::Ordering::Less => t.zext(w),
        std::cmp::Ordering::Greater => t.trunc(w),
        std::cmp::Ordering::Equal => t.clone(),
    }
}

fn arb_formula() -> impl Strategy<Value = Term> {
    let rel = prop::sample::select(vec!["eq", "ult", "ule"]);
    (arb_term(), arb_term(), rel, any::<bool>()).prop_map(|(a, b, r, neg)| {
        let w = a.width().max(b.width());
        let (a, b) = (fit(&a, w), fit(&b, w));
        let f = match r {
            "eq" => a.eq(&b),
            "ult" => a.ult(&b),
            _ => a.ule(&b),
        };
        if neg {
            f.not()
        } else {
            f
        }
    })
}

fn brute_force_sat(f: &Term) -> bool {
    let total: u32 = WIDTHS.iter().sum();
    (0u64..1 << total).any(|bits| {
        let env = [bits & 3, (bits >> 2) & 7, bits >> 5];
        f.eval(&env) == 1
    })
}

fn system_for(
    src: &str,
    threat: ThreatModel,
    cfg: &specfence::bench::Config,
) -> Option<(specfence::ir::Program, TransitionSystem)> {
    let p = parse_program(src).ok()?;
    let ts = speculative(&p, threat, cfg, &BTreeSet::new());
    Some((p, ts))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn check_sat_agrees_with_enumeration(f in arb_formula()) {
        match check_sat(&f).unwrap() {
            SatResult::Sat(m) => prop_assert_eq!(m.eval(&f), 1),
            SatResult::Unsat => prop_assert!(!brute_force_sat(&f)),
        }
    }

    #[test]
    fn print_then_parse_is_identity(src in arb_program()) {
        let p = parse_program(&src);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        let again = parse_program(&pretty_print(&p)).unwrap();
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(pretty_print(&again), pretty_print(&p));
    }

    #[test]
    fn taint_is_order_independent_and_classical_is_weaker(src in arb_program()) {
        let p = parse_program(&src);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        prop_assert_eq!(taint_map_with_order(&p, WorklistOrder::Fifo), taint_map_with_order(&p, WorklistOrder::Lifo));
        let classical = compute_vinst(&p, ThreatModel::Classical);
        let strong = compute_vinst(&p, ThreatModel::Strong);
        prop_assert!(classical.labels.is_subset(&strong.labels));
        prop_assert!(strong.labels.iter().all(|l| p.inst(*l).is_some_and(|i| i.is_memory())));
    }

    #[test]
    fn pdr_verdict_matches_explicit_search(src in arb_program(), threat in arb_threat(), cfg in arb_config()) {
        let sys = system_for(&src, threat, &cfg);
        prop_assume!(sys.is_some());
        let (_, ts) = sys.unwrap();
        let reach = explicit_reachable(&ts, DEFAULT_STATE_BUDGET);
        let explicit = reach.is_safe();
        prop_assume!(explicit.is_some());
        if let Reachability::Unsafe(t) = &reach {
            // shortest leak has the same depth under unrolling
            let depth = t.len() - 1;
            prop_assert_eq!(bmc(&ts, depth).map(|b| b.len()), Some(t.len()));
            if depth > 0 {
                prop_assert!(bmc(&ts, depth - 1).is_none());
            }
        }
        match verify(&ts).unwrap() {
            Verdict::Safe(inv) => {
                prop_assert_eq!(explicit, Some(true));
                let mut start = vec![0; ts.num_vars()];
                for (v, c) in &ts.init {
                    start[v.0 as usize] = *c;
                }
                prop_assert!(inv.holds(&start));
            }
            Verdict::Unsafe(t) => {
                prop_assert_eq!(explicit, Some(false));
                prop_assert_eq!(t.check_counterexample(&ts), Ok(()));
                prop_assert!(spec_shape(&t, &ts).is_ok(), "{}", t.render(&ts));
            }
        }
    }

    #[test]
    fn transitions_are_total_exclusive_and_saturate(
        src in arb_program(),
        threat in arb_threat(),
        cfg in arb_config(),
        fence_bits in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let sys = system_for(&src, threat, &cfg);
        prop_assume!(sys.is_some());
        let (_, open) = sys.unwrap();
        let mut ts = open;
        for (i, site) in ts.meta.sites.clone().iter().enumerate() {
            if fence_bits >> (i % 64) & 1 == 1 {
                ts = ts.add_fence(&site.id).unwrap();
            }
        }
        let guards: Vec<Term> = ts.trans.iter().map(|g| g.guard.clone()).collect();
        prop_assert!(!check_sat(&Term::or_all(&guards).not()).unwrap().is_sat());
        for (i, a) in guards.iter().enumerate() {
            for b in &guards[i + 1..] {
                prop_assert!(!check_sat(&a.and(b)).unwrap().is_sat());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ts.var_id("spec").unwrap();
        for _ in 0..16 {
            let mut env: Vec<u64> = ts.vars.iter().map(|v| rng.gen::<u64>() & mask(v.width)).collect();
            env.extend(ts.inputs.iter().map(|v| rng.gen::<u64>() & mask(v.width)));
            prop_assert_eq!(guards.iter().filter(|g| g.eval(&env) == 1).count(), 1);
            if let SpecMode::Bounded(k) = cfg.mode {
                let n = ts.vars.len();
                env[spec.0 as usize] = k as u64;
                prop_assert_eq!(ts.step(&env[..n], &env[n..]), env[..n].to_vec());
            }
        }
        // the window never overflows along a run
        if let SpecMode::Bounded(k) = cfg.mode {
            let mut s: Vec<u64> = ts.vars.iter().map(|v| rng.gen::<u64>() & mask(v.width)).collect();
            for (v, c) in &ts.init {
                s[v.0 as usize] = *c;
            }
            for _ in 0..32 {
                let u: Vec<u64> = ts.inputs.iter().map(|v| rng.gen::<u64>() & mask(v.width)).collect();
                s = ts.step(&s, &u);
                prop_assert!(ts.spec_value(&s) <= k as u64);
            }
        }
    }

    #[test]
    fn repair_kills_each_leak_and_keeps_behaviour(src in arb_program(), threat in arb_threat(), cfg in arb_config(), seed in 0u64..1000) {
        let p = parse_program(&src);
        prop_assume!(p.is_ok());
        if let Err(e) = check_repair(&p.unwrap(), threat, &cfg, seed) {
            return Err(TestCaseError::fail(e));
        }
    }
}
