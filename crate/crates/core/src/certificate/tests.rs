use std::collections::BTreeSet;

use super::*;
use crate::encode::{encode_speculative, fence_sites, Placement, SpecMode};
use crate::ir::{parse_program, FIG1_SOURCE};
use crate::logic::{check_sat, Term};
use crate::pdr::{verify, Verdict as PdrVerdict};
use crate::threat::{compute_vinst, ThreatModel};

fn fig1(active: &[&str]) -> TransitionSystem {
    let p = parse_program(FIG1_SOURCE).unwrap();
    let v = compute_vinst(&p, ThreatModel::Strong);
    let sites = fence_sites(&p, &v, Placement::AfterBranch);
    let act: BTreeSet<String> = active.iter().map(|s| s.to_string()).collect();
    encode_speculative(&p, &v, &sites, SpecMode::Unbounded, &act).unwrap()
}

fn safe_fig1() -> (TransitionSystem, Invariant) {
    let ts = fig1(&["then@L0"]);
    match verify(&ts).unwrap() {
        PdrVerdict::Safe(inv) => (ts, inv),
        PdrVerdict::Unsafe(_) => panic!("then@L0 closes the leak"),
    }
}

fn internal(text: &str) -> Verdict {
    check_certificate(text, &Oracle::Internal).unwrap()
}

/// Independent word-level check of the three conditions.
fn word_level(ts: &TransitionSystem, inv: &Invariant) -> Option<Condition> {
    let i = inv.to_term(ts);
    if check_sat(&ts.init_formula().and(&i.not())).unwrap().is_sat() {
        return Some(Condition::Initiation);
    }
    // Inv over the next-state functions of state and inputs
    let next = ts.next_terms();
    let clauses: Vec<Term> = inv
        .blocked
        .iter()
        .map(|cube| {
            let lits: Vec<Term> = cube
                .iter()
                .map(|b| {
                    let t = &next[b.var.0 as usize];
                    let m = 1u64 << b.bit;
                    t.and(&Term::constant(m, t.width())).eq_const(if b.value { 0 } else { m })
                })
                .collect();
            Term::or_all(&lits)
        })
        .collect();
    let primed = Term::and_all(&clauses);
    if check_sat(&i.and(&primed.not())).unwrap().is_sat() {
        return Some(Condition::Consecution);
    }
    if check_sat(&i.and(&ts.bad)).unwrap().is_sat() {
        return Some(Condition::Safety);
    }
    None
}

#[test]
fn pdr_invariant_passes() {
    let (ts, inv) = safe_fig1();
    let text = export_certificate(&ts, &inv);
    assert_eq!(internal(&text), Verdict::Pass);
    assert_eq!(word_level(&ts, &inv), None);
}

#[test]
fn print_parse_round_trip() {
    let (ts, inv) = safe_fig1();
    let text = export_certificate_noted(&ts, &inv, &["threat strong".into()]);
    assert_eq!(parse_script(&text).unwrap().to_string(), text);
    assert!(text.contains("; threat strong"));
    assert!(text.contains("; fences then@L0"));
    assert_eq!(text.matches("(check-sat)").count(), 3);
}

#[test]
fn trivial_invariant_fails_safety_with_witness() {
    let (ts, _) = safe_fig1();
    let text = export_certificate(&ts, &Invariant::truth());
    let Verdict::Fail { condition, witness } = internal(&text) else { panic!() };
    assert_eq!(condition, Condition::Safety);
    assert!(!witness.is_empty());
    assert_eq!(word_level(&ts, &Invariant::truth()), Some(Condition::Safety));
}

#[test]
fn empty_clause_fails_initiation() {
    let (ts, _) = safe_fig1();
    let inv = Invariant { blocked: vec![Vec::new()] };
    let Verdict::Fail { condition, .. } = internal(&export_certificate(&ts, &inv)) else { panic!() };
    assert_eq!(condition, Condition::Initiation);
}

#[test]
fn invariant_for_other_system_fails() {
    // the fenced invariant does not hold once the fence is gone
    let (_, inv) = safe_fig1();
    let leaky = fig1(&[]);
    let got = internal(&export_certificate(&leaky, &inv));
    assert!(!got.passed());
    let Verdict::Fail { condition, .. } = got else { unreachable!() };
    assert_eq!(Some(condition), word_level(&leaky, &inv));
}

#[test]
fn every_lemma_deletion_of_minimal_invariant_is_caught() {
    let (ts, inv) = safe_fig1();
    let min = minimize_invariant(&ts, &inv);
    assert!(min.len() <= inv.len());
    assert_eq!(internal(&export_certificate(&ts, &min)), Verdict::Pass);
    for k in 0..min.blocked.len() {
        let mut m = min.clone();
        m.blocked.remove(k);
        let got = internal(&export_certificate(&ts, &m));
        assert!(!got.passed(), "removing lemma {k} went unnoticed");
        let Verdict::Fail { condition, .. } = got else { unreachable!() };
        assert_eq!(Some(condition), word_level(&ts, &m));
    }
}

#[test]
fn literal_flips_agree_with_word_level_check() {
    let (ts, inv) = safe_fig1();
    for (c, cube) in inv.blocked.iter().enumerate() {
        for l in 0..cube.len() {
            let mut m = inv.clone();
            m.blocked[c][l].value = !m.blocked[c][l].value;
            let got = internal(&export_certificate(&ts, &m));
            let expect = word_level(&ts, &m);
            match got {
                Verdict::Pass => assert_eq!(expect, None),
                Verdict::Fail { condition, .. } => assert_eq!(Some(condition), expect),
            }
        }
    }
}

#[test]
fn tampered_scripts_are_rejected() {
    let (ts, inv) = safe_fig1();
    let text = export_certificate(&ts, &inv);
    let cut = text.replacen("(check-sat)\n", "", 1);
    assert!(matches!(check_certificate(&cut, &Oracle::Internal), Err(CheckError::Unsupported(_))));
    let bad = text.replacen("(define-fun Init", "(define-fun Init (", 1);
    assert!(matches!(check_certificate(&bad, &Oracle::Internal), Err(CheckError::Parse(_))));
    let unknown = text.replacen("(define-fun Bad () Bool", "(define-fun Bad () Bool (bvadd", 1).replacen(
        "(define-fun Inv ",
        ") (define-fun Inv ",
        1,
    );
    assert!(check_certificate(&unknown, &Oracle::Internal).is_err());
}

#[test]
fn external_oracle_reads_answers() {
    let (ts, inv) = safe_fig1();
    let text = export_certificate(&ts, &inv);
    let pass = Oracle::External("cat >/dev/null; printf 'unsat\\nunsat\\nunsat\\n'".into());
    assert_eq!(check_certificate(&text, &pass).unwrap(), Verdict::Pass);
    let fail = Oracle::External("cat >/dev/null; printf 'unsat\\nsat\\nunsat\\n'".into());
    assert!(matches!(
        check_certificate(&text, &fail).unwrap(),
        Verdict::Fail { condition: Condition::Consecution, .. }
    ));
    let junk = Oracle::External("cat >/dev/null; echo unknown".into());
    assert!(matches!(check_certificate(&text, &junk), Err(CheckError::Oracle(_))));
}

#[test]
fn bad_term_constant_handled() {
    let (mut ts, _) = safe_fig1();
    ts.bad = Term::ff();
    assert_eq!(internal(&export_certificate(&ts, &Invariant::truth())), Verdict::Pass);
}
