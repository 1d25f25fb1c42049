//! Safety certificates: the system and an inductive invariant as a
//! bit-level SMT-LIB2 script with three unsatisfiability checks, plus an
//! independent checker for such scripts.
//!
//! Check 1 is initiation (`Init ∧ ¬Inv`), check 2 consecution
//! (`Inv ∧ Tr ∧ ¬Inv′`), check 3 safety (`Inv ∧ Bad`). Each must be unsat.

mod check;
mod sexp;

use std::collections::BTreeMap;
use std::fmt;

use crate::encode::TransitionSystem;
use crate::logic::aig::{AigLit, AigNode};
use crate::logic::bits::Role;
use crate::logic::BitSystem;
use crate::pdr::{Invariant, StateBit};

pub use check::{check_certificate, check_script, CheckError, Oracle, Verdict};
pub use sexp::{parse_script, Item, ParseError, Script, Sexp};

pub const EXTENSION: &str = ".cert.smt2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Initiation,
    Consecution,
    Safety,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Initiation, Condition::Consecution, Condition::Safety];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Initiation => "(i) Init -> Inv",
            Condition::Consecution => "(ii) Inv & Tr -> Inv'",
            Condition::Safety => "(iii) Inv -> !Bad",
        })
    }
}

fn cur(i: usize) -> String {
    format!("s{i}")
}

fn nxt(i: usize) -> String {
    format!("n{i}")
}

fn lit_of(s: &str, value: bool) -> Sexp {
    if value {
        Sexp::atom(s)
    } else {
        Sexp::app("not", vec![Sexp::atom(s)])
    }
}

fn conj(mut xs: Vec<Sexp>) -> Sexp {
    match xs.len() {
        0 => Sexp::atom("true"),
        1 => xs.pop().unwrap(),
        _ => Sexp::app("and", xs),
    }
}

fn bool_fun(name: &str, body: Sexp) -> Sexp {
    Sexp::app("define-fun", vec![Sexp::atom(name), Sexp::list(vec![]), Sexp::atom("Bool"), body])
}

/// Invariant over latch symbols chosen by `name`.
fn inv_sexp(bits: &BitSystem, inv: &Invariant, name: fn(usize) -> String) -> Sexp {
    let latch = |b: &StateBit| bits.var_bits[b.var.0 as usize][b.bit as usize];
    let clauses = inv
        .blocked
        .iter()
        .map(|cube| {
            let lits = cube.iter().map(|b| lit_of(&name(latch(b)), !b.value)).collect::<Vec<_>>();
            match lits.len() {
                0 => Sexp::atom("false"),
                1 => lits.into_iter().next().unwrap(),
                _ => Sexp::app("or", lits),
            }
        })
        .collect();
    conj(clauses)
}

/// Serialise `ts` and `inv` as a self-contained script.
pub fn export_certificate(ts: &TransitionSystem, inv: &Invariant) -> String {
    export_certificate_noted(ts, inv, &[])
}

/// As `export_certificate`, with extra header lines.
pub fn export_certificate_noted(ts: &TransitionSystem, inv: &Invariant, notes: &[String]) -> String {
    build_script(ts, inv, notes).to_string()
}

pub fn build_script(ts: &TransitionSystem, inv: &Invariant, notes: &[String]) -> Script {
    let bits = BitSystem::compile(ts);
    let mut sc = Script::default();
    sc.comment("safety certificate: three checks, each expected unsat");
    sc.comment(format!("program {}", ts.name()));
    if let Some(m) = ts.meta.mode {
        sc.comment(format!("mode {m}"));
    }
    for n in notes {
        sc.comment(n.clone());
    }
    let active: Vec<String> = ts.active_fences().into_iter().collect();
    sc.comment(format!("fences {}", if active.is_empty() { "-".to_string() } else { active.join(",") }));
    sc.comment("");
    sc.command(Sexp::app("set-logic", vec![Sexp::atom("QF_BV")]));

    sc.comment("state bits, least significant first: current / next");
    for (v, idx) in ts.vars.iter().zip(&bits.var_bits) {
        let c: Vec<String> = idx.iter().map(|&i| cur(i)).collect();
        let n: Vec<String> = idx.iter().map(|&i| nxt(i)).collect();
        sc.comment(format!("{} : {} / {}", v.name, c.join(" "), n.join(" ")));
    }
    sc.comment("input bits");
    for (v, idx) in ts.inputs.iter().zip(&bits.input_bits) {
        let c: Vec<String> = idx.iter().map(|&j| format!("x{j}")).collect();
        sc.comment(format!("{} : {}", v.name, c.join(" ")));
    }
    let declare = |sc: &mut Script, name: String| {
        sc.command(Sexp::app("declare-fun", vec![Sexp::atom(name), Sexp::list(vec![]), Sexp::atom("Bool")]));
    };
    for i in 0..bits.latches.len() {
        declare(&mut sc, cur(i));
    }
    for i in 0..bits.latches.len() {
        declare(&mut sc, nxt(i));
    }
    for j in 0..bits.inputs.len() {
        declare(&mut sc, format!("x{j}"));
    }

    sc.comment("gates of the next-state functions and of Bad");
    let roots: Vec<AigLit> = bits.latches.iter().map(|l| l.next).chain([bits.bad]).collect();
    let mut names: BTreeMap<u32, String> = BTreeMap::new();
    for node in bits.aig.cone(roots) {
        match bits.aig.node(node) {
            AigNode::False => {}
            AigNode::Input => {
                let n = match bits.role(node) {
                    Some(Role::Latch(i)) => cur(i),
                    Some(Role::Input(j)) => format!("x{j}"),
                    None => unreachable!("every input node is a latch or an input"),
                };
                names.insert(node, n);
            }
            AigNode::And(a, b) => {
                let name = format!("g{node}");
                let body = Sexp::app("and", vec![lit_sexp(&names, a), lit_sexp(&names, b)]);
                sc.command(bool_fun(&name, body));
                names.insert(node, name);
            }
        }
    }

    let init: Vec<Sexp> =
        bits.latches.iter().enumerate().filter_map(|(i, l)| l.init.map(|v| lit_of(&cur(i), v))).collect();
    sc.command(bool_fun("Init", conj(init)));
    let tr: Vec<Sexp> = bits
        .latches
        .iter()
        .enumerate()
        .map(|(i, l)| Sexp::app("=", vec![Sexp::atom(nxt(i)), lit_sexp(&names, l.next)]))
        .collect();
    sc.command(bool_fun("Tr", conj(tr)));
    sc.command(bool_fun("Bad", lit_sexp(&names, bits.bad)));
    sc.command(bool_fun("Inv", inv_sexp(&bits, inv, cur)));
    sc.command(bool_fun("InvNext", inv_sexp(&bits, inv, nxt)));

    let checks = [
        ("(i) initiation", Sexp::app("and", vec![Sexp::atom("Init"), Sexp::app("not", vec![Sexp::atom("Inv")])])),
        (
            "(ii) consecution",
            Sexp::app("and", vec![Sexp::atom("Inv"), Sexp::atom("Tr"), Sexp::app("not", vec![Sexp::atom("InvNext")])]),
        ),
        ("(iii) safety", Sexp::app("and", vec![Sexp::atom("Inv"), Sexp::atom("Bad")])),
    ];
    for (label, body) in checks {
        sc.comment(format!("{label}: expect unsat"));
        sc.command(Sexp::app("push", vec![Sexp::atom("1")]));
        sc.command(Sexp::app("assert", vec![body]));
        sc.command(Sexp::app("check-sat", vec![]));
        sc.command(Sexp::app("pop", vec![Sexp::atom("1")]));
    }
    sc
}

fn lit_sexp(names: &BTreeMap<u32, String>, l: AigLit) -> Sexp {
    if l.node() == 0 {
        return Sexp::atom(if l.is_negated() { "true" } else { "false" });
    }
    lit_of(&names[&l.node()], !l.is_negated())
}

/// Drop lemmas whose removal leaves an inductive invariant that still
/// excludes Bad, in order, so every remaining lemma is needed.
pub fn minimize_invariant(ts: &TransitionSystem, inv: &Invariant) -> Invariant {
    let mut cur = inv.clone();
    let mut i = 0;
    while i < cur.blocked.len() {
        let mut cand = cur.clone();
        cand.blocked.remove(i);
        let text = export_certificate(ts, &cand);
        match check_certificate(&text, &Oracle::Internal) {
            Ok(Verdict::Pass) => cur = cand,
            _ => i += 1,
        }
    }
    cur
}

#[cfg(test)]
mod tests;
