use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

use super::sexp::{parse_script, ParseError, Script, Sexp};
use super::Condition;
use crate::logic::aig::{Aig, AigLit};
use crate::logic::sat::{Lit, Solver};
use crate::logic::Tseitin;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unsupported certificate: {0}")]
    Unsupported(String),
    #[error("external solver: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Oracle {
    Internal,
    /// A shell command reading SMT-LIB2 on standard input.
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// The first failing condition, with a satisfying assignment of the
    /// declared symbols when the oracle provides one.
    Fail {
        condition: Condition,
        witness: Vec<(String, bool)>,
    },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        *self == Verdict::Pass
    }
}

pub fn check_certificate(text: &str, oracle: &Oracle) -> Result<Verdict, CheckError> {
    match oracle {
        Oracle::Internal => check_script(&parse_script(text)?),
        Oracle::External(cmd) => external(text, cmd),
    }
}

fn verdict(answers: &[(bool, Vec<(String, bool)>)]) -> Result<Verdict, CheckError> {
    if answers.len() != 3 {
        return Err(CheckError::Unsupported(format!("expected 3 checks, found {}", answers.len())));
    }
    for (sat, w) in answers {
        if *sat {
            let condition = Condition::ALL[answers.iter().position(|a| a.0).unwrap()];
            return Ok(Verdict::Fail { condition, witness: w.clone() });
        }
    }
    Ok(Verdict::Pass)
}

struct Interp {
    aig: Aig,
    symbols: HashMap<String, AigLit>,
    declared: Vec<(String, AigLit)>,
    scopes: Vec<Vec<AigLit>>,
}

fn unsupported(what: impl std::fmt::Display) -> CheckError {
    CheckError::Unsupported(what.to_string())
}

impl Interp {
    fn expr(&mut self, e: &Sexp) -> Result<AigLit, CheckError> {
        match e {
            Sexp::Atom(a) => match a.as_str() {
                "true" => Ok(AigLit::TRUE),
                "false" => Ok(AigLit::FALSE),
                _ => self.symbols.get(a).copied().ok_or_else(|| unsupported(format!("unknown symbol `{a}`"))),
            },
            Sexp::List(items) => {
                let head = items.first().and_then(Sexp::as_atom).ok_or_else(|| unsupported(format!("bad term {e}")))?;
                let args = items[1..].iter().map(|x| self.expr(x)).collect::<Result<Vec<_>, _>>()?;
                let arity = |n: usize| {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(unsupported(format!("`{head}` takes {n} arguments")))
                    }
                };
                Ok(match head {
                    "not" => {
                        arity(1)?;
                        !args[0]
                    }
                    "and" => self.aig.and_all(args),
                    "or" => self.aig.or_all(args),
                    "xor" => {
                        arity(2)?;
                        self.aig.xor(args[0], args[1])
                    }
                    "=>" => {
                        arity(2)?;
                        self.aig.or(!args[0], args[1])
                    }
                    "=" => {
                        arity(2)?;
                        self.aig.xnor(args[0], args[1])
                    }
                    "ite" => {
                        arity(3)?;
                        self.aig.ite(args[0], args[1], args[2])
                    }
                    _ => return Err(unsupported(format!("operator `{head}`"))),
                })
            }
        }
    }

    fn solve(&self) -> (bool, Vec<(String, bool)>) {
        let mut s = Solver::new(0);
        let mut cnf = Tseitin::new();
        for scope in &self.scopes {
            for &a in scope {
                let l = cnf.lit(&mut s, &self.aig, a);
                s.add_clause(&[l]);
            }
        }
        let sat = s.solve(&[]) == Some(true);
        let witness = if sat {
            self.declared
                .iter()
                .map(|(n, l)| (n.clone(), cnf.var_of(l.node()).is_some_and(|v| s.model_value(Lit::pos(v)))))
                .collect()
        } else {
            Vec::new()
        };
        (sat, witness)
    }
}

fn no_args_bool(items: &[Sexp], what: &str) -> Result<String, CheckError> {
    let name = items.get(1).and_then(Sexp::as_atom).ok_or_else(|| unsupported(format!("{what} without a name")))?;
    if items.get(2).and_then(Sexp::as_list).is_none_or(|l| !l.is_empty())
        || items.get(3).and_then(Sexp::as_atom) != Some("Bool")
    {
        return Err(unsupported(format!("{what} `{name}` must be a Bool constant")));
    }
    Ok(name.to_string())
}

/// Decide every check of a parsed script with the internal solver.
pub fn check_script(sc: &Script) -> Result<Verdict, CheckError> {
    let mut it = Interp { aig: Aig::new(), symbols: HashMap::new(), declared: Vec::new(), scopes: vec![Vec::new()] };
    let mut answers = Vec::new();
    for cmd in sc.commands() {
        let items = cmd.as_list().ok_or_else(|| unsupported("top-level atom"))?;
        let head = items.first().and_then(Sexp::as_atom).unwrap_or("");
        match head {
            "set-logic" | "set-info" | "set-option" | "echo" | "exit" => {}
            "declare-fun" | "declare-const" => {
                let name = if head == "declare-fun" {
                    no_args_bool(items, "declaration")?
                } else {
                    match (items.get(1).and_then(Sexp::as_atom), items.get(2).and_then(Sexp::as_atom)) {
                        (Some(n), Some("Bool")) => n.to_string(),
                        _ => return Err(unsupported("declare-const must be Bool")),
                    }
                };
                let l = it.aig.input();
                it.symbols.insert(name.clone(), l);
                it.declared.push((name, l));
            }
            "define-fun" => {
                let name = no_args_bool(items, "definition")?;
                let body = items.get(4).ok_or_else(|| unsupported(format!("definition `{name}` has no body")))?;
                let l = it.expr(body)?;
                it.symbols.insert(name, l);
            }
            "push" => it.scopes.push(Vec::new()),
            "pop" => {
                if it.scopes.len() == 1 {
                    return Err(unsupported("pop without push"));
                }
                it.scopes.pop();
            }
            "assert" => {
                let l = it.expr(items.get(1).ok_or_else(|| unsupported("empty assert"))?)?;
                it.scopes.last_mut().unwrap().push(l);
            }
            "check-sat" => answers.push(it.solve()),
            _ => return Err(unsupported(format!("command `{head}`"))),
        }
    }
    verdict(&answers)
}

fn external(text: &str, cmd: &str) -> Result<Verdict, CheckError> {
    let oracle = |e: &dyn std::fmt::Display| CheckError::Oracle(format!("`{cmd}`: {e}"));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| oracle(&e))?;
    child.stdin.take().unwrap().write_all(text.as_bytes()).map_err(|e| oracle(&e))?;
    let out = child.wait_with_output().map_err(|e| oracle(&e))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut answers = Vec::new();
    for line in stdout.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match line {
            "sat" => answers.push((true, Vec::new())),
            "unsat" => answers.push((false, Vec::new())),
            other => return Err(oracle(&format!("unexpected answer `{other}`"))),
        }
    }
    verdict(&answers)
}
