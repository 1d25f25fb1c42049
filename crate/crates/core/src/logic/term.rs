//! Word-level terms over fixed-width unsigned integers. Booleans are width-1
//! terms, so a formula is just a `Term` of width 1.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Eq,
    Ult,
    Ule,
}

impl Op {
    fn is_comparison(self) -> bool {
        matches!(self, Op::Eq | Op::Ult | Op::Ule)
    }

    fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::And => "&",
            Op::Or => "|",
            Op::Xor => "^",
            Op::Eq => "==",
            Op::Ult => "<",
            Op::Ule => "<=",
        }
    }
}

#[derive(Debug)]
pub enum Kind {
    Var(VarId),
    Const(u64),
    Not(Term),
    Bin(Op, Term, Term),
    Ite(Term, Term, Term),
    Zext(Term),
    Trunc(Term),
}

#[derive(Debug)]
pub struct TermNode {
    pub kind: Kind,
    pub width: u32,
}

#[derive(Debug, Clone)]
pub struct Term(Arc<TermNode>);

pub type Formula = Term;

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn fold(op: Op, a: u64, b: u64, w: u32) -> u64 {
    let m = mask(w);
    match op {
        Op::Add => a.wrapping_add(b) & m,
        Op::Sub => a.wrapping_sub(b) & m,
        Op::Mul => a.wrapping_mul(b) & m,
        Op::And => a & b,
        Op::Or => a | b,
        Op::Xor => a ^ b,
        Op::Eq => (a == b) as u64,
        Op::Ult => (a < b) as u64,
        Op::Ule => (a <= b) as u64,
    }
}

impl Term {
    fn mk(kind: Kind, width: u32) -> Term {
        debug_assert!((1..=64).contains(&width));
        Term(Arc::new(TermNode { kind, width }))
    }

    pub fn node(&self) -> &TermNode {
        &self.0
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    /// Address used to memoise DAG traversals.
    pub fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn same(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn var(id: VarId, width: u32) -> Term {
        Term::mk(Kind::Var(id), width)
    }

    pub fn constant(value: u64, width: u32) -> Term {
        Term::mk(Kind::Const(value & mask(width)), width)
    }

    pub fn tt() -> Term {
        Term::constant(1, 1)
    }

    pub fn ff() -> Term {
        Term::constant(0, 1)
    }

    pub fn bool(b: bool) -> Term {
        Term::constant(b as u64, 1)
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.kind() {
            Kind::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn not(&self) -> Term {
        if let Some(c) = self.as_const() {
            return Term::constant(!c, self.width());
        }
        if let Kind::Not(inner) = self.kind() {
            return inner.clone();
        }
        Term::mk(Kind::Not(self.clone()), self.width())
    }

    pub fn bin(op: Op, a: &Term, b: &Term) -> Term {
        assert_eq!(a.width(), b.width(), "operand widths differ for `{}`", op.name());
        let w = a.width();
        let out_w = if op.is_comparison() { 1 } else { w };
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Term::constant(fold(op, x, y, w), out_w);
        }
        let m = mask(w);
        match (op, a.as_const(), b.as_const()) {
            (Op::And, Some(0), _) | (Op::And, _, Some(0)) => return Term::constant(0, w),
            (Op::And, Some(c), _) if c == m => return b.clone(),
            (Op::And, _, Some(c)) if c == m => return a.clone(),
            (Op::Or, Some(c), _) | (Op::Or, _, Some(c)) if c == m => return Term::constant(m, w),
            (Op::Or, Some(0), _) | (Op::Xor, Some(0), _) | (Op::Add, Some(0), _) => return b.clone(),
            (Op::Or, _, Some(0)) | (Op::Xor, _, Some(0)) | (Op::Add, _, Some(0)) | (Op::Sub, _, Some(0)) => {
                return a.clone()
            }
            (Op::Mul, Some(0), _) | (Op::Mul, _, Some(0)) => return Term::constant(0, w),
            (Op::Mul, Some(1), _) => return b.clone(),
            (Op::Mul, _, Some(1)) => return a.clone(),
            (Op::Ule, Some(0), _) => return Term::tt(),
            (Op::Ule, _, Some(c)) if c == m => return Term::tt(),
            (Op::Ult, _, Some(0)) => return Term::ff(),
            (Op::Ult, Some(c), _) if c == m => return Term::ff(),
            (Op::Eq, _, Some(1)) if w == 1 => return a.clone(),
            (Op::Eq, Some(1), _) if w == 1 => return b.clone(),
            (Op::Eq, _, Some(0)) if w == 1 => return a.not(),
            (Op::Eq, Some(0), _) if w == 1 => return b.not(),
            _ => {}
        }
        if a.same(b) {
            match op {
                Op::And | Op::Or => return a.clone(),
                Op::Xor | Op::Sub => return Term::constant(0, w),
                Op::Eq | Op::Ule => return Term::tt(),
                Op::Ult => return Term::ff(),
                _ => {}
            }
        }
        Term::mk(Kind::Bin(op, a.clone(), b.clone()), out_w)
    }

    pub fn add(&self, o: &Term) -> Term {
        Term::bin(Op::Add, self, o)
    }
    pub fn sub(&self, o: &Term) -> Term {
        Term::bin(Op::Sub, self, o)
    }
    pub fn mul(&self, o: &Term) -> Term {
        Term::bin(Op::Mul, self, o)
    }
    pub fn and(&self, o: &Term) -> Term {
        Term::bin(Op::And, self, o)
    }
    pub fn or(&self, o: &Term) -> Term {
        Term::bin(Op::Or, self, o)
    }
    pub fn xor(&self, o: &Term) -> Term {
        Term::bin(Op::Xor, self, o)
    }
    pub fn eq(&self, o: &Term) -> Term {
        Term::bin(Op::Eq, self, o)
    }
    pub fn ult(&self, o: &Term) -> Term {
        Term::bin(Op::Ult, self, o)
    }
    pub fn ule(&self, o: &Term) -> Term {
        Term::bin(Op::Ule, self, o)
    }
    pub fn ne(&self, o: &Term) -> Term {
        self.eq(o).not()
    }

    pub fn eq_const(&self, c: u64) -> Term {
        self.eq(&Term::constant(c, self.width()))
    }

    pub fn implies(&self, o: &Term) -> Term {
        self.not().or(o)
    }

    pub fn iff(&self, o: &Term) -> Term {
        self.xor(o).not()
    }

    pub fn ite(c: &Term, a: &Term, b: &Term) -> Term {
        assert_eq!(c.width(), 1, "ite condition must be boolean");
        assert_eq!(a.width(), b.width(), "ite branch widths differ");
        match c.as_const() {
            Some(1) => return a.clone(),
            Some(_) => return b.clone(),
            None => {}
        }
        if a.same(b) {
            return a.clone();
        }
        if a.width() == 1 {
            match (a.as_const(), b.as_const()) {
                (Some(1), Some(0)) => return c.clone(),
                (Some(0), Some(1)) => return c.not(),
                (Some(0), _) => return c.not().and(b),
                (Some(1), _) => return c.or(b),
                (_, Some(0)) => return c.and(a),
                (_, Some(1)) => return c.not().or(a),
                _ => {}
            }
        }
        Term::mk(Kind::Ite(c.clone(), a.clone(), b.clone()), a.width())
    }

    pub fn zext(&self, w: u32) -> Term {
        assert!(w >= self.width());
        if w == self.width() {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            return Term::constant(c, w);
        }
        Term::mk(Kind::Zext(self.clone()), w)
    }

    pub fn trunc(&self, w: u32) -> Term {
        assert!(w <= self.width() && w >= 1);
        if w == self.width() {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            return Term::constant(c, w);
        }
        Term::mk(Kind::Trunc(self.clone()), w)
    }

    pub fn and_all<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Term {
        terms.into_iter().fold(Term::tt(), |acc, t| acc.and(t))
    }

    pub fn or_all<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Term {
        terms.into_iter().fold(Term::ff(), |acc, t| acc.or(t))
    }

    /// Evaluate with `env[v]` giving the value of variable `v`.
    pub fn eval(&self, env: &[u64]) -> u64 {
        let w = self.width();
        match self.kind() {
            Kind::Var(v) => env[v.0 as usize] & mask(w),
            Kind::Const(c) => *c,
            Kind::Not(a) => !a.eval(env) & mask(w),
            Kind::Bin(op, a, b) => fold(*op, a.eval(env), b.eval(env), a.width()),
            Kind::Ite(c, a, b) => {
                if c.eval(env) != 0 {
                    a.eval(env)
                } else {
                    b.eval(env)
                }
            }
            Kind::Zext(a) => a.eval(env),
            Kind::Trunc(a) => a.eval(env) & mask(w),
        }
    }

    /// Variables occurring in the term.
    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.ptr()) {
                continue;
            }
            match t.kind() {
                Kind::Var(v) => {
                    out.insert(*v);
                }
                Kind::Const(_) => {}
                Kind::Not(a) | Kind::Zext(a) | Kind::Trunc(a) => stack.push(a.clone()),
                Kind::Bin(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Kind::Ite(c, a, b) => {
                    stack.push(c.clone());
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        out
    }

    /// Render with caller-supplied variable names.
    pub fn display<'a>(&'a self, names: &'a dyn Fn(VarId) -> String) -> impl fmt::Display + 'a {
        TermDisplay { term: self, names }
    }
}

struct TermDisplay<'a> {
    term: &'a Term,
    names: &'a dyn Fn(VarId) -> String,
}

impl<'a> TermDisplay<'a> {
    fn child(&self, t: &'a Term) -> TermDisplay<'a> {
        TermDisplay { term: t, names: self.names }
    }
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |t| self.child(t);
        match self.term.kind() {
            Kind::Var(v) => f.write_str(&(self.names)(*v)),
            Kind::Const(c) => write!(f, "{c}"),
            Kind::Not(a) => write!(f, "~{}", sub(a)),
            Kind::Bin(op, a, b) => write!(f, "({} {} {})", sub(a), op.name(), sub(b)),
            Kind::Ite(c, a, b) => write!(f, "ite({}, {}, {})", sub(c), sub(a), sub(b)),
            Kind::Zext(a) => write!(f, "zext<{}>({})", self.term.width(), sub(a)),
            Kind::Trunc(a) => write!(f, "trunc<{}>({})", self.term.width(), sub(a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_arithmetic() {
        let x = Term::var(VarId(0), 4);
        let t = x.add(&Term::constant(1, 4));
        assert_eq!(t.eval(&[15]), 0);
        assert_eq!(x.mul(&Term::constant(3, 4)).eval(&[6]), 2);
        assert_eq!(x.sub(&Term::constant(1, 4)).eval(&[0]), 15);
    }

    #[test]
    fn constant_folding() {
        let a = Term::constant(7, 8);
        let b = Term::constant(9, 8);
        assert_eq!(a.add(&b).as_const(), Some(16));
        assert_eq!(a.ult(&b).as_const(), Some(1));
        let x = Term::var(VarId(0), 8);
        assert!(x.and(&Term::constant(0xff, 8)).same(&x));
        assert_eq!(x.ult(&Term::constant(0, 8)).as_const(), Some(0));
        assert!(x.xor(&x).as_const() == Some(0));
    }

    #[test]
    fn casts() {
        let x = Term::var(VarId(0), 8);
        assert_eq!(x.trunc(4).eval(&[0xab]), 0xb);
        assert_eq!(x.zext(16).width(), 16);
        assert_eq!(x.zext(16).eval(&[0xab]), 0xab);
    }
}
