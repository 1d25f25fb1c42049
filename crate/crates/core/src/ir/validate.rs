use std::collections::BTreeSet;

use super::ast::*;
use super::IrError;

pub const MAX_WIDTH: u32 = 64;
pub const MAX_ARRAY_LEN: u32 = 64;

fn verr<T>(label: Option<Label>, msg: impl Into<String>) -> Result<T, IrError> {
    Err(IrError::Validation { label, msg: msg.into() })
}

/// Check every program invariant; reports the first violation.
pub fn validate(p: &Program) -> Result<(), IrError> {
    let mut names = BTreeSet::new();
    for v in &p.vars {
        if !(1..=MAX_WIDTH).contains(&v.width) {
            return verr(None, format!("variable `{}` has width {} outside 1..={MAX_WIDTH}", v.name, v.width));
        }
        if !names.insert(v.name.as_str()) {
            return verr(None, format!("duplicate declaration of `{}`", v.name));
        }
    }
    for a in &p.arrays {
        if !(1..=MAX_WIDTH).contains(&a.elem_width) {
            return verr(
                None,
                format!("array `{}` has element width {} outside 1..={MAX_WIDTH}", a.name, a.elem_width),
            );
        }
        if !(1..=MAX_ARRAY_LEN).contains(&a.len) {
            return verr(None, format!("array `{}` has length {} outside 1..={MAX_ARRAY_LEN}", a.name, a.len));
        }
        if !names.insert(a.name.as_str()) {
            return verr(None, format!("duplicate declaration of `{}`", a.name));
        }
    }
    if p.insts.is_empty() {
        return verr(None, "program has no instructions");
    }
    let exit = p.exit_label();
    for l in p.labels() {
        let here = Some(l);
        let target_ok = |t: Label| -> Result<(), IrError> {
            if t > exit {
                verr(here, format!("{l}: branch target {t} is not a label of the program"))
            } else {
                Ok(())
            }
        };
        match &p.insts[l.index()] {
            Instruction::Assign { dest, expr } => {
                let w = scalar(p, dest, l)?;
                check(p, expr, w, l)?;
            }
            Instruction::CondBranch { cond, then_target, else_target } => {
                check(p, cond, 1, l)?;
                target_ok(*then_target)?;
                target_ok(*else_target)?;
            }
            Instruction::Goto(t) => target_ok(*t)?,
            Instruction::Load { dest, array, index } => {
                let w = scalar(p, dest, l)?;
                let arr = array_decl(p, array, l)?;
                if w != arr.elem_width {
                    return verr(
                        here,
                        format!("{l}: load into u{w} `{dest}` from u{} array `{array}`", arr.elem_width),
                    );
                }
                index_expr(p, arr, index, l)?;
            }
            Instruction::Store { array, index, value } => {
                let arr = array_decl(p, array, l)?;
                index_expr(p, arr, index, l)?;
                check(p, value, arr.elem_width, l)?;
            }
            Instruction::Assume(c) | Instruction::Assert(c) => check(p, c, 1, l)?,
            Instruction::Halt => {}
        }
    }
    Ok(())
}

fn scalar(p: &Program, name: &str, l: Label) -> Result<u32, IrError> {
    match p.var(name) {
        Some(v) => Ok(v.width),
        None if p.array(name).is_some() => verr(Some(l), format!("{l}: array `{name}` used as a scalar")),
        None => verr(Some(l), format!("{l}: undeclared variable `{name}`")),
    }
}

fn array_decl<'a>(p: &'a Program, name: &str, l: Label) -> Result<&'a ArrayDecl, IrError> {
    p.array(name).ok_or_else(|| IrError::Validation { label: Some(l), msg: format!("{l}: undeclared array `{name}`") })
}

fn index_expr(p: &Program, arr: &ArrayDecl, e: &Expr, l: Label) -> Result<u32, IrError> {
    let w = index_width(p, arr, e);
    check(p, e, w, l)?;
    Ok(w)
}

/// Width at which an index expression is evaluated: its own width, or for a
/// bare constant the smallest width addressing every cell.
pub fn index_width(p: &Program, arr: &ArrayDecl, e: &Expr) -> u32 {
    natural_width(p, e).unwrap_or_else(|| canonical_index_width(arr.len))
}

pub fn canonical_index_width(len: u32) -> u32 {
    (32 - (len.max(2) - 1).leading_zeros()).max(1)
}

/// Width implied by the expression's own leaves, if any. Constants have none.
pub fn natural_width(p: &Program, e: &Expr) -> Option<u32> {
    match e {
        Expr::Var(v) => p.var(v).map(|d| d.width),
        Expr::Const(_) => None,
        Expr::Not(e) => natural_width(p, e),
        Expr::Bin(op, a, b) => {
            if op.is_comparison() {
                Some(1)
            } else {
                natural_width(p, a).or_else(|| natural_width(p, b))
            }
        }
        Expr::Ite(_, a, b) => natural_width(p, a).or_else(|| natural_width(p, b)),
        Expr::Zext(w, _) | Expr::Trunc(w, _) => Some(*w),
    }
}

/// Type-check `e` at width `w`.
pub fn check(p: &Program, e: &Expr, w: u32, l: Label) -> Result<(), IrError> {
    let here = Some(l);
    match e {
        Expr::Var(v) => {
            let vw = scalar(p, v, l)?;
            if vw != w {
                return verr(here, format!("{l}: `{v}` has width {vw}, expected {w}"));
            }
        }
        Expr::Const(n) => {
            if w < 64 && *n >> w != 0 {
                return verr(here, format!("{l}: constant {n} does not fit in u{w}"));
            }
        }
        Expr::Not(e) => check(p, e, w, l)?,
        Expr::Bin(op, a, b) => {
            if op.is_comparison() {
                if w != 1 {
                    return verr(here, format!("{l}: comparison `{}` used at width {w}", op.symbol()));
                }
                let ow = natural_width(p, a).or_else(|| natural_width(p, b)).ok_or_else(|| IrError::Validation {
                    label: here,
                    msg: format!("{l}: cannot infer operand width of `{}`", op.symbol()),
                })?;
                check(p, a, ow, l)?;
                check(p, b, ow, l)?;
            } else {
                check(p, a, w, l)?;
                check(p, b, w, l)?;
            }
        }
        Expr::Ite(c, a, b) => {
            check(p, c, 1, l)?;
            check(p, a, w, l)?;
            check(p, b, w, l)?;
        }
        Expr::Zext(t, inner) | Expr::Trunc(t, inner) => {
            let is_zext = matches!(e, Expr::Zext(..));
            if *t != w || !(1..=MAX_WIDTH).contains(t) {
                return verr(here, format!("{l}: cast to u{t} used at width {w}"));
            }
            let iw = natural_width(p, inner).ok_or_else(|| IrError::Validation {
                label: here,
                msg: format!("{l}: cannot infer cast operand width"),
            })?;
            if (is_zext && iw > *t) || (!is_zext && iw < *t) {
                let name = if is_zext { "zext" } else { "trunc" };
                return verr(here, format!("{l}: {name}<{t}> applied to u{iw}"));
            }
            check(p, inner, iw, l)?;
        }
    }
    Ok(())
}
