use std::fmt::{self, Write};

use super::ast::*;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, true)
    }
}

fn write_expr(f: &mut impl Write, e: &Expr, top: bool) -> fmt::Result {
    match e {
        Expr::Var(v) => f.write_str(v),
        Expr::Const(n) => write!(f, "{n}"),
        Expr::Not(e) => {
            f.write_char('~')?;
            write_expr(f, e, false)
        }
        Expr::Bin(op, a, b) => {
            if !top {
                f.write_char('(')?;
            }
            write_expr(f, a, false)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, b, false)?;
            if !top {
                f.write_char(')')?;
            }
            Ok(())
        }
        Expr::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
        Expr::Zext(w, e) => write!(f, "zext<{w}>({e})"),
        Expr::Trunc(w, e) => write!(f, "trunc<{w}>({e})"),
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Assign { dest, expr } => write!(f, "{dest} := {expr}"),
            Instruction::CondBranch { cond, then_target, else_target } => {
                f.write_str("br ")?;
                write_expr(f, cond, false)?;
                write!(f, " {then_target} {else_target}")
            }
            Instruction::Goto(t) => write!(f, "goto {t}"),
            Instruction::Load { dest, array, index } => write!(f, "{dest} := load {array}[{index}]"),
            Instruction::Store { array, index, value } => write!(f, "store {array}[{index}] := {value}"),
            Instruction::Assume(c) => write!(f, "assume {c}"),
            Instruction::Assert(c) => write!(f, "assert {c}"),
            Instruction::Halt => f.write_str("halt"),
        }
    }
}

/// Render a program back into the `.sir` text format.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {}", p.name);
    for v in &p.vars {
        let kw = if v.input { "input" } else { "var" };
        let _ = writeln!(out, "{kw} {} : u{}", v.name, v.width);
    }
    for a in &p.arrays {
        let _ = writeln!(out, "array {}[{}] : u{}", a.name, a.len, a.elem_width);
    }
    for (i, inst) in p.insts.iter().enumerate() {
        let _ = writeln!(out, "L{i}: {inst}");
    }
    out
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
