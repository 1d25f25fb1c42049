//! Line-oriented parser for the `.sir` text format.

use super::ast::*;
use super::validate::validate;
use super::IrError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    col: usize,
}

const SYMBOLS: &[&str] = &[":=", "==", "<=", ":", "[", "]", "(", ")", ",", "+", "-", "*", "&", "|", "^", "~", "<", ">"];

fn lex(line: &str, lineno: usize) -> Result<Vec<Spanned>, IrError> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let col = i + 1;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(line[start..i].to_string()), col });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let value = if line[i..].starts_with("0x") || line[i..].starts_with("0X") {
                i += 2;
                let hs = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_hexdigit() {
                    i += 1;
                }
                u64::from_str_radix(&line[hs..i], 16)
            } else {
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                line[start..i].parse::<u64>()
            };
            let value = value.map_err(|_| IrError::Parse {
                line: lineno,
                col,
                msg: format!("bad numeric literal `{}`", &line[start..i]),
            })?;
            out.push(Spanned { tok: Tok::Num(value), col });
            continue;
        }
        match SYMBOLS.iter().find(|s| line[i..].starts_with(**s)) {
            Some(s) => {
                out.push(Spanned { tok: Tok::Sym(s), col });
                i += s.len();
            }
            None => return Err(IrError::Parse { line: lineno, col, msg: format!("unexpected character `{c}`") }),
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, IrError> {
        let col = self.toks.get(self.pos).map(|t| t.col).unwrap_or(self.eol_col);
        Err(IrError::Parse { line: self.line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), IrError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, IrError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn num(&mut self) -> Result<u64, IrError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected number"),
        }
    }

    fn label(&mut self) -> Result<Label, IrError> {
        match self.peek() {
            Some(Tok::Ident(s)) if is_label(s) => {
                let l = Label(s[1..].parse().unwrap());
                self.pos += 1;
                Ok(l)
            }
            _ => self.err("expected label `L<k>`"),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn finish(&self) -> Result<(), IrError> {
        if self.pos < self.toks.len() {
            self.err("trailing tokens")
        } else {
            Ok(())
        }
    }

    fn width_type(&mut self) -> Result<u32, IrError> {
        let t = self.ident()?;
        match t.strip_prefix('u').and_then(|w| w.parse::<u32>().ok()) {
            Some(w) => Ok(w),
            None => {
                self.pos -= 1;
                self.err(format!("expected type `u<width>`, found `{t}`"))
            }
        }
    }

    // Precedence, loosest first: comparisons, |, ^, &, + -, *, unary ~.
    fn expr(&mut self) -> Result<Expr, IrError> {
        let lhs = self.bitor()?;
        let op = match self.peek() {
            Some(Tok::Sym("==")) => BinOp::Eq,
            Some(Tok::Sym("<")) => BinOp::Ult,
            Some(Tok::Sym("<=")) => BinOp::Ule,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.bitor()?;
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn bitor(&mut self) -> Result<Expr, IrError> {
        let mut e = self.bitxor()?;
        while self.eat_sym("|") {
            e = Expr::bin(BinOp::Or, e, self.bitxor()?);
        }
        Ok(e)
    }

    fn bitxor(&mut self) -> Result<Expr, IrError> {
        let mut e = self.bitand()?;
        while self.eat_sym("^") {
            e = Expr::bin(BinOp::Xor, e, self.bitand()?);
        }
        Ok(e)
    }

    fn bitand(&mut self) -> Result<Expr, IrError> {
        let mut e = self.additive()?;
        while self.eat_sym("&") {
            e = Expr::bin(BinOp::And, e, self.additive()?);
        }
        Ok(e)
    }

    fn additive(&mut self) -> Result<Expr, IrError> {
        let mut e = self.multiplicative()?;
        loop {
            if self.eat_sym("+") {
                e = Expr::bin(BinOp::Add, e, self.multiplicative()?);
            } else if self.eat_sym("-") {
                e = Expr::bin(BinOp::Sub, e, self.multiplicative()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, IrError> {
        let mut e = self.unary()?;
        while self.eat_sym("*") {
            e = Expr::bin(BinOp::Mul, e, self.unary()?);
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr, IrError> {
        if self.eat_sym("~") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, IrError> {
        match self.next().cloned() {
            Some(Tok::Num(n)) => Ok(Expr::Const(n)),
            Some(Tok::Sym("(")) => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "ite" => {
                    self.expect_sym("(")?;
                    let c = self.expr()?;
                    self.expect_sym(",")?;
                    let a = self.expr()?;
                    self.expect_sym(",")?;
                    let b = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Ite(Box::new(c), Box::new(a), Box::new(b)))
                }
                "zext" | "trunc" => {
                    self.expect_sym("<")?;
                    let w = self.num()? as u32;
                    self.expect_sym(">")?;
                    self.expect_sym("(")?;
                    let e = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(if name == "zext" { Expr::Zext(w, Box::new(e)) } else { Expr::Trunc(w, Box::new(e)) })
                }
                _ => Ok(Expr::Var(name)),
            },
            _ => {
                self.pos -= 1;
                self.err("expected expression")
            }
        }
    }
}

fn is_label(s: &str) -> bool {
    s.len() > 1 && s.starts_with('L') && s[1..].chars().all(|c| c.is_ascii_digit())
}

/// Parse and validate a program.
pub fn parse_program(text: &str) -> Result<Program, IrError> {
    let p = parse_unvalidated(text)?;
    validate(&p)?;
    Ok(p)
}

/// Parse without running the validator (labels are still checked for order).
pub fn parse_unvalidated(text: &str) -> Result<Program, IrError> {
    let mut name: Option<String> = None;
    let mut vars = Vec::new();
    let mut arrays = Vec::new();
    let mut insts = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = lex(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor { toks: &toks, pos: 0, line: lineno, eol_col: raw.len() + 1 };
        let head = match c.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return c.err("expected declaration or labelled instruction"),
        };
        if is_label(&head) && matches!(toks.get(1).map(|t| &t.tok), Some(Tok::Sym(":"))) {
            let l = c.label()?;
            if l.index() != insts.len() {
                c.pos = 0;
                return c.err(format!("label {l} out of order, expected L{}", insts.len()));
            }
            c.expect_sym(":")?;
            insts.push(parse_inst(&mut c)?);
            c.finish()?;
            continue;
        }
        c.pos += 1;
        match head.as_str() {
            "program" => {
                if name.is_some() {
                    c.pos = 0;
                    return c.err("duplicate `program` header");
                }
                name = Some(c.ident()?);
            }
            "var" | "input" => {
                let id = c.ident()?;
                c.expect_sym(":")?;
                let width = c.width_type()?;
                vars.push(VarDecl { name: id, width, input: head == "input" });
            }
            "array" => {
                let id = c.ident()?;
                c.expect_sym("[")?;
                let len = c.num()? as u32;
                c.expect_sym("]")?;
                c.expect_sym(":")?;
                let elem_width = c.width_type()?;
                arrays.push(ArrayDecl { name: id, elem_width, len });
            }
            _ => {
                c.pos = 0;
                return c.err(format!("unknown directive `{head}`"));
            }
        }
        c.finish()?;
    }

    let name = name.ok_or(IrError::Parse { line: 1, col: 1, msg: "missing `program <name>` header".into() })?;
    if insts.is_empty() {
        let last = text.lines().count().max(1);
        return Err(IrError::Parse { line: last, col: 1, msg: "program has no instructions".into() });
    }
    Ok(Program { name, vars, arrays, insts })
}

fn parse_inst(c: &mut Cursor<'_>) -> Result<Instruction, IrError> {
    if c.keyword("br") {
        let cond = c.expr()?;
        let then_target = c.label()?;
        let else_target = c.label()?;
        return Ok(Instruction::CondBranch { cond, then_target, else_target });
    }
    if c.keyword("goto") {
        return Ok(Instruction::Goto(c.label()?));
    }
    if c.keyword("store") {
        let array = c.ident()?;
        c.expect_sym("[")?;
        let index = c.expr()?;
        c.expect_sym("]")?;
        c.expect_sym(":=")?;
        let value = c.expr()?;
        return Ok(Instruction::Store { array, index, value });
    }
    if c.keyword("assume") {
        return Ok(Instruction::Assume(c.expr()?));
    }
    if c.keyword("assert") {
        return Ok(Instruction::Assert(c.expr()?));
    }
    if c.keyword("halt") {
        return Ok(Instruction::Halt);
    }
    let dest = c.ident()?;
    c.expect_sym(":=")?;
    if c.keyword("load") {
        let array = c.ident()?;
        c.expect_sym("[")?;
        let index = c.expr()?;
        c.expect_sym("]")?;
        return Ok(Instruction::Load { dest, array, index });
    }
    Ok(Instruction::Assign { dest, expr: c.expr()? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_c_like_for_arithmetic() {
        let src = "program p\nvar x : u8\nL0: x := 1 + 2 * x\nL1: halt\n";
        let p = parse_program(src).unwrap();
        let Instruction::Assign { expr, .. } = &p.insts[0] else { panic!() };
        assert_eq!(*expr, Expr::bin(BinOp::Add, Expr::Const(1), Expr::bin(BinOp::Mul, Expr::Const(2), Expr::var("x"))));
    }

    #[test]
    fn hex_and_casts() {
        let src = "program p\nvar x : u8\nvar y : u16\nL0: y := zext<16>(x) + 0xff\nL1: x := trunc<8>(y)\nL2: halt\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.insts.len(), 3);
    }

    #[test]
    fn reports_column_of_bad_token() {
        let err = parse_program("program p\nvar x : u8\nL0: x := x $ 1\n").unwrap_err();
        match err {
            IrError::Parse { line, col, .. } => assert_eq!((line, col), (3, 12)),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn labels_must_be_in_order() {
        let err = parse_program("program p\nL1: halt\n").unwrap_err();
        assert!(matches!(err, IrError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn empty_body_is_a_parse_error() {
        assert!(matches!(parse_program("program p\nvar x : u8\n"), Err(IrError::Parse { .. })));
        let p = parse_program("program p\nvar x : u8\nL0: halt\n").unwrap();
        assert_eq!(p.insts, vec![Instruction::Halt]);
    }
}
