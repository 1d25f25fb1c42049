use std::collections::BTreeSet;
use std::fmt;

/// Instruction label. Labels are dense: `0..n` address instructions and `n`
/// is the implicit halt/exit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub width: u32,
    /// Attacker-controlled source (`input` keyword).
    pub input: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayDecl {
    pub name: String,
    pub elem_width: u32,
    pub len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
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

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Eq => "==",
            BinOp::Ult => "<",
            BinOp::Ule => "<=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ult | BinOp::Ule)
    }
}

/// Expression tree. Constants carry no width of their own; they take the
/// width of their context during validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Const(u64),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Zext(u32, Box<Expr>),
    Trunc(u32, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Variables read by this expression, in first-occurrence order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Expr::Const(_) => {}
            Expr::Not(e) | Expr::Zext(_, e) | Expr::Trunc(_, e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Ite(c, a, b) => {
                c.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Assign { dest: String, expr: Expr },
    CondBranch { cond: Expr, then_target: Label, else_target: Label },
    Goto(Label),
    Load { dest: String, array: String, index: Expr },
    Store { array: String, index: Expr, value: Expr },
    Assume(Expr),
    Assert(Expr),
    Halt,
}

impl Instruction {
    pub fn is_memory(&self) -> bool {
        matches!(self, Instruction::Load { .. } | Instruction::Store { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Instruction::Assign { .. } => "assign",
            Instruction::CondBranch { .. } => "br",
            Instruction::Goto(_) => "goto",
            Instruction::Load { .. } => "load",
            Instruction::Store { .. } => "store",
            Instruction::Assume(_) => "assume",
            Instruction::Assert(_) => "assert",
            Instruction::Halt => "halt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub arrays: Vec<ArrayDecl>,
    pub insts: Vec<Instruction>,
}

impl Program {
    pub fn entry(&self) -> Label {
        Label(0)
    }

    /// The designated halt label `n`.
    pub fn exit_label(&self) -> Label {
        Label(self.insts.len() as u32)
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.insts.len() as u32).map(Label)
    }

    pub fn inst(&self, l: Label) -> Option<&Instruction> {
        self.insts.get(l.index())
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VarDecl> {
        self.vars.iter().filter(|v| v.input)
    }

    /// Fall-through successor of a non-branching instruction.
    pub fn fallthrough(&self, l: Label) -> Label {
        Label(l.0 + 1)
    }

    /// Control-flow successors of `l` (may include the exit label).
    pub fn successors(&self, l: Label) -> Vec<Label> {
        match &self.insts[l.index()] {
            Instruction::CondBranch { then_target, else_target, .. } => {
                if then_target == else_target {
                    vec![*then_target]
                } else {
                    vec![*then_target, *else_target]
                }
            }
            Instruction::Goto(t) => vec![*t],
            Instruction::Halt => vec![],
            _ => vec![self.fallthrough(l)],
        }
    }

    /// Labels of conditional instructions (the set C).
    pub fn conditional_instructions(&self) -> BTreeSet<Label> {
        self.labels().filter(|l| matches!(self.insts[l.index()], Instruction::CondBranch { .. })).collect()
    }

    /// Labels of every load and store.
    pub fn memory_instructions(&self) -> BTreeSet<Label> {
        self.labels().filter(|l| self.insts[l.index()].is_memory()).collect()
    }
}
