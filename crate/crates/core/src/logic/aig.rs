//! And-inverter graph with structural hashing, plus the word-level
//! bit-blaster that lowers [`Term`]s into it.

use std::collections::HashMap;

use super::term::{Kind, Op, Term, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AigLit(u32);

impl AigLit {
    pub const FALSE: AigLit = AigLit(0);
    pub const TRUE: AigLit = AigLit(1);

    pub fn from_node(node: u32, negated: bool) -> AigLit {
        AigLit(node << 1 | negated as u32)
    }

    pub fn node(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn is_const(self) -> bool {
        self.node() == 0
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn negate_if(self, c: bool) -> AigLit {
        AigLit(self.0 ^ c as u32)
    }
}

impl std::ops::Not for AigLit {
    type Output = AigLit;
    fn not(self) -> AigLit {
        AigLit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AigNode {
    False,
    Input,
    And(AigLit, AigLit),
}

/// Nodes are stored in topological order: children precede parents.
#[derive(Debug, Clone)]
pub struct Aig {
    nodes: Vec<AigNode>,
    strash: HashMap<(AigLit, AigLit), u32>,
}

impl Default for Aig {
    fn default() -> Self {
        Self::new()
    }
}

impl Aig {
    pub fn new() -> Aig {
        Aig { nodes: vec![AigNode::False], strash: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node(&self, n: u32) -> AigNode {
        self.nodes[n as usize]
    }

    pub fn input(&mut self) -> AigLit {
        self.nodes.push(AigNode::Input);
        AigLit::from_node(self.nodes.len() as u32 - 1, false)
    }

    pub fn and(&mut self, a: AigLit, b: AigLit) -> AigLit {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == AigLit::FALSE || a == !b {
            return AigLit::FALSE;
        }
        if a == AigLit::TRUE || a == b {
            return b;
        }
        if let Some(&n) = self.strash.get(&(a, b)) {
            return AigLit::from_node(n, false);
        }
        self.nodes.push(AigNode::And(a, b));
        let n = self.nodes.len() as u32 - 1;
        self.strash.insert((a, b), n);
        AigLit::from_node(n, false)
    }

    pub fn or(&mut self, a: AigLit, b: AigLit) -> AigLit {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: AigLit, b: AigLit) -> AigLit {
        let l = self.and(a, !b);
        let r = self.and(!a, b);
        self.or(l, r)
    }

    pub fn xnor(&mut self, a: AigLit, b: AigLit) -> AigLit {
        !self.xor(a, b)
    }

    pub fn ite(&mut self, c: AigLit, t: AigLit, e: AigLit) -> AigLit {
        if t == e {
            return t;
        }
        let l = self.and(c, t);
        let r = self.and(!c, e);
        self.or(l, r)
    }

    pub fn and_all(&mut self, lits: impl IntoIterator<Item = AigLit>) -> AigLit {
        lits.into_iter().fold(AigLit::TRUE, |acc, l| self.and(acc, l))
    }

    pub fn or_all(&mut self, lits: impl IntoIterator<Item = AigLit>) -> AigLit {
        lits.into_iter().fold(AigLit::FALSE, |acc, l| self.or(acc, l))
    }

    /// Evaluate every node given the values of input nodes.
    pub fn simulate(&self, input_value: impl Fn(u32) -> bool) -> Vec<bool> {
        let mut val = vec![false; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            val[i] = match n {
                AigNode::False => false,
                AigNode::Input => input_value(i as u32),
                AigNode::And(a, b) => lit_value(&val, *a) && lit_value(&val, *b),
            };
        }
        val
    }

    /// Nodes in the transitive fan-in of `roots`, in topological order.
    pub fn cone(&self, roots: impl IntoIterator<Item = AigLit>) -> Vec<u32> {
        let mut mark = vec![false; self.nodes.len()];
        let mut stack: Vec<u32> = roots.into_iter().map(|l| l.node()).collect();
        while let Some(n) = stack.pop() {
            if mark[n as usize] {
                continue;
            }
            mark[n as usize] = true;
            if let AigNode::And(a, b) = self.nodes[n as usize] {
                stack.push(a.node());
                stack.push(b.node());
            }
        }
        (0..self.nodes.len() as u32).filter(|&n| mark[n as usize]).collect()
    }

    /// Input nodes in the fan-in of `roots`.
    pub fn support(&self, roots: impl IntoIterator<Item = AigLit>) -> Vec<u32> {
        self.cone(roots).into_iter().filter(|&n| self.nodes[n as usize] == AigNode::Input).collect()
    }
}

pub fn lit_value(node_values: &[bool], l: AigLit) -> bool {
    node_values[l.node() as usize] ^ l.is_negated()
}

/// A bit-vector: AIG literals, least significant bit first.
pub type Word = Vec<AigLit>;

pub fn const_word(value: u64, width: u32) -> Word {
    (0..width).map(|i| if value >> i & 1 == 1 { AigLit::TRUE } else { AigLit::FALSE }).collect()
}

fn add_words(g: &mut Aig, a: &[AigLit], b: &[AigLit], carry_in: AigLit) -> Word {
    let mut carry = carry_in;
    let mut out = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let xy = g.xor(x, y);
        out.push(g.xor(xy, carry));
        let c1 = g.and(x, y);
        let c2 = g.and(xy, carry);
        carry = g.or(c1, c2);
    }
    out
}

/// Unsigned a < b.
fn ult_words(g: &mut Aig, a: &[AigLit], b: &[AigLit]) -> AigLit {
    // Scan from LSB: lt holds iff the most significant differing bit has a=0, b=1.
    let mut lt = AigLit::FALSE;
    for (&x, &y) in a.iter().zip(b) {
        let here = g.and(!x, y);
        let same = g.xnor(x, y);
        let keep = g.and(same, lt);
        lt = g.or(here, keep);
    }
    lt
}

fn eq_words(g: &mut Aig, a: &[AigLit], b: &[AigLit]) -> AigLit {
    let bits: Vec<AigLit> = a.iter().zip(b).map(|(&x, &y)| g.xnor(x, y)).collect();
    g.and_all(bits)
}

fn mul_words(g: &mut Aig, a: &[AigLit], b: &[AigLit]) -> Word {
    let w = a.len();
    let mut acc = const_word(0, w as u32);
    for (i, &bi) in b.iter().enumerate() {
        let mut partial = const_word(0, w as u32);
        for j in 0..w - i {
            partial[i + j] = g.and(a[j], bi);
        }
        acc = add_words(g, &acc, &partial, AigLit::FALSE);
    }
    acc
}

/// Lowers terms into an AIG. Variables are resolved through `bind`; results
/// are memoised per term node.
pub struct Blaster<'a> {
    pub aig: &'a mut Aig,
    memo: HashMap<usize, (Term, Word)>,
}

impl<'a> Blaster<'a> {
    pub fn new(aig: &'a mut Aig) -> Self {
        Blaster { aig, memo: HashMap::new() }
    }

    pub fn blast(&mut self, t: &Term, bind: &mut dyn FnMut(&mut Aig, VarId, u32) -> Word) -> Word {
        if let Some((_, w)) = self.memo.get(&t.ptr()) {
            return w.clone();
        }
        let w = t.width();
        let out = match t.kind() {
            Kind::Var(v) => {
                let word = bind(self.aig, *v, w);
                assert_eq!(word.len(), w as usize);
                word
            }
            Kind::Const(c) => const_word(*c, w),
            Kind::Not(a) => self.blast(a, bind).into_iter().map(|l| !l).collect(),
            Kind::Bin(op, a, b) => {
                let x = self.blast(a, bind);
                let y = self.blast(b, bind);
                let g = &mut *self.aig;
                match op {
                    Op::Add => add_words(g, &x, &y, AigLit::FALSE),
                    Op::Sub => {
                        let ny: Word = y.iter().map(|&l| !l).collect();
                        add_words(g, &x, &ny, AigLit::TRUE)
                    }
                    Op::Mul => mul_words(g, &x, &y),
                    Op::And => x.iter().zip(&y).map(|(&p, &q)| g.and(p, q)).collect(),
                    Op::Or => x.iter().zip(&y).map(|(&p, &q)| g.or(p, q)).collect(),
                    Op::Xor => x.iter().zip(&y).map(|(&p, &q)| g.xor(p, q)).collect(),
                    Op::Eq => vec![eq_words(g, &x, &y)],
                    Op::Ult => vec![ult_words(g, &x, &y)],
                    Op::Ule => vec![!ult_words(g, &y, &x)],
                }
            }
            Kind::Ite(c, a, b) => {
                let c = self.blast(c, bind)[0];
                let x = self.blast(a, bind);
                let y = self.blast(b, bind);
                x.iter().zip(&y).map(|(&p, &q)| self.aig.ite(c, p, q)).collect()
            }
            Kind::Zext(a) => {
                let mut x = self.blast(a, bind);
                x.resize(w as usize, AigLit::FALSE);
                x
            }
            Kind::Trunc(a) => {
                let mut x = self.blast(a, bind);
                x.truncate(w as usize);
                x
            }
        };
        self.memo.insert(t.ptr(), (t.clone(), out.clone()));
        out
    }
}
