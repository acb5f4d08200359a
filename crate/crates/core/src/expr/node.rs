use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use super::var::Var;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sqrt,
    Exp,
    Sin,
    Cos,
    Atan,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Exp => "exp",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Atan => "atan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Node kinds of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    /// Integer power.
    Pow(Expr, i32),
    /// Japanese bracket `(1 + a1^2 + ... + ak^2)^(m/2)`, i.e. `<a>^m`.
    Bracket(Vec<Expr>, f64),
}

/// Immutable, cheaply clonable expression tree over real variables.
///
/// Equality is structural. Constructors in this module apply the local
/// rewrite rules of [`simplify`](super::simplify), so trees built through
/// them are already simplified.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Wrap a node without applying any rewrite.
    pub fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(v: Var) -> Expr {
        Expr::raw(Node::Var(v))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Address of the shared node, used as a memo key for DAG traversals.
    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Structural equality, short-circuiting on shared subtrees.
    pub fn same(&self, other: &Expr) -> bool {
        self.ptr_eq(other) || self == other
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut seen = HashSet::new();
        self.collect_vars(&mut out, &mut seen);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>, seen: &mut HashSet<usize>) {
        if !seen.insert(self.id()) {
            return;
        }
        match self.node() {
            Node::Const(_) => {}
            Node::Var(v) => {
                out.insert(*v);
            }
            Node::Unary(_, a) | Node::Pow(a, _) => a.collect_vars(out, seen),
            Node::Binary(_, a, b) => {
                a.collect_vars(out, seen);
                b.collect_vars(out, seen);
            }
            Node::Bracket(args, _) => args.iter().for_each(|a| a.collect_vars(out, seen)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.free_vars().contains(&v)
    }

    /// Number of distinct shared nodes.
    pub fn dag_size(&self) -> usize {
        fn walk(e: &Expr, seen: &mut HashSet<usize>) {
            if !seen.insert(e.id()) {
                return;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Unary(_, a) | Node::Pow(a, _) => walk(a, seen),
                Node::Binary(_, a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                Node::Bracket(args, _) => args.iter().for_each(|a| walk(a, seen)),
            }
        }
        let mut seen = HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    /// Number of nodes counted as a tree (shared subtrees counted again).
    pub fn tree_size(&self) -> usize {
        1 + match self.node() {
            Node::Const(_) | Node::Var(_) => 0,
            Node::Unary(_, a) | Node::Pow(a, _) => a.tree_size(),
            Node::Binary(_, a, b) => a.tree_size() + b.tree_size(),
            Node::Bracket(args, _) => args.iter().map(Expr::tree_size).sum(),
        }
    }

    // Smart constructors.

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Unary(UnaryOp::Neg, a) => a.clone(),
            _ => Expr::raw(Node::Unary(UnaryOp::Neg, self.clone())),
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => other.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Expr::raw(Node::Binary(BinaryOp::Add, self.clone(), other.clone())),
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (_, Some(b)) if b == 0.0 => self.clone(),
            (Some(a), _) if a == 0.0 => other.neg(),
            _ if self.same(other) => Expr::zero(),
            _ => Expr::raw(Node::Binary(BinaryOp::Sub, self.clone(), other.clone())),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Expr::zero(),
            (Some(a), _) if a == 1.0 => other.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => other.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            _ => Expr::raw(Node::Binary(BinaryOp::Mul, self.clone(), other.clone())),
        }
    }

    pub fn div(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a / b),
            // A syntactically zero denominator never survives.
            (_, Some(b)) if b == 0.0 => Expr::constant(f64::NAN),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => Expr::raw(Node::Binary(BinaryOp::Div, self.clone(), other.clone())),
        }
    }

    pub fn powi(&self, k: i32) -> Expr {
        match (self.as_const(), k) {
            (_, 0) => Expr::one(),
            (_, 1) => self.clone(),
            (Some(c), _) => Expr::constant(c.powi(k)),
            _ => Expr::raw(Node::Pow(self.clone(), k)),
        }
    }

    fn unary(&self, op: UnaryOp, fold: impl Fn(f64) -> Option<f64>) -> Expr {
        match self.as_const().and_then(fold) {
            Some(c) => Expr::constant(c),
            None => Expr::raw(Node::Unary(op, self.clone())),
        }
    }

    pub fn sqrt(&self) -> Expr {
        self.unary(UnaryOp::Sqrt, |c| (c >= 0.0).then(|| c.sqrt()))
    }

    pub fn exp(&self) -> Expr {
        self.unary(UnaryOp::Exp, |c| Some(c.exp()))
    }

    pub fn sin(&self) -> Expr {
        self.unary(UnaryOp::Sin, |c| Some(c.sin()))
    }

    pub fn cos(&self) -> Expr {
        self.unary(UnaryOp::Cos, |c| Some(c.cos()))
    }

    pub fn atan(&self) -> Expr {
        self.unary(UnaryOp::Atan, |c| Some(c.atan()))
    }

    /// `<args>^power`.
    pub fn bracket_pow(args: Vec<Expr>, power: f64) -> Expr {
        if power == 0.0 {
            return Expr::one();
        }
        if args.iter().all(|a| a.as_const().is_some()) {
            let s: f64 = args.iter().map(|a| a.as_const().unwrap().powi(2)).sum();
            return Expr::constant((1.0 + s).powf(power / 2.0));
        }
        Expr::raw(Node::Bracket(args, power))
    }

    /// `<args> = (1 + |args|^2)^(1/2)`.
    pub fn jbr(args: Vec<Expr>) -> Expr {
        Expr::bracket_pow(args, 1.0)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc.add(&t))
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        factors.into_iter().fold(Expr::one(), |acc, t| acc.mul(&t))
    }

    /// Rebuild this node with new children through the smart constructors.
    pub(crate) fn rebuild(&self, f: &mut impl FnMut(&Expr) -> Expr) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Unary(op, a) => {
                let a = f(a);
                match op {
                    UnaryOp::Neg => a.neg(),
                    UnaryOp::Sqrt => a.sqrt(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Atan => a.atan(),
                }
            }
            Node::Binary(op, a, b) => {
                let (a, b) = (f(a), f(b));
                match op {
                    BinaryOp::Add => a.add(&b),
                    BinaryOp::Sub => a.sub(&b),
                    BinaryOp::Mul => a.mul(&b),
                    BinaryOp::Div => a.div(&b),
                }
            }
            Node::Pow(a, k) => f(a).powi(*k),
            Node::Bracket(args, m) => Expr::bracket_pow(args.iter().map(|a| f(a)).collect(), *m),
        }
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Expr {
        Expr::var(v)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// Printing. Precedence levels: 1 additive, 2 multiplicative, 3 unary minus,
// 4 power, 5 atoms and calls.

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if c.is_sign_negative() => 3,
        Node::Const(_) | Node::Var(_) | Node::Bracket(..) => 5,
        Node::Unary(UnaryOp::Neg, _) => 3,
        Node::Unary(..) => 5,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Node::Pow(..) => 4,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_finite() {
        // Display is shortest round-trip, so the literal reparses exactly.
        write!(f, "{c}")
    } else if c.is_nan() {
        f.write_str("nan")
    } else if c > 0.0 {
        f.write_str("inf")
    } else {
        f.write_str("-inf")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write_const(f, *c),
            Node::Var(v) => write!(f, "{v}"),
            Node::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                // A bare literal after '-' would fold into a negative constant.
                let wrap = precedence(a) < 3 || matches!(a.node(), Node::Const(_));
                write_wrapped(f, a, wrap)
            }
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => {
                let (p, sym) = match op {
                    BinaryOp::Add => (1, " + "),
                    BinaryOp::Sub => (1, " - "),
                    BinaryOp::Mul => (2, " * "),
                    BinaryOp::Div => (2, " / "),
                };
                write_wrapped(f, a, precedence(a) < p)?;
                f.write_str(sym)?;
                write_wrapped(f, b, precedence(b) <= p)
            }
            Node::Pow(a, k) => {
                write_wrapped(f, a, precedence(a) <= 4)?;
                write!(f, "^{k}")
            }
            Node::Bracket(args, m) => {
                let name = if *m == 1.0 { "jbr" } else { "jbrpow" };
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                if *m != 1.0 {
                    f.write_str(", ")?;
                    write_const(f, *m)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}
