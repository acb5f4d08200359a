use std::collections::HashMap;

use thiserror::Error;

use super::node::{BinaryOp, Expr, Node, UnaryOp};
use super::var::{all_vars, Point, Var, SLOT_COUNT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable {0} is unbound")]
    Unbound(Var),
    #[error("{op} of {arg} is outside the real domain")]
    Domain { op: &'static str, arg: f64 },
    #[error("evaluation produced the non-finite value {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Slot(u8),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
    Pow(u32, i32),
    /// Arguments live in `args[start..start + len]`.
    Bracket { start: u32, len: u32, m: f64 },
}

/// An expression flattened into a register tape, one register per distinct
/// shared node. Evaluating it costs one pass over the tape.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    args: Vec<u32>,
    mask: u16,
}

impl CompiledExpr {
    pub fn new(e: &Expr) -> Self {
        let mut c = CompiledExpr {
            ops: Vec::new(),
            args: Vec::new(),
            mask: 0,
        };
        let mut memo = HashMap::new();
        c.emit(e, &mut memo);
        c
    }

    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        (self.ops.len() - 1) as u32
    }

    fn emit(&mut self, e: &Expr, memo: &mut HashMap<usize, u32>) -> u32 {
        if let Some(&r) = memo.get(&e.id()) {
            return r;
        }
        let r = match e.node() {
            Node::Const(c) => self.push(Op::Const(*c)),
            Node::Var(v) => {
                self.mask |= 1 << v.slot();
                self.push(Op::Slot(v.slot() as u8))
            }
            Node::Unary(op, a) => {
                let a = self.emit(a, memo);
                self.push(Op::Unary(*op, a))
            }
            Node::Binary(op, a, b) => {
                let a = self.emit(a, memo);
                let b = self.emit(b, memo);
                self.push(Op::Binary(*op, a, b))
            }
            Node::Pow(a, k) => {
                let a = self.emit(a, memo);
                self.push(Op::Pow(a, *k))
            }
            Node::Bracket(list, m) => {
                let regs: Vec<u32> = list.iter().map(|a| self.emit(a, memo)).collect();
                let start = self.args.len() as u32;
                self.args.extend(regs);
                self.push(Op::Bracket {
                    start,
                    len: list.len() as u32,
                    m: *m,
                })
            }
        };
        memo.insert(e.id(), r);
        r
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Variables the expression reads.
    pub fn vars(&self) -> Vec<Var> {
        all_vars().filter(|v| self.mask & (1 << v.slot()) != 0).collect()
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.mask & (1 << v.slot()) != 0
    }

    /// Constant value if the tape reads no variable.
    pub fn as_const(&self) -> Option<f64> {
        (self.mask == 0).then(|| self.eval_slots(&[0.0; SLOT_COUNT], &mut Vec::new()))
    }

    /// Unchecked evaluation on raw slot values; unbound slots read as given.
    pub fn eval_slots(&self, slots: &[f64; SLOT_COUNT], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.reserve(self.ops.len());
        for op in &self.ops {
            let v = step(op, &self.args, buf, slots);
            buf.push(v);
        }
        *buf.last().expect("empty tape")
    }

    /// Unchecked evaluation at a point (NaN propagates silently).
    pub fn eval(&self, p: &Point) -> f64 {
        self.eval_slots(p.slots(), &mut Vec::new())
    }

    /// Checked evaluation: unbound variables, square roots of negatives and
    /// non-finite results are errors.
    pub fn eval_checked(&self, p: &Point) -> Result<f64, EvalError> {
        let missing = self.mask & !p.bound_mask();
        if missing != 0 {
            let v = all_vars()
                .find(|v| missing & (1 << v.slot()) != 0)
                .expect("mask bit without variable");
            return Err(EvalError::Unbound(v));
        }
        for op in &self.ops {
            if let Op::Unary(UnaryOp::Sqrt, _) = op {
                return self.eval_checked_slow(p);
            }
        }
        finite(self.eval(p))
    }

    fn eval_checked_slow(&self, p: &Point) -> Result<f64, EvalError> {
        let mut buf = Vec::with_capacity(self.ops.len());
        let slots = p.slots();
        // Re-run with a domain check on every square root.
        for op in &self.ops {
            if let Op::Unary(UnaryOp::Sqrt, a) = *op {
                let arg = buf[a as usize];
                if arg < 0.0 {
                    return Err(EvalError::Domain { op: "sqrt", arg });
                }
            }
            buf.push(step(op, &self.args, &buf, slots));
        }
        finite(*buf.last().expect("empty tape"))
    }
}

#[inline]
fn step(op: &Op, args: &[u32], buf: &[f64], slots: &[f64; SLOT_COUNT]) -> f64 {
    match *op {
        Op::Const(c) => c,
        Op::Slot(s) => slots[s as usize],
        Op::Unary(u, a) => {
            let a = buf[a as usize];
            match u {
                UnaryOp::Neg => -a,
                UnaryOp::Sqrt => a.sqrt(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Atan => a.atan(),
            }
        }
        Op::Binary(b, x, y) => {
            let (x, y) = (buf[x as usize], buf[y as usize]);
            match b {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => x / y,
            }
        }
        Op::Pow(a, k) => buf[a as usize].powi(k),
        Op::Bracket { start, len, m } => {
            let s = 1.0
                + args[start as usize..(start + len) as usize]
                    .iter()
                    .map(|&r| buf[r as usize] * buf[r as usize])
                    .sum::<f64>();
            bracket_power(s, m)
        }
    }
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite(v))
    }
}

/// `s^(m/2)` with exact fast paths for the common bracket powers.
#[inline]
pub(crate) fn bracket_power(s: f64, m: f64) -> f64 {
    if m == 1.0 {
        s.sqrt()
    } else if m == -1.0 {
        1.0 / s.sqrt()
    } else if m.fract() == 0.0 && m.abs() < 64.0 {
        let k = m as i32;
        if k % 2 == 0 {
            s.powi(k / 2)
        } else {
            s.powi((k - 1) / 2) * s.sqrt()
        }
    } else {
        s.powf(0.5 * m)
    }
}

impl Expr {
    /// Checked evaluation at a point.
    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        CompiledExpr::new(self).eval_checked(p)
    }

    pub fn compile(&self) -> CompiledExpr {
        CompiledExpr::new(self)
    }
}

/// Checked evaluation of `e` at `p`.
pub fn evaluate(e: &Expr, p: &Point) -> Result<f64, EvalError> {
    e.eval(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn spec_values() {
        let e = parse("jbr(x1)", 1).unwrap();
        assert_eq!(evaluate(&e, &Point::new().with(Var::x(0), 0.0)).unwrap(), 1.0);
        let e = parse("x1*xi1 + t*xi1", 1).unwrap();
        let p = Point::new()
            .with(Var::x(0), 2.0)
            .with(Var::xi(0), 3.0)
            .with(Var::T, 1.0);
        assert_eq!(evaluate(&e, &p).unwrap(), 9.0);
        let e = parse("exp(sin(x1))", 1).unwrap();
        assert_eq!(evaluate(&e, &Point::new().with(Var::x(0), 1.0)).unwrap(), 1f64.sin().exp());
    }

    #[test]
    fn errors() {
        let e = parse("x1 + y1", 1).unwrap();
        let p = Point::new().with(Var::x(0), 1.0);
        assert_eq!(evaluate(&e, &p), Err(EvalError::Unbound(Var::y(0))));
        let e = parse("sqrt(x1)", 1).unwrap();
        assert!(matches!(
            evaluate(&e, &Point::new().with(Var::x(0), -4.0)),
            Err(EvalError::Domain { op: "sqrt", .. })
        ));
        let e = parse("1 / x1", 1).unwrap();
        assert_eq!(
            evaluate(&e, &Point::new().with(Var::x(0), 0.0)),
            Err(EvalError::NonFinite(f64::INFINITY))
        );
        assert!(e.compile().eval(&Point::new().with(Var::x(0), 0.0)).is_infinite());
    }

    #[test]
    fn shared_subtrees_compile_once() {
        let mut e = Expr::var(Var::x(0));
        for _ in 0..60 {
            e = e.mul(&e).add(&Expr::one());
        }
        let c = e.compile();
        assert!(c.len() < 200);
        assert!(c.eval(&Point::new().with(Var::x(0), 0.0)).is_infinite());
    }

    #[test]
    fn bracket_powers() {
        for m in [-3.0, -2.0, -1.0, 0.5, 1.0, 2.0, 3.0, 1.7] {
            let s: f64 = 2.5;
            assert!((bracket_power(s, m) - s.powf(m / 2.0)).abs() < 1e-14);
        }
    }
}
