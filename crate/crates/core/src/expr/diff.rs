use std::collections::HashMap;

use thiserror::Error;

use super::multi_index::MultiIndex;
use super::node::{BinaryOp, Expr, Node, UnaryOp};
use super::var::{Block, Var};

/// Default cap on the total order of a multi-index derivative.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("derivative order {order} exceeds the limit {limit}")]
    MaxOrderExceeded { order: usize, limit: usize },
    #[error("multi-index has {got} entries but the block has dimension at most {max}")]
    BadIndexLength { got: usize, max: usize },
}

/// Exact `k`-th partial derivative of `e` with respect to `var`.
pub fn diff(e: &Expr, var: Var, k: usize) -> Expr {
    let mut out = e.clone();
    for _ in 0..k {
        if out.is_zero() {
            break;
        }
        out = diff1(&out, var);
    }
    out
}

/// `∂^α` over the components of `block`, using the default order limit.
pub fn diff_multi(e: &Expr, block: Block, alpha: &MultiIndex) -> Result<Expr, DiffError> {
    diff_multi_limited(e, block, alpha, MAX_ORDER)
}

pub fn diff_multi_limited(
    e: &Expr,
    block: Block,
    alpha: &MultiIndex,
    limit: usize,
) -> Result<Expr, DiffError> {
    if alpha.order() > limit {
        return Err(DiffError::MaxOrderExceeded {
            order: alpha.order(),
            limit,
        });
    }
    if alpha.dim() > super::var::MAX_DIM {
        return Err(DiffError::BadIndexLength {
            got: alpha.dim(),
            max: super::var::MAX_DIM,
        });
    }
    let mut out = e.clone();
    for (i, &k) in alpha.entries().iter().enumerate() {
        out = diff(&out, block.var(i), k as usize);
    }
    Ok(out)
}

fn diff1(e: &Expr, var: Var) -> Expr {
    let mut memo = HashMap::new();
    d(e, var, &mut memo)
}

fn d(e: &Expr, v: Var, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(hit) = memo.get(&e.id()) {
        return hit.clone();
    }
    let out = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(w) => Expr::constant(if *w == v { 1.0 } else { 0.0 }),
        Node::Unary(op, a) => {
            let da = d(a, v, memo);
            match op {
                UnaryOp::Neg => da.neg(),
                UnaryOp::Sqrt => da.div(&Expr::constant(2.0).mul(e)),
                UnaryOp::Exp => da.mul(e),
                UnaryOp::Sin => da.mul(&a.cos()),
                UnaryOp::Cos => da.mul(&a.sin()).neg(),
                UnaryOp::Atan => da.mul(&Expr::bracket_pow(vec![a.clone()], -2.0)),
            }
        }
        Node::Binary(op, a, b) => {
            let (da, db) = (d(a, v, memo), d(b, v, memo));
            match op {
                BinaryOp::Add => da.add(&db),
                BinaryOp::Sub => da.sub(&db),
                BinaryOp::Mul => da.mul(b).add(&a.mul(&db)),
                BinaryOp::Div => {
                    if db.is_zero() {
                        da.div(b)
                    } else {
                        da.div(b).sub(&a.mul(&db).div(&b.powi(2)))
                    }
                }
            }
        }
        Node::Pow(a, k) => Expr::constant(*k as f64)
            .mul(&a.powi(k - 1))
            .mul(&d(a, v, memo)),
        Node::Bracket(args, m) => {
            let s = Expr::sum(args.iter().map(|a| a.mul(&d(a, v, memo))));
            if *m == 1.0 {
                s.div(e)
            } else {
                Expr::constant(*m)
                    .mul(&Expr::bracket_pow(args.clone(), m - 2.0))
                    .mul(&s)
            }
        }
    };
    memo.insert(e.id(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Point};

    fn x() -> Var {
        Var::x(0)
    }

    #[test]
    fn square_and_bracket() {
        let e = parse("xi1^2", 1).unwrap();
        assert_eq!(diff(&e, Var::xi(0), 1).to_string(), "2 * xi1");
        let e = parse("jbr(x1)", 1).unwrap();
        assert_eq!(diff(&e, x(), 1).to_string(), "x1 / jbr(x1)");
    }

    #[test]
    fn third_derivative_of_arctan_matches_five_point_stencil() {
        let e = parse("atan(x1)", 1).unwrap();
        let d3 = diff(&e, x(), 3);
        let exact = d3.eval(&Point::new().with(x(), 1.0)).unwrap();
        // Five-point stencil for the third derivative, h = 1e-3.
        let f = |t: f64| t.atan();
        let h = 1e-3;
        let fd = (f(1.0 + 2.0 * h) - 2.0 * f(1.0 + h) + 2.0 * f(1.0 - h) - f(1.0 - 2.0 * h))
            / (2.0 * h * h * h);
        assert!((exact - fd).abs() < 1e-6, "{exact} vs {fd}");
        assert!((exact - 0.5).abs() < 1e-14);
    }

    #[test]
    fn multi_index_derivatives() {
        let e = parse("x1*y1*xi1", 1).unwrap();
        let got = diff_multi(&e, Block::Y, &MultiIndex::new(vec![1])).unwrap();
        let p = Point::new().with(x(), 2.0).with(Var::xi(0), 3.0);
        assert_eq!(got.eval(&p).unwrap(), 6.0);
        assert!(!got.depends_on(Var::y(0)));

        assert_eq!(diff_multi(&e, Block::Xi, &MultiIndex::zero(1)).unwrap(), e);

        let e = Expr::jbr(vec![Var::y(0).into()]).powi(-1);
        let d2 = diff_multi(&e, Block::Y, &MultiIndex::new(vec![2])).unwrap();
        let v = d2.eval(&Point::new().with(Var::y(0), 0.0)).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_limit() {
        let e = parse("x1", 1).unwrap();
        let err = diff_multi(&e, Block::X, &MultiIndex::new(vec![9])).unwrap_err();
        assert_eq!(err, DiffError::MaxOrderExceeded { order: 9, limit: 8 });
    }

    #[test]
    fn bracket_power_rule() {
        let e = parse("jbrpow(x1, x2, -3)", 2).unwrap();
        let de = diff(&e, Var::x(1), 1);
        let p = Point::new().with(Var::x(0), 0.5).with(Var::x(1), -1.5);
        let r2: f64 = 1.0 + 0.25 + 2.25;
        let expect = -3.0 * r2.powf(-2.5) * -1.5;
        assert!((de.eval(&p).unwrap() - expect).abs() < 1e-14);
    }
}
