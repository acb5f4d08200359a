use num_complex::Complex64;

use super::compiled::{CompiledExpr, EvalError};
use super::diff::diff;
use super::node::Expr;
use super::rewrite::{simplify, substitute};
use super::var::{Point, Var, SLOT_COUNT};

/// A complex-valued expression `re + i·im` with real expression parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CExpr {
    pub re: Expr,
    pub im: Expr,
}

impl From<Expr> for CExpr {
    fn from(re: Expr) -> Self {
        CExpr::real(re)
    }
}

impl CExpr {
    pub fn new(re: Expr, im: Expr) -> Self {
        CExpr { re, im }
    }

    pub fn real(re: Expr) -> Self {
        CExpr {
            re,
            im: Expr::zero(),
        }
    }

    pub fn zero() -> Self {
        CExpr::real(Expr::zero())
    }

    pub fn one() -> Self {
        CExpr::real(Expr::one())
    }

    /// `e^{iψ}` for a real expression `ψ`.
    pub fn expi(psi: &Expr) -> Self {
        CExpr {
            re: psi.cos(),
            im: psi.sin(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn add(&self, o: &CExpr) -> CExpr {
        CExpr::new(self.re.add(&o.re), self.im.add(&o.im))
    }

    pub fn sub(&self, o: &CExpr) -> CExpr {
        CExpr::new(self.re.sub(&o.re), self.im.sub(&o.im))
    }

    pub fn mul(&self, o: &CExpr) -> CExpr {
        if self.is_real() && o.is_real() {
            return CExpr::real(self.re.mul(&o.re));
        }
        CExpr::new(
            self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        )
    }

    pub fn mul_real(&self, r: &Expr) -> CExpr {
        CExpr::new(self.re.mul(r), self.im.mul(r))
    }

    pub fn scale(&self, c: f64) -> CExpr {
        self.mul_real(&Expr::constant(c))
    }

    /// Multiply by `i^q`.
    pub fn mul_i_pow(&self, q: i32) -> CExpr {
        match q.rem_euclid(4) {
            0 => self.clone(),
            1 => CExpr::new(self.im.neg(), self.re.clone()),
            2 => CExpr::new(self.re.neg(), self.im.neg()),
            _ => CExpr::new(self.im.clone(), self.re.neg()),
        }
    }

    pub fn diff(&self, v: Var, k: usize) -> CExpr {
        CExpr::new(diff(&self.re, v, k), diff(&self.im, v, k))
    }

    pub fn substitute(&self, subs: &[(Var, Expr)]) -> CExpr {
        CExpr::new(substitute(&self.re, subs), substitute(&self.im, subs))
    }

    pub fn simplify(&self) -> CExpr {
        CExpr::new(simplify(&self.re), simplify(&self.im))
    }

    pub fn eval(&self, p: &Point) -> Result<Complex64, EvalError> {
        let re = self.re.eval(p)?;
        let im = if self.im.is_zero() { 0.0 } else { self.im.eval(p)? };
        Ok(Complex64::new(re, im))
    }

    pub fn compile(&self) -> CompiledCExpr {
        CompiledCExpr {
            re: self.re.compile(),
            im: (!self.im.is_zero()).then(|| self.im.compile()),
        }
    }
}

impl std::fmt::Display for CExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "i*({})", self.im)
        } else {
            write!(f, "({}) + i*({})", self.re, self.im)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledCExpr {
    re: CompiledExpr,
    im: Option<CompiledExpr>,
}

impl CompiledCExpr {
    pub fn eval_slots(&self, slots: &[f64; SLOT_COUNT], buf: &mut Vec<f64>) -> Complex64 {
        let re = self.re.eval_slots(slots, buf);
        let im = self.im.as_ref().map_or(0.0, |c| c.eval_slots(slots, buf));
        Complex64::new(re, im)
    }

    pub fn eval(&self, p: &Point) -> Complex64 {
        self.eval_slots(p.slots(), &mut Vec::new())
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.re.depends_on(v) || self.im.as_ref().is_some_and(|c| c.depends_on(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn quarter_turns_and_products() {
        let z = CExpr::new(Expr::constant(2.0), Expr::constant(3.0));
        let p = Point::new();
        for q in -4..8 {
            let want = Complex64::new(2.0, 3.0) * Complex64::i().powi(q);
            assert!((z.mul_i_pow(q).eval(&p).unwrap() - want).norm() < 1e-15);
        }
        let w = z.mul(&z);
        assert_eq!(w.eval(&p).unwrap(), Complex64::new(-5.0, 12.0));
    }

    #[test]
    fn derivative_of_phase_factor() {
        let psi = parse("x1^2", 1).unwrap();
        let d = CExpr::expi(&psi).diff(Var::x(0), 1);
        let x = 0.7;
        let got = d.eval(&Point::new().with(Var::x(0), x)).unwrap();
        let want = Complex64::i() * 2.0 * x * Complex64::new(0.0, x * x).exp();
        assert!((got - want).norm() < 1e-14);
        assert_eq!(d.compile().eval(&Point::new().with(Var::x(0), x)), got);
    }
}
