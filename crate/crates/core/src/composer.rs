//! Symbolic asymptotic expansions of composition amplitudes and the order
//! arithmetic of the resulting classes.

use std::fmt;

use num_complex::Complex64;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::classes::{
    validate_amplitude, validate_phase, validate_symbol, AmplitudeSpec, ClassError, DecayFlags,
    OrderPair, OrderTriple, PhaseProfile, PhaseSpec, SamplePlan, SymbolSpec, DEFAULT_CAP,
    DEFAULT_MAX_ORDER,
};
use crate::expr::{
    diff, diff_multi, rename_block, substitute, Block, CExpr, CompiledCExpr, DiffError, Expr,
    MultiIndex, Point, Var, MAX_ORDER,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("{what} failed validation: {detail}")]
    Validation { what: &'static str, detail: String },
    #[error("hypothesis not declared: {0}")]
    FlagViolation(String),
    #[error("dimension mismatch between inputs")]
    DimensionMismatch,
    #[error("unknown expansion kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionKind {
    Tp,
    Pt,
    TpReduce,
    PsdoReduce,
}

impl std::str::FromStr for ExpansionKind {
    type Err = ComposeError;
    fn from_str(s: &str) -> Result<Self, ComposeError> {
        match s {
            "tp" => Ok(ExpansionKind::Tp),
            "pt" => Ok(ExpansionKind::Pt),
            "tp-reduce" => Ok(ExpansionKind::TpReduce),
            "psdo" | "psdo-reduce" | "psido" | "psido-reduce" => Ok(ExpansionKind::PsdoReduce),
            other => Err(ComposeError::UnknownKind(other.to_string())),
        }
    }
}

/// Exact coefficient `i^q / d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coefficient {
    /// Quarter turns, reduced to `0..4`.
    pub quarter_turns: u8,
    pub denominator: u64,
}

impl Coefficient {
    pub fn new(quarter_turns: i64, denominator: u64) -> Self {
        Coefficient {
            quarter_turns: quarter_turns.rem_euclid(4) as u8,
            denominator,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::i().powi(self.quarter_turns as i32) / self.denominator as f64
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = ["1", "i", "-1", "-i"][self.quarter_turns as usize];
        if self.denominator == 1 {
            f.write_str(unit)
        } else {
            write!(f, "{unit}/{}", self.denominator)
        }
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Coefficient", 4)?;
        st.serialize_field("quarter_turns", &self.quarter_turns)?;
        st.serialize_field("denominator", &self.denominator)?;
        st.serialize_field("text", &self.to_string())?;
        let v = self.value();
        st.serialize_field("value", &[v.re, v.im])?;
        st.end()
    }
}

/// One summand `coefficient · body` of an expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm {
    /// One multi-index, or two for the two-index reduction.
    pub index: Vec<MultiIndex>,
    pub coefficient: Coefficient,
    pub body: CExpr,
}

impl ExpansionTerm {
    pub fn order(&self) -> usize {
        self.index.iter().map(MultiIndex::order).sum()
    }

    /// `coefficient · body` as a complex expression.
    pub fn value_expr(&self) -> CExpr {
        self.body
            .mul_i_pow(self.coefficient.quarter_turns as i32)
            .scale(1.0 / self.coefficient.denominator as f64)
    }

    pub fn eval(&self, p: &Point) -> Complex64 {
        self.coefficient.value() * self.body.compile().eval(p)
    }
}

impl Serialize for ExpansionTerm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ExpansionTerm", 4)?;
        st.serialize_field("index", &self.index)?;
        st.serialize_field("order", &self.order())?;
        st.serialize_field("coefficient", &self.coefficient)?;
        st.serialize_field("body", &self.body.to_string())?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PredictedOrders {
    Triple(OrderTriple),
    Pair(OrderPair),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionSeries {
    pub kind: ExpansionKind,
    pub dim: usize,
    /// Truncation order `N`.
    pub order: usize,
    pub terms: Vec<ExpansionTerm>,
    pub predicted_orders: PredictedOrders,
    pub predicted_flags: DecayFlags,
    /// Variable block in which the expansion improves.
    pub improving_variable: &'static str,
    /// Predicted order of the remainder after truncation at `N`.
    pub remainder_order: f64,
}

impl ExpansionSeries {
    /// Sum of all terms of total order `≤ n`.
    pub fn truncation(&self, n: usize) -> CExpr {
        self.terms
            .iter()
            .filter(|t| t.order() <= n)
            .fold(CExpr::zero(), |acc, t| acc.add(&t.value_expr()))
    }

    /// Compiled partial sums for `n = 0..=N`.
    pub fn compiled(&self) -> CompiledSeries {
        CompiledSeries {
            terms: self
                .terms
                .iter()
                .map(|t| (t.order(), t.coefficient.value(), t.body.compile()))
                .collect(),
        }
    }

    pub fn leading(&self) -> &ExpansionTerm {
        &self.terms[0]
    }
}

/// Fast evaluation of the partial sums of a series.
#[derive(Debug, Clone)]
pub struct CompiledSeries {
    terms: Vec<(usize, Complex64, CompiledCExpr)>,
}

impl CompiledSeries {
    /// Partial sums `S_0, ..., S_N` at `p`.
    pub fn partial_sums(&self, p: &Point, max_n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); max_n + 1];
        let mut buf = Vec::new();
        for (ord, c, f) in &self.terms {
            if *ord > max_n {
                continue;
            }
            let v = c * f.eval_slots(p.slots(), &mut buf);
            for s in out.iter_mut().skip(*ord) {
                *s += v;
            }
        }
        out
    }

    pub fn eval(&self, p: &Point, n: usize) -> Complex64 {
        self.partial_sums(p, n)[n]
    }
}

/// Validation switches for the expansion builders.
#[derive(Debug, Clone)]
pub struct ExpandOptions {
    pub validate: bool,
    pub max_order: usize,
    pub cap: f64,
    pub plan: SamplePlan,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            validate: true,
            max_order: DEFAULT_MAX_ORDER,
            cap: DEFAULT_CAP,
            plan: SamplePlan::default(),
        }
    }
}

impl ExpandOptions {
    pub fn unchecked() -> Self {
        ExpandOptions {
            validate: false,
            ..Default::default()
        }
    }

    fn amplitude(&self, a: &AmplitudeSpec) -> Result<(), ComposeError> {
        if self.validate {
            let r = validate_amplitude(a, self.max_order, self.cap, &self.plan)?;
            if !r.passed {
                return Err(ComposeError::Validation {
                    what: "amplitude",
                    detail: r.failures.join("; "),
                });
            }
        }
        Ok(())
    }

    fn symbol(&self, p: &SymbolSpec) -> Result<(), ComposeError> {
        if self.validate {
            let r = validate_symbol(p, self.max_order, self.cap, &self.plan)?;
            if !r.passed {
                return Err(ComposeError::Validation {
                    what: "symbol",
                    detail: r.failures.join("; "),
                });
            }
        }
        Ok(())
    }

    fn phase(&self, phi: &PhaseSpec, profile: PhaseProfile) -> Result<(), ComposeError> {
        if self.validate {
            let mut phi = phi.clone();
            phi.profile = profile;
            let r = validate_phase(&phi, self.max_order, self.cap, &self.plan)?;
            if !r.passed {
                return Err(ComposeError::Validation {
                    what: "phase",
                    detail: r.failures.join("; "),
                });
            }
        }
        Ok(())
    }
}

fn check_order(n: usize) -> Result<(), ComposeError> {
    if n > MAX_ORDER {
        return Err(DiffError::MaxOrderExceeded {
            order: n,
            limit: MAX_ORDER,
        }
        .into());
    }
    Ok(())
}

fn require(flag: bool, what: &str) -> Result<(), ComposeError> {
    if flag {
        Ok(())
    } else {
        Err(ComposeError::FlagViolation(what.to_string()))
    }
}

fn block_subs(from: Block, to: &[Expr]) -> Vec<(Var, Expr)> {
    to.iter()
        .enumerate()
        .map(|(i, e)| (from.var(i), e.clone()))
        .collect()
}

fn block_vars(b: Block, dim: usize) -> Vec<Expr> {
    (0..dim).map(|i| Expr::var(b.var(i))).collect()
}

/// Order arithmetic of the composition theorems.
///
/// `sg_phase` records whether the phase satisfies the SG profile, which is
/// needed for the result to improve in `x` under PT composition.
pub fn predict_orders(
    kind: ExpansionKind,
    a_orders: OrderTriple,
    a_flags: DecayFlags,
    p_orders: OrderPair,
    p_flags: DecayFlags,
    sg_phase: bool,
) -> (PredictedOrders, DecayFlags) {
    let (m, t) = (a_orders, p_orders);
    match kind {
        ExpansionKind::Tp => (
            PredictedOrders::Triple(OrderTriple::new(m.m1, m.m2 + t.t1, m.m3 + t.t2)),
            DecayFlags::new(a_flags.improving_x, a_flags.improving_y && p_flags.improving_x, false),
        ),
        ExpansionKind::Pt => (
            PredictedOrders::Triple(OrderTriple::new(m.m1 + t.t1, m.m2, m.m3 + t.t2)),
            DecayFlags::new(
                a_flags.improving_x && p_flags.improving_x && sg_phase,
                a_flags.improving_y,
                false,
            ),
        ),
        ExpansionKind::TpReduce => (
            PredictedOrders::Pair(OrderPair::new(m.m1 + m.m2 + t.t1, m.m3 + t.t2)),
            DecayFlags::NONE,
        ),
        ExpansionKind::PsdoReduce => (
            PredictedOrders::Pair(OrderPair::new(m.m1 + m.m2, m.m3)),
            DecayFlags::new(a_flags.improving_x, false, a_flags.improving_xi),
        ),
    }
}

fn remainder_order(kind: ExpansionKind, orders: PredictedOrders, n: usize) -> (f64, &'static str) {
    let drop = (n + 1) as f64;
    match (kind, orders) {
        (ExpansionKind::Tp | ExpansionKind::Pt, PredictedOrders::Triple(o)) => (o.m3 - drop, "xi"),
        (_, PredictedOrders::Pair(o)) => (o.t1 - drop, "x"),
        (_, PredictedOrders::Triple(o)) => (o.m1 - drop, "x"),
    }
}

/// `Ψ(x, y, ξ) = φ(y, ξ) − φ(x, ξ) + (x − y)·∇_xφ(x, ξ)`.
pub fn psi_pt(phi: &PhaseSpec) -> Expr {
    let n = phi.dim;
    let phi_y = rename_block(&phi.expr, Block::X, Block::Y, n);
    let lin = Expr::sum((0..n).map(|i| {
        Expr::var(Var::x(i))
            .sub(&Expr::var(Var::y(i)))
            .mul(&diff(&phi.expr, Var::x(i), 1))
    }));
    phi_y.sub(&phi.expr).add(&lin)
}

/// `Ψ(x, ξ, η) = φ(x, η) − φ(x, ξ) + (ξ − η)·∇_ξφ(x, ξ)`, the defect of the
/// frequency-side reduction; it vanishes to second order at `η = ξ`.
pub fn psi_tp(phi: &PhaseSpec) -> Expr {
    let n = phi.dim;
    let phi_eta = rename_block(&phi.expr, Block::Xi, Block::Eta, n);
    let lin = Expr::sum((0..n).map(|i| {
        Expr::var(Var::xi(i))
            .sub(&Expr::var(Var::eta(i)))
            .mul(&diff(&phi.expr, Var::xi(i), 1))
    }));
    phi_eta.sub(&phi.expr).add(&lin)
}

fn same_dim(dims: &[usize]) -> Result<usize, ComposeError> {
    if dims.windows(2).all(|w| w[0] == w[1]) {
        Ok(dims[0])
    } else {
        Err(ComposeError::DimensionMismatch)
    }
}

fn finish(
    kind: ExpansionKind,
    dim: usize,
    n: usize,
    terms: Vec<ExpansionTerm>,
    predicted: (PredictedOrders, DecayFlags),
) -> ExpansionSeries {
    let (rem, var) = remainder_order(kind, predicted.0, n);
    ExpansionSeries {
        kind,
        dim,
        order: n,
        terms,
        predicted_orders: predicted.0,
        predicted_flags: predicted.1,
        improving_variable: var,
        remainder_order: rem,
    }
}

/// `T∘P`: `c(x,z,ξ) ∼ Σ_α (i^{|α|}/α!) ∂_y^α[a(x,y,ξ) ∂_ξ^α p(y,ξ)]|_{y=z}`.
///
/// The phase factor `e^{i(y−z)·(η−ξ)}` of the exact amplitude turns each
/// `(η−ξ)^α` into `(i∂_y)^α`, hence the coefficient `i^{+|α|}`.
pub fn tp_expand(
    a: &AmplitudeSpec,
    p: &SymbolSpec,
    n: usize,
    opts: &ExpandOptions,
) -> Result<ExpansionSeries, ComposeError> {
    check_order(n)?;
    let dim = same_dim(&[a.dim, p.dim])?;
    require(p.flags.improving_xi, "TP composition needs a symbol improving in xi")?;
    opts.amplitude(a)?;
    opts.symbol(p)?;
    let p_y = rename_block(&p.expr, Block::X, Block::Y, dim);
    let to_z = block_subs(Block::Y, &block_vars(Block::Z, dim));
    let mut terms = Vec::new();
    for alpha in MultiIndex::up_to(dim, n) {
        let dp = diff_multi(&p_y, Block::Xi, &alpha)?;
        let prod = a.expr.mul(&dp);
        let body = substitute(&diff_multi(&prod, Block::Y, &alpha)?, &to_z);
        terms.push(ExpansionTerm {
            coefficient: Coefficient::new(alpha.order() as i64, alpha.factorial()),
            index: vec![alpha],
            body: CExpr::real(body),
        });
    }
    let pred = predict_orders(ExpansionKind::Tp, a.orders, a.flags, p.orders, p.flags, false);
    Ok(finish(ExpansionKind::Tp, dim, n, terms, pred))
}

/// `P∘T`: `c(x,z,ξ) ∼ Σ_α (i^{−|α|}/α!) ∂_ξ^α p(x,∇_xφ(x,ξ)) ∂_y^α[e^{iΨ(x,y,ξ)} a(y,z,ξ)]|_{y=x}`.
pub fn pt_expand(
    a: &AmplitudeSpec,
    p: &SymbolSpec,
    phi: &PhaseSpec,
    n: usize,
    opts: &ExpandOptions,
) -> Result<ExpansionSeries, ComposeError> {
    check_order(n)?;
    let dim = same_dim(&[a.dim, p.dim, phi.dim])?;
    opts.phase(phi, PhaseProfile::Pt)?;
    opts.amplitude(a)?;
    opts.symbol(p)?;
    let grad = phi.grad_x();
    let psi = psi_pt(phi);
    // a(y, z, ξ): rename x→y and y→z simultaneously.
    let mut subs = block_subs(Block::X, &block_vars(Block::Y, dim));
    subs.extend(block_subs(Block::Y, &block_vars(Block::Z, dim)));
    let a_yz = substitute(&a.expr, &subs);
    let inner = CExpr::expi(&psi).mul_real(&a_yz);
    let at_x = block_subs(Block::Y, &block_vars(Block::X, dim));
    let at_grad = block_subs(Block::Xi, &grad);
    let mut terms = Vec::new();
    for alpha in MultiIndex::up_to(dim, n) {
        let dp = substitute(&diff_multi(&p.expr, Block::Xi, &alpha)?, &at_grad);
        if dp.is_zero() {
            continue;
        }
        let mut d = inner.clone();
        for (i, &k) in alpha.entries().iter().enumerate() {
            d = d.diff(Var::y(i), k as usize);
        }
        let body = d.substitute(&at_x).mul_real(&dp);
        terms.push(ExpansionTerm {
            coefficient: Coefficient::new(-(alpha.order() as i64), alpha.factorial()),
            index: vec![alpha],
            body,
        });
    }
    let sg = phi.profile == PhaseProfile::Sg;
    let pred = predict_orders(ExpansionKind::Pt, a.orders, a.flags, p.orders, p.flags, sg);
    Ok(finish(ExpansionKind::Pt, dim, n, terms, pred))
}

/// `T∘P` reduced to a two-variable amplitude `c(x, ξ)`:
/// `Σ_{α,β} i^{−(|α|+|β|)}/(α!β!) ∂_x^α p(∇_ξφ, ξ) ∂_η^{α+β}[e^{iΨ(x,ξ,η)} ∂_y^β a(x,y,η)|_{y=∇_ξφ(x,ξ)}]|_{η=ξ}`,
/// truncated by total order `|α|+|β| ≤ N`.
pub fn tp_reduce(
    a: &AmplitudeSpec,
    p: &SymbolSpec,
    phi: &PhaseSpec,
    n: usize,
    opts: &ExpandOptions,
) -> Result<ExpansionSeries, ComposeError> {
    check_order(n)?;
    let dim = same_dim(&[a.dim, p.dim, phi.dim])?;
    require(a.flags.improving_y, "TP reduction needs an amplitude improving in y")?;
    require(p.flags.improving_x, "TP reduction needs a symbol improving in x")?;
    opts.phase(phi, PhaseProfile::Tp)?;
    opts.amplitude(a)?;
    opts.symbol(p)?;
    let grad = phi.grad_xi();
    let psi = psi_tp(phi);
    let e_psi = CExpr::expi(&psi);
    let a_eta = rename_block(&a.expr, Block::Xi, Block::Eta, dim);
    let y_at = block_subs(Block::Y, &grad);
    let x_at = block_subs(Block::X, &grad);
    let eta_at = block_subs(Block::Eta, &block_vars(Block::Xi, dim));
    let mut terms = Vec::new();
    for total in 0..=n {
        for na in 0..=total {
            for alpha in MultiIndex::of_order(dim, na) {
                let dp = substitute(&diff_multi(&p.expr, Block::X, &alpha)?, &x_at);
                if dp.is_zero() {
                    continue;
                }
                for beta in MultiIndex::of_order(dim, total - na) {
                    let da = substitute(&diff_multi(&a_eta, Block::Y, &beta)?, &y_at);
                    let mut d = e_psi.mul_real(&da);
                    for (i, &k) in alpha.add(&beta).entries().iter().enumerate() {
                        d = d.diff(Var::eta(i), k as usize);
                    }
                    let body = d.substitute(&eta_at).mul_real(&dp);
                    if body.is_zero() {
                        continue;
                    }
                    terms.push(ExpansionTerm {
                        coefficient: Coefficient::new(
                            -(total as i64),
                            alpha.factorial() * beta.factorial(),
                        ),
                        index: vec![alpha.clone(), beta],
                        body,
                    });
                }
            }
        }
    }
    if terms.is_empty() {
        terms.push(ExpansionTerm {
            index: vec![MultiIndex::zero(dim), MultiIndex::zero(dim)],
            coefficient: Coefficient::new(0, 1),
            body: CExpr::zero(),
        });
    }
    let pred = predict_orders(ExpansionKind::TpReduce, a.orders, a.flags, p.orders, p.flags, false);
    Ok(finish(ExpansionKind::TpReduce, dim, n, terms, pred))
}

/// Reduction of an amplitude operator to a standard quantization:
/// `c(x, ξ) ∼ Σ_β (i^{−|β|}/β!) ∂_ξ^β ∂_y^β a(x,y,ξ)|_{y=x}`.
pub fn psido_reduce(
    a: &AmplitudeSpec,
    n: usize,
    opts: &ExpandOptions,
) -> Result<ExpansionSeries, ComposeError> {
    check_order(n)?;
    require(a.flags.improving_y, "reduction needs an amplitude improving in y")?;
    opts.amplitude(a)?;
    let dim = a.dim;
    let at_x = block_subs(Block::Y, &block_vars(Block::X, dim));
    let mut terms = Vec::new();
    for beta in MultiIndex::up_to(dim, n) {
        let d = diff_multi(&diff_multi(&a.expr, Block::Y, &beta)?, Block::Xi, &beta)?;
        let body = substitute(&d, &at_x);
        if beta.order() > 0 && body.is_zero() {
            continue;
        }
        terms.push(ExpansionTerm {
            coefficient: Coefficient::new(-(beta.order() as i64), beta.factorial()),
            index: vec![beta],
            body: CExpr::real(body),
        });
    }
    let pred = predict_orders(
        ExpansionKind::PsdoReduce,
        a.orders,
        a.flags,
        OrderPair::default(),
        DecayFlags::NONE,
        false,
    );
    Ok(finish(ExpansionKind::PsdoReduce, dim, n, terms, pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn amp(s: &str, o: (f64, f64, f64), f: DecayFlags) -> AmplitudeSpec {
        AmplitudeSpec::new(parse(s, 1).unwrap(), 1, OrderTriple::new(o.0, o.1, o.2), f).unwrap()
    }

    fn sym(s: &str, o: (f64, f64), f: DecayFlags) -> SymbolSpec {
        SymbolSpec::new(parse(s, 1).unwrap(), 1, OrderPair::new(o.0, o.1), f).unwrap()
    }

    fn phase(s: &str, profile: PhaseProfile) -> PhaseSpec {
        PhaseSpec::new(parse(s, 1).unwrap(), 1, profile).unwrap()
    }

    fn pt(x: f64, z: f64, xi: f64) -> Point {
        Point::new().with(Var::x(0), x).with(Var::z(0), z).with(Var::xi(0), xi)
    }

    #[test]
    fn coefficients_are_exact() {
        for k in 0..=8u64 {
            let c = Coefficient::new(-(k as i64), (1..=k).product::<u64>().max(1));
            let want = Complex64::i().powi(-(k as i32)) / (1..=k).product::<u64>().max(1) as f64;
            assert_eq!(c.value(), want);
            assert_eq!(c.quarter_turns as u64, (4 - k % 4) % 4);
        }
        assert_eq!(Coefficient::new(-3, 6).to_string(), "i/6");
    }

    #[test]
    fn tp_with_unit_symbol_has_one_term() {
        let a = amp("x1*jbr(y1)^-1", (1.0, -1.0, 0.0), DecayFlags::new(true, true, true));
        let p = sym("1", (0.0, 0.0), DecayFlags::ALL);
        let s = tp_expand(&a, &p, 3, &ExpandOptions::default()).unwrap();
        assert_eq!(s.terms[0].body.re.to_string(), "x1 * jbr(z1)^-1");
        assert!(s.terms[1..].iter().all(|t| t.body.is_zero()));

        let a = amp("1", (0.0, 0.0, 0.0), DecayFlags::ALL);
        let p = sym("x1", (1.0, 0.0), DecayFlags::ALL);
        let s = tp_expand(&a, &p, 2, &ExpandOptions::default()).unwrap();
        assert_eq!(s.terms[0].body.re.to_string(), "z1");
    }

    #[test]
    fn tp_first_term_at_one_one() {
        let a = amp("jbr(y1)^-1", (0.0, -1.0, 0.0), DecayFlags::new(false, true, false));
        let p = sym("jbr(xi1)", (0.0, 1.0), DecayFlags::new(false, false, true));
        let s = tp_expand(&a, &p, 1, &ExpandOptions::default()).unwrap();
        let v = s.terms[1].eval(&pt(0.0, 1.0, 1.0));
        // i · ∂_y⟨y⟩⁻¹ · ∂_ξ⟨ξ⟩ at (1, 1) = i · (−2^{-3/2}) · 2^{-1/2}.
        assert!((v - Complex64::new(0.0, -0.25)).norm() < 1e-15, "{v}");
    }

    #[test]
    fn pt_leading_term_and_linear_phase() {
        let a = amp("atan(y1) * jbr(xi1)^-1", (0.0, 0.0, -1.0), DecayFlags::new(true, false, true));
        let p = sym("x1 * jbr(xi1)", (1.0, 1.0), DecayFlags::new(true, false, true));
        let phi = phase("x1*xi1 + atan(x1)", PhaseProfile::Pt);
        let s = pt_expand(&a, &p, &phi, 2, &ExpandOptions::default()).unwrap();
        let q = pt(0.4, -1.3, 2.5);
        let g = 2.5 + 1.0 / (1.0 + 0.16);
        let want = 0.4 * (1.0f64 + g * g).sqrt() * (-1.3f64).atan() / (1.0 + 2.5 * 2.5f64).sqrt();
        assert!((s.terms[0].eval(&q) - want).norm() < 1e-12);

        // Affine-in-x phase: no phase defect, terms are the standard ones.
        let a = amp("atan(x1) * jbr(xi1)^-1", (0.0, 0.0, -1.0), DecayFlags::new(true, true, true));
        let phi = phase("x1*xi1 + jbr(xi1)", PhaseProfile::Pt);
        let s = pt_expand(&a, &p, &phi, 2, &ExpandOptions::default()).unwrap();
        let q = pt(0.4, -1.3, 2.5);
        assert!(psi_pt(&phi).eval(&q.with(Var::y(0), 0.9)).unwrap().abs() < 1e-15);
        // α = 1: −i · ∂_ξ(x⟨ξ⟩) · ∂_y(atan y)|_{y=x} · ⟨ξ⟩⁻¹.
        let jb = (1.0f64 + 2.5 * 2.5).sqrt();
        let want = Complex64::new(0.0, -1.0) * (0.4 * 2.5 / jb) / (1.0 + 0.16) / jb;
        assert!((s.terms[1].eval(&q) - want).norm() < 1e-14);
    }

    #[test]
    fn pt_phase_defect_second_derivative() {
        let phi = phase("x1*xi1 + atan(x1)", PhaseProfile::Pt);
        let e = CExpr::expi(&psi_pt(&phi)).diff(Var::y(0), 2);
        let at = e.substitute(&[(Var::y(0), Var::x(0).into())]);
        let v = at.eval(&Point::new().with(Var::x(0), 1.0).with(Var::xi(0), 0.3)).unwrap();
        assert!((v - Complex64::new(0.0, -0.5)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn psido_reduce_of_y_xi() {
        let a = amp("y1*xi1", (0.0, 1.0, 1.0), DecayFlags::new(true, true, true));
        let s = psido_reduce(&a, 4, &ExpandOptions::unchecked()).unwrap();
        assert_eq!(s.terms.len(), 2);
        assert_eq!(s.terms[0].body.re.to_string(), "x1 * xi1");
        assert_eq!(s.terms[1].value_expr().eval(&Point::new()).unwrap(), Complex64::new(0.0, -1.0));
        let a = amp("x1*atan(xi1)", (1.0, 0.0, 0.0), DecayFlags::new(true, true, true));
        let s = psido_reduce(&a, 3, &ExpandOptions::default()).unwrap();
        assert_eq!(s.terms.len(), 1);
    }

    #[test]
    fn tp_reduce_leading_terms() {
        let a = amp("jbr(y1)^-1", (0.0, -1.0, 0.0), DecayFlags::new(true, true, true));
        let p = sym("1", (0.0, 0.0), DecayFlags::ALL);
        let phi = phase("x1*xi1 + jbr(x1)", PhaseProfile::Tp);
        let s = tp_reduce(&a, &p, &phi, 2, &ExpandOptions::default()).unwrap();
        let v = s.terms[0].eval(&Point::new().with(Var::x(0), 0.0).with(Var::xi(0), 7.0));
        assert!((v - 1.0).norm() < 1e-15);

        // Linear phase reduces to the pseudo-differential reduction.
        let a = amp("y1*xi1*jbr(xi1)^-1", (0.0, 1.0, 0.0), DecayFlags::new(true, true, true));
        let phi = phase("x1*xi1", PhaseProfile::Tp);
        let s = tp_reduce(&a, &p, &phi, 3, &ExpandOptions::unchecked()).unwrap();
        let r = psido_reduce(&a, 3, &ExpandOptions::unchecked()).unwrap();
        let q = Point::new().with(Var::x(0), 0.7).with(Var::xi(0), -1.9);
        for k in 0..=3 {
            let u = s.compiled().eval(&q, k);
            let w = r.compiled().eval(&q, k);
            assert!((u - w).norm() < 1e-13);
        }
    }

    #[test]
    fn order_predictions() {
        let f = DecayFlags::NONE;
        let (o, _) = predict_orders(
            ExpansionKind::Tp,
            OrderTriple::new(0.0, 0.0, 0.0),
            f,
            OrderPair::new(1.0, 0.0),
            f,
            false,
        );
        assert_eq!(o, PredictedOrders::Triple(OrderTriple::new(0.0, 1.0, 0.0)));
        let (o, _) = predict_orders(
            ExpansionKind::Pt,
            OrderTriple::new(1.0, -1.0, 0.0),
            f,
            OrderPair::new(0.0, 0.0),
            f,
            false,
        );
        assert_eq!(o, PredictedOrders::Triple(OrderTriple::new(1.0, -1.0, 0.0)));
        let (o, _) = predict_orders(
            ExpansionKind::PsdoReduce,
            OrderTriple::new(2.0, -1.0, 1.0),
            f,
            OrderPair::default(),
            f,
            false,
        );
        assert_eq!(o, PredictedOrders::Pair(OrderPair::new(1.0, 1.0)));
        let (_, flags) = predict_orders(
            ExpansionKind::Pt,
            OrderTriple::default(),
            DecayFlags::ALL,
            OrderPair::default(),
            DecayFlags::ALL,
            true,
        );
        assert!(flags.improving_x && flags.improving_y);
    }

    #[test]
    fn hypotheses_are_enforced() {
        let a = amp("1", (0.0, 0.0, 0.0), DecayFlags::NONE);
        assert!(matches!(
            psido_reduce(&a, 1, &ExpandOptions::default()),
            Err(ComposeError::FlagViolation(_))
        ));
        let a = amp("exp(y1)", (0.0, 0.0, 0.0), DecayFlags::ALL);
        assert!(matches!(
            psido_reduce(&a, 1, &ExpandOptions::default()),
            Err(ComposeError::Validation { .. })
        ));
        let a = amp("1", (0.0, 0.0, 0.0), DecayFlags::ALL);
        let p = sym("1", (0.0, 0.0), DecayFlags::ALL);
        let phi = phase("x1^2*xi1", PhaseProfile::Pt);
        assert!(pt_expand(&a, &p, &phi, 1, &ExpandOptions::default()).is_err());
        assert!(tp_expand(&a, &p, 9, &ExpandOptions::default()).is_err());
    }
}
