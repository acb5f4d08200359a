//! Declared growth classes of amplitudes, symbols and phases, and sampled
//! certification of their derivative bounds.

mod phase;
mod sample;
mod table;

use std::ops::Add;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{rename_block, Block, DiffError, Expr, MultiIndex, Point, Var, MAX_DIM};

pub use phase::{validate_phase, DeclaredConstants, PhaseConstants, PhaseProfile, PhaseSpec};
pub use sample::{Sample, SamplePlan};
pub use table::DerivativeTable;

/// Default derivative order for validation.
pub const DEFAULT_MAX_ORDER: usize = 4;
/// Default cap separating "bounded" from "growing" quotients.
pub const DEFAULT_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("phase has a non-zero imaginary part")]
    NonRealPhase,
    #[error("dimension {0} is not supported (use 1 or 2)")]
    BadDimension(usize),
    #[error("{what} depends on {var}, which is not one of its variables")]
    StrayVariable { what: &'static str, var: Var },
}

/// Growth exponents in `⟨x⟩, ⟨y⟩, ⟨ξ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderTriple {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl OrderTriple {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Self {
        OrderTriple { m1, m2, m3 }
    }
}

impl Add for OrderTriple {
    type Output = OrderTriple;
    fn add(self, o: OrderTriple) -> OrderTriple {
        OrderTriple::new(self.m1 + o.m1, self.m2 + o.m2, self.m3 + o.m3)
    }
}

/// Growth exponents of a two-block symbol: space block first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderPair {
    pub t1: f64,
    pub t2: f64,
}

impl OrderPair {
    pub fn new(t1: f64, t2: f64) -> Self {
        OrderPair { t1, t2 }
    }
}

impl Add for OrderPair {
    type Output = OrderPair;
    fn add(self, o: OrderPair) -> OrderPair {
        OrderPair::new(self.t1 + o.t1, self.t2 + o.t2)
    }
}

/// Whether each derivative in a block lowers that block's order by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayFlags {
    pub improving_x: bool,
    pub improving_y: bool,
    pub improving_xi: bool,
}

impl DecayFlags {
    pub const NONE: DecayFlags = DecayFlags {
        improving_x: false,
        improving_y: false,
        improving_xi: false,
    };
    pub const ALL: DecayFlags = DecayFlags {
        improving_x: true,
        improving_y: true,
        improving_xi: true,
    };

    pub fn new(x: bool, y: bool, xi: bool) -> Self {
        DecayFlags {
            improving_x: x,
            improving_y: y,
            improving_xi: xi,
        }
    }

    /// True if every flag set in `required` is also set here.
    pub fn covers(&self, required: &DecayFlags) -> bool {
        (self.improving_x || !required.improving_x)
            && (self.improving_y || !required.improving_y)
            && (self.improving_xi || !required.improving_xi)
    }
}

fn check_vars(e: &Expr, allowed: &[Block], what: &'static str) -> Result<(), ClassError> {
    for v in e.free_vars() {
        if !v.block().is_some_and(|b| allowed.contains(&b)) {
            return Err(ClassError::StrayVariable { what, var: v });
        }
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<(), ClassError> {
    if dim == 0 || dim > MAX_DIM {
        Err(ClassError::BadDimension(dim))
    } else {
        Ok(())
    }
}

/// Amplitude `a(x, y, ξ)` with its declared class.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpec {
    pub expr: Expr,
    pub dim: usize,
    pub orders: OrderTriple,
    pub flags: DecayFlags,
}

impl AmplitudeSpec {
    pub fn new(
        expr: Expr,
        dim: usize,
        orders: OrderTriple,
        flags: DecayFlags,
    ) -> Result<Self, ClassError> {
        check_dim(dim)?;
        check_vars(&expr, &[Block::X, Block::Y, Block::Xi], "amplitude")?;
        Ok(AmplitudeSpec {
            expr,
            dim,
            orders,
            flags,
        })
    }
}

/// Symbol `p(x, ξ)` with its declared class.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSpec {
    pub expr: Expr,
    pub dim: usize,
    pub orders: OrderPair,
    pub flags: DecayFlags,
}

impl SymbolSpec {
    pub fn new(
        expr: Expr,
        dim: usize,
        orders: OrderPair,
        flags: DecayFlags,
    ) -> Result<Self, ClassError> {
        check_dim(dim)?;
        check_vars(&expr, &[Block::X, Block::Xi], "symbol")?;
        Ok(SymbolSpec {
            expr,
            dim,
            orders,
            flags,
        })
    }

    /// The same symbol written in the variables `(y, η)`.
    pub fn in_y_eta(&self) -> Expr {
        let e = rename_block(&self.expr, Block::X, Block::Y, self.dim);
        rename_block(&e, Block::Xi, Block::Eta, self.dim)
    }
}

/// One multi-index combination of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEntry {
    /// Human-readable condition, e.g. `d_y^(1) d_xi^(2) a`.
    pub label: String,
    /// Derivative orders per block, in block order.
    pub orders: Vec<MultiIndex>,
    /// Sampled sup of the weighted quotient (`inf` if non-finite).
    pub sup: f64,
    pub worst_point: Point,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub subject: String,
    pub expr: String,
    pub passed: bool,
    pub cap: f64,
    pub max_order: usize,
    pub plan: SamplePlan,
    pub sample_count: usize,
    pub entries: Vec<DecayEntry>,
    /// Entry with the largest quotient.
    pub worst: Option<DecayEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseConstants>,
    pub failures: Vec<String>,
}

impl DecayReport {
    fn assemble(
        subject: &str,
        expr: &Expr,
        cap: f64,
        max_order: usize,
        plan: &SamplePlan,
        sample_count: usize,
        entries: Vec<DecayEntry>,
    ) -> DecayReport {
        let failures: Vec<String> = entries
            .iter()
            .filter(|e| !e.passed)
            .map(|e| format!("{}: sup {:e} exceeds cap", e.label, e.sup))
            .collect();
        let worst = entries
            .iter()
            .cloned()
            .reduce(|a, b| if better_worst(b.sup, &b.worst_point, a.sup, &a.worst_point) { b } else { a });
        DecayReport {
            subject: subject.to_string(),
            expr: expr.to_string(),
            passed: failures.is_empty(),
            cap,
            max_order,
            plan: plan.clone(),
            sample_count,
            entries,
            worst,
            phase: None,
            failures,
        }
    }
}

/// Ordering for worst points: larger quotient, then larger point norm.
pub(crate) fn better_worst(q: f64, p: &Point, best_q: f64, best_p: &Point) -> bool {
    q > best_q || (q == best_q && p.norm() > best_p.norm())
}

/// Sup of `|∂f| · weight` over the samples, with the worst point.
pub(crate) fn weighted_sup(
    f: &crate::expr::CompiledExpr,
    samples: &[Sample],
    weight: impl Fn(&Point) -> f64,
) -> (f64, Point) {
    let mut best = (f64::NEG_INFINITY, Point::new());
    let mut buf = Vec::new();
    for s in samples {
        let v = f.eval_slots(s.point.slots(), &mut buf).abs() * weight(&s.point);
        let q = if v.is_nan() { f64::INFINITY } else { v };
        if better_worst(q, &s.point, best.0, &best.1) {
            best = (q, s.point);
        }
    }
    best
}

pub(crate) fn block_bracket(p: &Point, b: Block, dim: usize) -> f64 {
    let s: f64 = (0..dim).map(|i| p.get(b.var(i)).unwrap_or(0.0).powi(2)).sum();
    (1.0 + s).sqrt()
}

fn label(prefix: &str, blocks: &[Block], idx: &[MultiIndex]) -> String {
    let mut s = String::new();
    for (b, a) in blocks.iter().zip(idx) {
        if a.order() > 0 {
            s.push_str(&format!("d_{}^{} ", b.prefix(), a));
        }
    }
    s.push_str(prefix);
    s
}

/// Sampled certification of a block-weighted derivative bound:
/// `|∂^{idx} f| ≤ C Π_b ⟨v_b⟩^{order_b - [improving_b]·|idx_b|}`.
fn validate_blocks(
    subject: &str,
    expr: &Expr,
    dim: usize,
    blocks: &[Block],
    orders: &[f64],
    improving: &[bool],
    max_order: usize,
    cap: f64,
    plan: &SamplePlan,
) -> Result<DecayReport, ClassError> {
    let table = DerivativeTable::total_order(expr, blocks, dim, max_order)?;
    let samples = plan.points(blocks, dim);
    let entries: Vec<DecayEntry> = table
        .entries()
        .par_iter()
        .map(|(idx, f)| {
            let exps: Vec<f64> = (0..blocks.len())
                .map(|k| {
                    let gain = if improving[k] { idx[k].order() as f64 } else { 0.0 };
                    -(orders[k] - gain)
                })
                .collect();
            let (sup, worst_point) = weighted_sup(f, &samples, |p| {
                blocks
                    .iter()
                    .zip(&exps)
                    .map(|(&b, &e)| block_bracket(p, b, dim).powf(e))
                    .product()
            });
            DecayEntry {
                label: label(subject, blocks, idx),
                orders: idx.clone(),
                sup,
                worst_point,
                passed: sup.is_finite() && sup <= cap,
            }
        })
        .collect();
    Ok(DecayReport::assemble(
        subject,
        expr,
        cap,
        max_order,
        plan,
        samples.len(),
        entries,
    ))
}

/// Certify `|∂_x^α ∂_y^β ∂_ξ^γ a| ≤ C ⟨x⟩^{m1[-|α|]} ⟨y⟩^{m2[-|β|]} ⟨ξ⟩^{m3[-|γ|]}`
/// for `|α|+|β|+|γ| ≤ max_order`, with the bracketed gains switched on by the flags.
pub fn validate_amplitude(
    a: &AmplitudeSpec,
    max_order: usize,
    cap: f64,
    plan: &SamplePlan,
) -> Result<DecayReport, ClassError> {
    let f = a.flags;
    validate_blocks(
        "a",
        &a.expr,
        a.dim,
        &[Block::X, Block::Y, Block::Xi],
        &[a.orders.m1, a.orders.m2, a.orders.m3],
        &[f.improving_x, f.improving_y, f.improving_xi],
        max_order,
        cap,
        plan,
    )
}

/// Certify `|∂_x^α ∂_ξ^β p| ≤ C ⟨x⟩^{t1[-|α|]} ⟨ξ⟩^{t2[-|β|]}`.
pub fn validate_symbol(
    p: &SymbolSpec,
    max_order: usize,
    cap: f64,
    plan: &SamplePlan,
) -> Result<DecayReport, ClassError> {
    let f = p.flags;
    validate_blocks(
        "p",
        &p.expr,
        p.dim,
        &[Block::X, Block::Xi],
        &[p.orders.t1, p.orders.t2],
        &[f.improving_x, f.improving_xi],
        max_order,
        cap,
        plan,
    )
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

    fn check_a(a: &AmplitudeSpec) -> DecayReport {
        validate_amplitude(a, DEFAULT_MAX_ORDER, DEFAULT_CAP, &SamplePlan::default()).unwrap()
    }

    fn check_p(p: &SymbolSpec) -> DecayReport {
        validate_symbol(p, DEFAULT_MAX_ORDER, DEFAULT_CAP, &SamplePlan::default()).unwrap()
    }

    #[test]
    fn constant_amplitude() {
        let r = check_a(&amp("1", (0.0, 0.0, 0.0), DecayFlags::ALL));
        assert!(r.passed);
        assert!(r.entries.iter().all(|e| e.sup <= 1.0));
    }

    #[test]
    fn inverse_bracket_in_y() {
        let r = check_a(&amp("jbr(y1)^-1", (0.0, -1.0, 0.0), DecayFlags::new(false, true, false)));
        assert!(r.passed, "{:?}", r.failures);
    }

    #[test]
    fn exponential_fails_at_largest_y() {
        let r = check_a(&amp("exp(y1)", (3.0, 3.0, 3.0), DecayFlags::NONE));
        assert!(!r.passed);
        let w = r.worst.unwrap();
        assert_eq!(w.worst_point.get(Var::y(0)), Some(1e4));
    }

    #[test]
    fn bracket_symbols() {
        for s in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let p = SymbolSpec::new(
                Expr::bracket_pow(vec![Var::xi(0).into()], s),
                1,
                OrderPair::new(0.0, s),
                DecayFlags::new(false, false, true),
            )
            .unwrap();
            assert!(check_p(&p).passed, "s = {s}");
        }
        assert!(check_p(&sym("x1*xi1", (1.0, 1.0), DecayFlags::new(true, false, true))).passed);
        let r = check_p(&sym("sin(xi1)", (0.0, 0.0), DecayFlags::new(false, false, true)));
        assert!(!r.passed);
    }

    #[test]
    fn stray_variables_rejected() {
        let err = SymbolSpec::new(parse("y1", 1).unwrap(), 1, OrderPair::default(), DecayFlags::NONE);
        assert!(matches!(err, Err(ClassError::StrayVariable { .. })));
    }

    #[test]
    fn two_dimensional_amplitude() {
        let a = AmplitudeSpec::new(
            parse("jbrpow(y1, y2, -2) * atan(jbr(xi1, xi2))", 2).unwrap(),
            2,
            OrderTriple::new(0.0, -2.0, 0.0),
            DecayFlags::new(false, true, true),
        )
        .unwrap();
        let r = validate_amplitude(&a, 2, DEFAULT_CAP, &SamplePlan::default()).unwrap();
        assert!(r.passed, "{:?}", r.failures);
    }
}
