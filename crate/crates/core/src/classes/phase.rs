use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    better_worst, block_bracket, check_dim, check_vars, ClassError, DecayEntry, DecayReport,
    DerivativeTable, Sample, SamplePlan,
};
use crate::expr::{diff, Block, CExpr, CompiledExpr, Expr, MultiIndex, Point};

/// Which theorem's phase hypotheses to certify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseProfile {
    /// `C1⟨ξ⟩ ≤ ⟨∇_xφ⟩ ≤ C2⟨ξ⟩`, `|∂_x^α φ| ≤ C⟨ξ⟩`, bounded mixed derivatives.
    Pt,
    /// `C1⟨x⟩ ≤ ⟨∇_ξφ⟩ ≤ C2⟨x⟩`, `|∂_ξ^β φ| ≤ C⟨x⟩`, bounded mixed derivatives.
    Tp,
    /// `|det ∂_x∂_ξφ| ≥ C0`, `∃x_β: |∂_ξ^β φ(x_β,ξ)| ≤ C`, bounded mixed derivatives.
    L2,
    /// The PT conditions plus `|∂_x^α φ| ≤ C⟨x⟩^{1-|α|}⟨ξ⟩` and
    /// `|∂_x^α ∂_ξ^β φ| ≤ C⟨x⟩^{1-|α|}` for `|β| ≥ 1`.
    Sg,
}

/// Optional declared constants; when present the empirical ones must honour them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DeclaredConstants {
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

/// Empirical constants found while sampling.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PhaseConstants {
    pub profile: Option<PhaseProfile>,
    /// Minimum sampled `|det ∂_x∂_ξφ|`.
    pub c0: Option<f64>,
    /// Minimum sampled bracket ratio.
    pub c1: Option<f64>,
    /// Maximum sampled bracket ratio.
    pub c2: Option<f64>,
    /// Trial point that certified each `x_β` condition, by `|β|`.
    pub x_beta: Vec<Option<Vec<f64>>>,
    pub growth_factor: f64,
}

/// A real phase `φ(x, ξ)` with the profile it is meant to satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpec {
    pub expr: Expr,
    pub dim: usize,
    pub profile: PhaseProfile,
    pub declared: DeclaredConstants,
    /// Trial points for the `x_β` condition.
    pub x_beta_trials: Vec<Vec<f64>>,
    /// Outer-shell growth factor that counts as unbounded growth.
    pub growth_factor: f64,
}

impl PhaseSpec {
    pub fn new(expr: Expr, dim: usize, profile: PhaseProfile) -> Result<Self, ClassError> {
        check_dim(dim)?;
        check_vars(&expr, &[Block::X, Block::Xi], "phase")?;
        Ok(PhaseSpec {
            expr,
            dim,
            profile,
            declared: DeclaredConstants::default(),
            x_beta_trials: vec![vec![0.0; dim]],
            growth_factor: 10.0,
        })
    }

    /// Build from a complex expression, which must have zero imaginary part.
    pub fn from_complex(e: &CExpr, dim: usize, profile: PhaseProfile) -> Result<Self, ClassError> {
        if !e.is_real() {
            return Err(ClassError::NonRealPhase);
        }
        PhaseSpec::new(e.re.clone(), dim, profile)
    }

    /// `∇_x φ` components.
    pub fn grad_x(&self) -> Vec<Expr> {
        (0..self.dim).map(|i| diff(&self.expr, Block::X.var(i), 1)).collect()
    }

    /// `∇_ξ φ` components.
    pub fn grad_xi(&self) -> Vec<Expr> {
        (0..self.dim).map(|i| diff(&self.expr, Block::Xi.var(i), 1)).collect()
    }
}

type Quotient = Box<dyn Fn(&[f64], &Point) -> f64 + Send + Sync>;

struct Condition {
    label: String,
    inputs: Vec<CompiledExpr>,
    quotient: Quotient,
    /// Replace the x block by this point before evaluating.
    pin_x: Option<Vec<f64>>,
}

struct Outcome {
    sup: f64,
    worst: Point,
    shell_sups: Vec<f64>,
}

fn run(c: &Condition, samples: &[Sample], shells: usize) -> Outcome {
    let mut vals = vec![0.0; c.inputs.len()];
    let mut buf = Vec::new();
    let mut out = Outcome {
        sup: f64::NEG_INFINITY,
        worst: Point::new(),
        shell_sups: vec![f64::NEG_INFINITY; shells],
    };
    for s in samples {
        let p = match &c.pin_x {
            Some(x) => s.point.with_block(Block::X, x),
            None => s.point,
        };
        for (v, f) in vals.iter_mut().zip(&c.inputs) {
            *v = f.eval_slots(p.slots(), &mut buf);
        }
        let q = (c.quotient)(&vals, &p);
        let q = if q.is_nan() { f64::INFINITY } else { q };
        if better_worst(q, &p, out.sup, &out.worst) {
            out.sup = q;
            out.worst = p;
        }
        if let Some(l) = s.shell {
            out.shell_sups[l] = out.shell_sups[l].max(q);
        }
    }
    out
}

fn bracket(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Certify the hypotheses of `φ.profile` on the sample plan.
///
/// A condition passes when its sampled sup is finite, at most `cap`, and the
/// sup over the outermost shell is at most `growth_factor` times the sup over
/// the shell inside it.
pub fn validate_phase(
    phi: &PhaseSpec,
    max_order: usize,
    cap: f64,
    plan: &SamplePlan,
) -> Result<DecayReport, ClassError> {
    let n = phi.dim;
    let blocks = [Block::X, Block::Xi];
    let table = DerivativeTable::total_order(&phi.expr, &blocks, n, max_order)?;
    let samples = plan.points(&blocks, n);
    let mut conds: Vec<Condition> = Vec::new();
    let mixed_weight_sg = phi.profile == PhaseProfile::Sg;

    for (idx, f) in table.entries() {
        let (a, b) = (idx[0].order(), idx[1].order());
        let lbl = format!("d_x^{} d_xi^{} phi", idx[0], idx[1]);
        if a >= 1 && b >= 1 {
            conds.push(Condition {
                label: format!("|{lbl}|"),
                inputs: vec![f.clone()],
                quotient: Box::new(|v, _| v[0].abs()),
                pin_x: None,
            });
        }
        match phi.profile {
            PhaseProfile::Pt | PhaseProfile::Sg if b == 0 && a >= 1 => {
                conds.push(Condition {
                    label: format!("|{lbl}| / <xi>"),
                    inputs: vec![f.clone()],
                    quotient: Box::new(move |v, p| v[0].abs() / block_bracket(p, Block::Xi, n)),
                    pin_x: None,
                });
            }
            PhaseProfile::Tp if a == 0 && b >= 1 => {
                conds.push(Condition {
                    label: format!("|{lbl}| / <x>"),
                    inputs: vec![f.clone()],
                    quotient: Box::new(move |v, p| v[0].abs() / block_bracket(p, Block::X, n)),
                    pin_x: None,
                });
            }
            _ => {}
        }
        if mixed_weight_sg {
            let e = 1.0 - a as f64;
            if b == 0 {
                conds.push(Condition {
                    label: format!("|{lbl}| / (<x>^{e} <xi>)"),
                    inputs: vec![f.clone()],
                    quotient: Box::new(move |v, p| {
                        v[0].abs()
                            / (block_bracket(p, Block::X, n).powf(e) * block_bracket(p, Block::Xi, n))
                    }),
                    pin_x: None,
                });
            } else {
                conds.push(Condition {
                    label: format!("|{lbl}| / <x>^{e}"),
                    inputs: vec![f.clone()],
                    quotient: Box::new(move |v, p| v[0].abs() / block_bracket(p, Block::X, n).powf(e)),
                    pin_x: None,
                });
            }
        }
    }
    let mut ratio_conds = None;
    match phi.profile {
        PhaseProfile::Pt | PhaseProfile::Sg | PhaseProfile::Tp => {
            let (grad, other, name, vname) = if phi.profile == PhaseProfile::Tp {
                (phi.grad_xi(), Block::X, "grad_xi", "x")
            } else {
                (phi.grad_x(), Block::Xi, "grad_x", "xi")
            };
            let inputs: Vec<CompiledExpr> = grad.iter().map(Expr::compile).collect();
            let first = conds.len();
            conds.push(Condition {
                label: format!("<{name} phi> / <{vname}>"),
                inputs: inputs.clone(),
                quotient: Box::new(move |v, p| bracket(v) / block_bracket(p, other, n)),
                pin_x: None,
            });
            conds.push(Condition {
                label: format!("<{vname}> / <{name} phi>"),
                inputs,
                quotient: Box::new(move |v, p| block_bracket(p, other, n) / bracket(v)),
                pin_x: None,
            });
            ratio_conds = Some(first);
        }
        PhaseProfile::L2 => {}
    }

    let mut det_cond = None;
    let mut xbeta_conds: Vec<(usize, Vec<usize>)> = Vec::new();
    if phi.profile == PhaseProfile::L2 {
        let mut inputs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let d = diff(&diff(&phi.expr, Block::X.var(i), 1), Block::Xi.var(j), 1);
                inputs.push(d.compile());
            }
        }
        det_cond = Some(conds.len());
        conds.push(Condition {
            label: "1 / |det d_x d_xi phi|".into(),
            inputs,
            quotient: Box::new(move |v, _| {
                let det = if n == 1 { v[0] } else { v[0] * v[3] - v[1] * v[2] };
                1.0 / det.abs()
            }),
            pin_x: None,
        });
        for order in 1..=max_order {
            let mut ids = Vec::new();
            for trial in &phi.x_beta_trials {
                for beta in MultiIndex::of_order(n, order) {
                    let f = table
                        .entries()
                        .iter()
                        .find(|(idx, _)| idx[0].order() == 0 && idx[1] == beta)
                        .map(|(_, f)| f.clone())
                        .expect("index in table");
                    ids.push(conds.len());
                    conds.push(Condition {
                        label: format!("|d_xi^{beta} phi(x_beta = {trial:?}, xi)|"),
                        inputs: vec![f],
                        quotient: Box::new(|v, _| v[0].abs()),
                        pin_x: Some(trial.clone()),
                    });
                }
            }
            xbeta_conds.push((order, ids));
        }
    }

    let shells = plan.shells();
    let outcomes: Vec<Outcome> = conds.par_iter().map(|c| run(c, &samples, shells)).collect();
    let growth = phi.growth_factor;
    let judge = |o: &Outcome| -> (bool, Option<String>) {
        if !(o.sup.is_finite() && o.sup <= cap) {
            return (false, Some(format!("sup {:e} exceeds cap {:e}", o.sup, cap)));
        }
        if shells >= 3 {
            let (outer, inner) = (o.shell_sups[shells - 1], o.shell_sups[shells - 2]);
            if outer > 1e-9 && outer > growth * inner.max(0.0) {
                return (
                    false,
                    Some(format!("grows from {inner:e} to {outer:e} across the outer shells")),
                );
            }
        }
        (true, None)
    };

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let in_xbeta = |i: usize| xbeta_conds.iter().any(|(_, ids)| ids.contains(&i));
    for (i, (c, o)) in conds.iter().zip(&outcomes).enumerate() {
        let (ok, why) = judge(o);
        if !ok && !in_xbeta(i) {
            failures.push(format!("{}: {}", c.label, why.unwrap_or_default()));
        }
        entries.push(DecayEntry {
            label: c.label.clone(),
            orders: Vec::new(),
            sup: o.sup,
            worst_point: o.worst,
            passed: ok,
        });
    }

    let mut constants = PhaseConstants {
        profile: Some(phi.profile),
        growth_factor: growth,
        ..Default::default()
    };
    if let Some(first) = ratio_conds {
        constants.c2 = Some(outcomes[first].sup);
        constants.c1 = Some(1.0 / outcomes[first + 1].sup);
    }
    if let Some(d) = det_cond {
        constants.c0 = Some(1.0 / outcomes[d].sup);
    }
    // ∃ x_β: for each order, one trial point must bound every β of that order.
    for (order, ids) in &xbeta_conds {
        let count = MultiIndex::of_order(n, *order).len();
        let found = phi.x_beta_trials.iter().enumerate().find(|(t, _)| {
            ids[t * count..(t + 1) * count]
                .iter()
                .all(|&i| judge(&outcomes[i]).0)
        });
        match found {
            Some((_, x)) => constants.x_beta.push(Some(x.clone())),
            None => {
                constants.x_beta.push(None);
                failures.push(format!("no trial x_beta bounds d_xi^beta phi for |beta| = {order}"));
            }
        }
    }
    let d = phi.declared;
    if let (Some(want), Some(got)) = (d.c0, constants.c0) {
        if got < want {
            failures.push(format!("C0 = {got:e} below declared {want:e}"));
        }
    }
    if let (Some(want), Some(got)) = (d.c1, constants.c1) {
        if got < want {
            failures.push(format!("C1 = {got:e} below declared {want:e}"));
        }
    }
    if let (Some(want), Some(got)) = (d.c2, constants.c2) {
        if got > want {
            failures.push(format!("C2 = {got:e} above declared {want:e}"));
        }
    }

    let worst = entries
        .iter()
        .cloned()
        .reduce(|a, b| {
            if better_worst(b.sup, &b.worst_point, a.sup, &a.worst_point) {
                b
            } else {
                a
            }
        });
    Ok(DecayReport {
        subject: "phi".into(),
        expr: phi.expr.to_string(),
        passed: failures.is_empty(),
        cap,
        max_order,
        plan: plan.clone(),
        sample_count: samples.len(),
        entries,
        worst,
        phase: Some(constants),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{DEFAULT_CAP, DEFAULT_MAX_ORDER};
    use crate::expr::{parse, substitute, Var};

    fn check(s: &str, profile: PhaseProfile) -> DecayReport {
        let e = substitute(&parse(s, 1).unwrap(), &[(Var::T, Expr::one())]);
        let phi = PhaseSpec::new(e, 1, profile).unwrap();
        validate_phase(&phi, DEFAULT_MAX_ORDER, DEFAULT_CAP, &SamplePlan::default()).unwrap()
    }

    #[test]
    fn linear_phase_l2() {
        let r = check("x1*xi1", PhaseProfile::L2);
        assert!(r.passed, "{:?}", r.failures);
        assert_eq!(r.phase.unwrap().c0, Some(1.0));
    }

    #[test]
    fn translation_like_phase_pt() {
        let r = check("x1*xi1 + t*jbr(xi1)", PhaseProfile::Pt);
        assert!(r.passed, "{:?}", r.failures);
        let c = r.phase.unwrap();
        assert_eq!((c.c1, c.c2), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn quadratic_in_x_fails_pt() {
        let r = check("x1^2*xi1", PhaseProfile::Pt);
        assert!(!r.passed);
        assert!(r.failures.iter().any(|f| f.contains("grad_x")), "{:?}", r.failures);
    }

    #[test]
    fn tp_and_sg_profiles() {
        assert!(check("x1*xi1 + jbr(x1)", PhaseProfile::Tp).passed);
        assert!(check("x1*xi1 + atan(x1)", PhaseProfile::Sg).passed);
        assert!(!check("x1*xi1 + x1^2", PhaseProfile::Sg).passed);
    }

    #[test]
    fn l2_with_bracket_shift_and_declared_constants() {
        let e = parse("x1*xi1 + jbr(xi1)", 1).unwrap();
        let mut phi = PhaseSpec::new(e, 1, PhaseProfile::L2).unwrap();
        let r = validate_phase(&phi, 4, DEFAULT_CAP, &SamplePlan::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.phase.unwrap().c0, Some(1.0));
        phi.declared.c0 = Some(2.0);
        assert!(!validate_phase(&phi, 4, DEFAULT_CAP, &SamplePlan::default()).unwrap().passed);
    }

    #[test]
    fn x_beta_needs_a_good_trial() {
        // d_xi phi(x, xi) = x + xi is unbounded in xi for every x.
        let r = check("x1*xi1 + xi1^2/2", PhaseProfile::L2);
        assert!(!r.passed);
        assert!(r.phase.unwrap().x_beta[0].is_none());
    }

    #[test]
    fn complex_phase_rejected() {
        let c = CExpr::new(parse("x1*xi1", 1).unwrap(), Expr::one());
        assert_eq!(
            PhaseSpec::from_complex(&c, 1, PhaseProfile::L2),
            Err(ClassError::NonRealPhase)
        );
    }
}
