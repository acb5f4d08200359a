//! Brute-force oscillatory quadrature for the exact composition amplitudes
//! and for the operator `T` itself (dimension one).
//!
//! Every target is rewritten around its stationary point as
//! `(2π)⁻¹ ∫∫ e^{iσst} R(s) C(t) M(s,t) W_ε(s) W_ε(t) ds dt`, where `R` and
//! `C` collect the factors that depend on one variable only. The double sum
//! then costs one complex multiply-add per node pair when `M ≡ 1`, and the
//! kernel `e^{iσst}` is produced by recurrence along each row.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{AmplitudeSpec, PhaseSpec, SymbolSpec};
use crate::expr::{diff, CompiledExpr, Expr, Point, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid quadrature plan: {0}")]
    BadPlan(String),
    #[error("the oracle works in dimension 1, got {0}")]
    Dimension(usize),
    #[error("integrand is not finite at s = {s}, t = {t}")]
    NonFinite { s: f64, t: f64 },
}

/// Regularizing window applied in both integration variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mollifier {
    /// Smooth cutoff equal to 1 on `|εs| ≤ 1` and 0 on `|εs| ≥ 2`. All its
    /// moments vanish, so the value is taken at the smallest `ε`.
    #[default]
    FlatTop,
    /// `exp(−ε²s²)`, extrapolated to `ε → 0` in `ε²`.
    Gaussian,
}

impl Mollifier {
    pub fn window(self, u: f64) -> f64 {
        match self {
            Mollifier::FlatTop => flat_top(u),
            Mollifier::Gaussian => (-u * u).exp(),
        }
    }
}

fn flat_top(u: f64) -> f64 {
    let a = u.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let f = |t: f64| (-1.0 / t).exp();
        let (p, q) = (f(2.0 - a), f(a - 1.0));
        p / (p + q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadPlan {
    /// Truncation radius per integration variable.
    pub radius: f64,
    /// Trapezoid nodes per axis.
    pub nodes: usize,
    /// Strictly decreasing mollifier widths.
    pub eps: Vec<f64>,
    pub mollifier: Mollifier,
    /// Largest acceptable spread across the `ε` sequence, relative to `max(|c|, 1)`.
    pub tol: f64,
}

impl Default for QuadPlan {
    fn default() -> Self {
        QuadPlan {
            radius: 30.0,
            nodes: 2048,
            eps: vec![0.4, 0.2, 0.1],
            mollifier: Mollifier::FlatTop,
            tol: 1e-3,
        }
    }
}

/// Minimum trapezoid nodes per wavelength of the fastest kernel oscillation.
pub const NODES_PER_WAVELENGTH: f64 = 8.0;

impl QuadPlan {
    /// High-accuracy plan for amplitudes with only algebraic decay: windows
    /// out to `|s| ≤ 2/0.03` resolved at 8 nodes per wavelength.
    pub fn fine() -> Self {
        QuadPlan {
            radius: 67.0,
            nodes: 12288,
            eps: vec![0.05, 0.04, 0.03],
            ..Default::default()
        }
    }

    /// The same plan with every `ε` halved, for stability checks.
    pub fn refined(&self) -> Self {
        let mut p = self.clone();
        p.eps.iter_mut().for_each(|e| *e /= 2.0);
        p
    }

    pub fn step(&self) -> f64 {
        2.0 * self.radius / self.nodes as f64
    }

    /// Largest `|s|` at which the integrand is not cut off.
    pub fn reach(&self) -> f64 {
        match self.mollifier {
            Mollifier::FlatTop => self.radius.min(2.0 / self.eps.last().copied().unwrap_or(1.0)),
            Mollifier::Gaussian => self.radius,
        }
    }

    /// Nodes per wavelength of `e^{ist}` at the largest `|t|` reached.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / (self.reach() * self.step())
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: String| Err(OracleError::BadPlan(m));
        if self.nodes < 4 || self.nodes % 2 != 0 {
            return bad(format!("node count {} must be even and at least 4", self.nodes));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return bad(format!("radius {} must be positive", self.radius));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("eps must be a non-empty list of positive widths".into());
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps must be strictly decreasing".into());
        }
        if self.mollifier == Mollifier::FlatTop {
            let support = 2.0 / self.eps[self.eps.len() - 1];
            if support > self.radius * (1.0 + 1e-12) {
                return bad(format!(
                    "window support {support:.3} exceeds radius {}",
                    self.radius
                ));
            }
        }
        if self.resolution() < NODES_PER_WAVELENGTH {
            return bad(format!(
                "{:.2} nodes per wavelength, need {NODES_PER_WAVELENGTH}",
                self.resolution()
            ));
        }
        Ok(())
    }
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Serialize, Serializer};

    pub fn one<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn many<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
    }
}

/// Oracle output with its convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleValue {
    #[serde(serialize_with = "complex_pairs::one")]
    pub value: Complex64,
    /// Raw mollified values, one per `ε`.
    #[serde(serialize_with = "complex_pairs::many")]
    pub per_eps: Vec<Complex64>,
    pub spread: f64,
    pub converged: bool,
}

/// A real factor of the integrand evaluated with some variables tied to `s`
/// and `t` by fixed offsets.
struct Probe {
    f: CompiledExpr,
    base: Point,
    s_vars: Vec<(Var, f64)>,
    t_vars: Vec<(Var, f64)>,
    /// Contributes `e^{i f}` instead of `f`.
    phase: bool,
}

impl Probe {
    fn uses_s(&self) -> bool {
        self.s_vars.iter().any(|(v, _)| self.f.depends_on(*v))
    }

    fn uses_t(&self) -> bool {
        self.t_vars.iter().any(|(v, _)| self.f.depends_on(*v))
    }

    fn eval(&self, s: f64, t: f64, buf: &mut Vec<f64>) -> Result<Complex64, OracleError> {
        let mut p = self.base;
        for &(v, o) in &self.s_vars {
            p.set(v, o + s);
        }
        for &(v, o) in &self.t_vars {
            p.set(v, o + t);
        }
        let r = self.f.eval_slots(p.slots(), buf);
        if !r.is_finite() {
            return Err(OracleError::NonFinite { s, t });
        }
        Ok(if self.phase {
            Complex64::cis(r)
        } else {
            Complex64::new(r, 0.0)
        })
    }
}

struct Integrand {
    sigma: f64,
    probes: Vec<Probe>,
}

impl Integrand {
    fn factor(&mut self, f: &Expr, base: Point, s: &[(Var, f64)], t: &[(Var, f64)], phase: bool) {
        self.probes.push(Probe {
            f: f.compile(),
            base,
            s_vars: s.to_vec(),
            t_vars: t.to_vec(),
            phase,
        });
    }

    /// Mollified integrals, one per `ε` of the plan.
    fn integrate(&self, plan: &QuadPlan) -> Result<Vec<Complex64>, OracleError> {
        plan.validate()?;
        let h = plan.step();
        let reach = plan.reach();
        let grid: Vec<f64> = (0..plan.nodes)
            .map(|j| -plan.radius + j as f64 * h)
            .filter(|s| s.abs() < reach || plan.mollifier == Mollifier::Gaussian)
            .collect();
        let win: Vec<Vec<f64>> = plan
            .eps
            .iter()
            .map(|e| grid.iter().map(|s| plan.mollifier.window(e * s)).collect())
            .collect();
        let (mut rows, mut cols, mut mixed) = (Vec::new(), Vec::new(), Vec::new());
        for p in &self.probes {
            match (p.uses_s(), p.uses_t()) {
                (_, false) => rows.push(p),
                (false, true) => cols.push(p),
                (true, true) => mixed.push(p),
            }
        }
        let along = |probes: &[&Probe], is_s: bool| -> Result<Vec<Complex64>, OracleError> {
            let mut buf = Vec::new();
            grid.iter()
                .map(|&u| {
                    let (s, t) = if is_s { (u, 0.0) } else { (0.0, u) };
                    probes
                        .iter()
                        .try_fold(Complex64::new(1.0, 0.0), |acc, p| Ok(acc * p.eval(s, t, &mut buf)?))
                })
                .collect()
        };
        let row = along(&rows, true)?;
        let col = along(&cols, false)?;
        let k_eps = plan.eps.len();
        // Column values with each window folded in.
        let colw: Vec<Vec<Complex64>> = win.iter().map(|w| col.iter().zip(w).map(|(c, w)| c * w).collect()).collect();

        let row_sums = (0..grid.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, j| -> Result<Vec<Complex64>, OracleError> {
                let s = grid[j];
                let mut acc = vec![Complex64::new(0.0, 0.0); k_eps];
                if row[j] == Complex64::new(0.0, 0.0) || win.iter().all(|w| w[j] == 0.0) {
                    return Ok(acc);
                }
                let step = Complex64::cis(self.sigma * s * h);
                let mut kern = Complex64::new(1.0, 0.0);
                for (k, &t) in grid.iter().enumerate() {
                    if k % 32 == 0 {
                        kern = Complex64::cis(self.sigma * s * t);
                    }
                    let mut m = kern;
                    for p in &mixed {
                        m *= p.eval(s, t, buf)?;
                    }
                    for (a, cw) in acc.iter_mut().zip(&colw) {
                        *a += cw[k] * m;
                    }
                    kern *= step;
                }
                for (e, a) in acc.iter_mut().enumerate() {
                    *a *= row[j] * win[e][j];
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let scale = h * h / (2.0 * PI);
        Ok((0..k_eps)
            .map(|e| row_sums.iter().map(|r| r[e]).sum::<Complex64>() * scale)
            .collect())
    }

    fn evaluate(&self, plan: &QuadPlan) -> Result<OracleValue, OracleError> {
        let per_eps = self.integrate(plan)?;
        let (value, spread) = match plan.mollifier {
            Mollifier::FlatTop => {
                let v = per_eps[per_eps.len() - 1];
                let prev = per_eps.get(per_eps.len().wrapping_sub(2)).copied().unwrap_or(v);
                (v, (v - prev).norm() / v.norm().max(1.0))
            }
            Mollifier::Gaussian => {
                let h2: Vec<f64> = plan.eps.iter().map(|e| e * e).collect();
                let v = richardson(&h2, &per_eps);
                let n = per_eps.len();
                let prev = if n > 1 { richardson(&h2[..n - 1], &per_eps[..n - 1]) } else { v };
                (v, (v - prev).norm() / v.norm().max(1.0))
            }
        };
        Ok(OracleValue {
            value,
            per_eps,
            spread,
            converged: spread <= plan.tol,
        })
    }
}

/// Neville extrapolation of `v(h)` to `h = 0`.
pub fn richardson(h: &[f64], v: &[Complex64]) -> Complex64 {
    let mut p = v.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i + 1] * h[i] - p[i] * h[i + m]) / (h[i] - h[i + m]);
        }
    }
    p[0]
}

fn one_dim(dims: &[usize]) -> Result<(), OracleError> {
    match dims.iter().find(|&&d| d != 1) {
        Some(&d) => Err(OracleError::Dimension(d)),
        None => Ok(()),
    }
}

fn eval_at(e: &Expr, p: Point) -> f64 {
    e.compile().eval(&p)
}

/// `c(x,z,ξ) = ∫∫ e^{i(y−z)(η−ξ)} a(x,y,ξ) p(y,η) dy đη`.
pub fn eval_c_tp(
    a: &AmplitudeSpec,
    p: &SymbolSpec,
    x: f64,
    z: f64,
    xi: f64,
    plan: &QuadPlan,
) -> Result<OracleValue, OracleError> {
    one_dim(&[a.dim, p.dim])?;
    let mut ig = Integrand { sigma: 1.0, probes: Vec::new() };
    let base = Point::new().with(Var::x(0), x).with(Var::xi(0), xi);
    ig.factor(&a.expr, base, &[(Var::y(0), z)], &[], false);
    ig.factor(&p.expr, Point::new(), &[(Var::x(0), z)], &[(Var::xi(0), xi)], false);
    ig.evaluate(plan)
}

/// `c(x,z,ξ) = ∫∫ e^{i(φ(y,ξ)−φ(x,ξ)+(x−y)η)} a(y,z,ξ) p(x,η) dy đη`.
pub fn eval_c_pt(
    a: &AmplitudeSpec,
    p: &SymbolSpec,
    phi: &PhaseSpec,
    x: f64,
    z: f64,
    xi: f64,
    plan: &QuadPlan,
) -> Result<OracleValue, OracleError> {
    one_dim(&[a.dim, p.dim, phi.dim])?;
    let at = Point::new().with(Var::x(0), x).with(Var::xi(0), xi);
    let eta0 = eval_at(&diff(&phi.expr, Var::x(0), 1), at);
    let phi_x = eval_at(&phi.expr, at);
    // With y = x + s and η = η0 + t the phase is α(s) − st.
    let alpha = phi
        .expr
        .sub(&Expr::constant(phi_x))
        .sub(&Expr::var(Var::x(0)).sub(&Expr::constant(x)).mul(&Expr::constant(eta0)));
    let mut ig = Integrand { sigma: -1.0, probes: Vec::new() };
    ig.factor(&alpha, at, &[(Var::x(0), x)], &[], true);
    let a_base = Point::new().with(Var::y(0), z).with(Var::xi(0), xi);
    ig.factor(&a.expr, a_base, &[(Var::x(0), x)], &[], false);
    ig.factor(&p.expr, Point::new().with(Var::x(0), x), &[], &[(Var::xi(0), eta0)], false);
    ig.evaluate(plan)
}

/// `Tu(x) = ∫∫ e^{i(φ(x,ξ)−yξ)} a(x,y,ξ) u(y) dy đξ` for `u` given as an
/// expression in `y1`. The `y` window is centred at `∂_ξφ(x,0)`.
pub fn eval_t(
    a: &AmplitudeSpec,
    phi: &PhaseSpec,
    u: &Expr,
    x: f64,
    plan: &QuadPlan,
) -> Result<OracleValue, OracleError> {
    one_dim(&[a.dim, phi.dim])?;
    let at = Point::new().with(Var::x(0), x).with(Var::xi(0), 0.0);
    let y0 = eval_at(&diff(&phi.expr, Var::xi(0), 1), at);
    // With y = y0 + s the phase is β(ξ) − sξ.
    let beta = phi.expr.sub(&Expr::constant(y0).mul(&Expr::var(Var::xi(0))));
    let mut ig = Integrand { sigma: -1.0, probes: Vec::new() };
    let xb = Point::new().with(Var::x(0), x);
    ig.factor(&beta, xb, &[], &[(Var::xi(0), 0.0)], true);
    ig.factor(&a.expr, xb, &[(Var::y(0), y0)], &[(Var::xi(0), 0.0)], false);
    ig.factor(u, Point::new(), &[(Var::y(0), y0)], &[], false);
    ig.evaluate(plan)
}

/// Two-variable amplitude of `T∘p(x,D)`:
/// `c(x,ξ) = ∫∫ e^{i(φ(x,η)−φ(x,ξ)+y(ξ−η))} a(x,y,η) p(y,ξ) dy đη`,
/// so that `T p(x,D) u(x) = ∫ e^{iφ(x,ξ)} c(x,ξ) û(ξ) đξ`.
pub fn eval_c_tp_reduce(
    a: &AmplitudeSpec,
    p: Option<&SymbolSpec>,
    phi: &PhaseSpec,
    x: f64,
    xi: f64,
    plan: &QuadPlan,
) -> Result<OracleValue, OracleError> {
    one_dim(&[a.dim, phi.dim])?;
    if let Some(p) = p {
        one_dim(&[p.dim])?;
    }
    let at = Point::new().with(Var::x(0), x).with(Var::xi(0), xi);
    let y0 = eval_at(&diff(&phi.expr, Var::xi(0), 1), at);
    let phi_x = eval_at(&phi.expr, at);
    // With y = y0 + s and η = ξ + t the phase is β(t) − st.
    let beta = phi
        .expr
        .sub(&Expr::constant(phi_x))
        .sub(&Expr::var(Var::xi(0)).sub(&Expr::constant(xi)).mul(&Expr::constant(y0)));
    let mut ig = Integrand { sigma: -1.0, probes: Vec::new() };
    ig.factor(&beta, at, &[], &[(Var::xi(0), xi)], true);
    let xb = Point::new().with(Var::x(0), x);
    ig.factor(&a.expr, xb, &[(Var::y(0), y0)], &[(Var::xi(0), xi)], false);
    if let Some(p) = p {
        ig.factor(&p.expr, Point::new().with(Var::xi(0), xi), &[(Var::x(0), y0)], &[], false);
    }
    ig.evaluate(plan)
}

/// Symbol of the amplitude operator with phase `x·ξ`:
/// `c(x,ξ) = ∫∫ e^{i(x−y)(η−ξ)} a(x,y,η) dy đη`.
pub fn eval_c_psido(
    a: &AmplitudeSpec,
    x: f64,
    xi: f64,
    plan: &QuadPlan,
) -> Result<OracleValue, OracleError> {
    let phi = PhaseSpec::new(
        Expr::var(Var::x(0)).mul(&Expr::var(Var::xi(0))),
        1,
        crate::classes::PhaseProfile::L2,
    )
    .expect("linear phase is valid");
    eval_c_tp_reduce(a, None, &phi, x, xi, plan)
}
