//! Spectral laboratory for `i∂_t u + a(D)u = 0`-type evolutions: the
//! propagator `e^{ita(D)}`, weighted space-time norms with saturation
//! curves, smoothing ratios over seeded data families and the σ/τ
//! commutation identity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classes::{block_bracket, ClassError, DerivativeTable, SamplePlan};
use crate::expr::{diff, parse, Block, CompiledExpr, DiffError, Expr, Point, Var};
use crate::gridquant::{Grid, GridError, GridField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("symbol has dimension {symbol}, grid has {grid}")]
    Dimension { symbol: usize, grid: usize },
    #[error("symbol may only depend on xi, found {0}")]
    StrayVariable(Var),
    #[error("solution reaches the boundary cell at t = {t}")]
    Boundary { t: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown dispersion fixture {0:?}")]
    UnknownFixture(String),
}

/// A real symbol `a(ξ)` with its gradient and a witnessed splitting
/// `a = a₁ + a₀` for `|ξ| ≥ ρ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSpec {
    pub name: String,
    pub dim: usize,
    pub a: Expr,
    pub grad: Vec<Expr>,
    /// Positively homogeneous of order 1.
    pub a1: Expr,
    /// Order-0 symbol.
    pub a0: Expr,
    pub rho0: f64,
}

impl DispersionSpec {
    pub fn new(name: &str, dim: usize, a: Expr, a1: Expr, a0: Expr, rho0: f64) -> Result<Self, SmoothError> {
        for e in [&a, &a1, &a0] {
            if let Some(v) = e.free_vars().into_iter().find(|v| v.block() != Some(Block::Xi)) {
                return Err(SmoothError::StrayVariable(v));
            }
        }
        let grad = (0..dim).map(|i| diff(&a, Var::xi(i), 1)).collect();
        Ok(DispersionSpec { name: name.to_string(), dim, a, grad, a1, a0, rho0 })
    }

    /// Shipped symbols: `linear` (`ξ`), `arctan` (`ξ + arctan ξ`) and
    /// `bracket-2d` (`2ξ₁ + ⟨ξ⟩`).
    pub fn fixture(name: &str) -> Result<Self, SmoothError> {
        let p1 = |s: &str| parse(s, 1).expect("fixture parses");
        let p2 = |s: &str| parse(s, 2).expect("fixture parses");
        match name {
            "linear" => Self::new(name, 1, p1("xi1"), p1("xi1"), p1("0"), 1.0),
            "arctan" => Self::new(name, 1, p1("xi1 + atan(xi1)"), p1("xi1"), p1("atan(xi1)"), 1.0),
            "bracket-2d" => Self::new(
                name,
                2,
                p2("2*xi1 + jbr(xi1, xi2)"),
                p2("2*xi1 + sqrt(xi1^2 + xi2^2)"),
                p2("jbr(xi1, xi2) - sqrt(xi1^2 + xi2^2)"),
                1.0,
            ),
            other => Err(SmoothError::UnknownFixture(other.to_string())),
        }
    }

    fn check_grid(&self, g: &Grid) -> Result<(), SmoothError> {
        if g.dim != self.dim {
            return Err(SmoothError::Dimension { symbol: self.dim, grid: g.dim });
        }
        Ok(())
    }

    fn on_dual(&self, e: &Expr, g: &Grid) -> Vec<f64> {
        let c = e.compile();
        let mut buf = Vec::new();
        (0..g.len())
            .map(|k| {
                let p = Point::new().with_block(Block::Xi, &g.dual(k)[..g.dim]);
                c.eval_slots(p.slots(), &mut buf)
            })
            .collect()
    }

    /// `|∇a(ξ_k)|` at every dual node.
    pub fn grad_norms(&self, g: &Grid) -> Vec<f64> {
        let parts: Vec<Vec<f64>> = self.grad.iter().map(|e| self.on_dual(e, g)).collect();
        (0..g.len())
            .map(|k| parts.iter().map(|p| p[k] * p[k]).sum::<f64>().sqrt())
            .collect()
    }

    /// Checks the standing hypotheses on a grid: dispersiveness at every
    /// dual node, homogeneity of `a₁`, the splitting and the symbol bounds
    /// of `a₀` on `|ξ| ≥ ρ₀`.
    pub fn validate(&self, g: &Grid, max_order: usize, cap: f64, plan: &SamplePlan) -> Result<DispersionReport, SmoothError> {
        self.check_grid(g)?;
        let norms = self.grad_norms(g);
        let min_grad = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let max_grad = norms.iter().copied().fold(0.0, f64::max);
        let mut failures = Vec::new();
        if !(min_grad > 0.0 && max_grad.is_finite()) {
            failures.push(format!("grad a vanishes or is not finite on the dual grid (min {min_grad:e})"));
        }
        let samples: Vec<Point> = plan
            .points(&[Block::Xi], self.dim)
            .into_iter()
            .map(|s| s.point)
            .filter(|p| block_bracket(p, Block::Xi, self.dim) >= (1.0 + self.rho0 * self.rho0).sqrt())
            .collect();
        let (a, a1, a0) = (self.a.compile(), self.a1.compile(), self.a0.compile());
        let mut split_err: f64 = 0.0;
        let mut homog_err: f64 = 0.0;
        for p in &samples {
            let v = a.eval(p);
            split_err = split_err.max((v - a1.eval(p) - a0.eval(p)).abs() / v.abs().max(1.0));
            for lam in [2.0, 10.0] {
                let mut q = *p;
                for i in 0..self.dim {
                    q.set(Var::xi(i), lam * p.get(Var::xi(i)).unwrap_or(0.0));
                }
                let (u, w) = (a1.eval(&q), lam * a1.eval(p));
                homog_err = homog_err.max((u - w).abs() / w.abs().max(1.0));
            }
        }
        if split_err > 1e-9 {
            failures.push(format!("a differs from a1 + a0 by {split_err:e}"));
        }
        if homog_err > 1e-9 {
            failures.push(format!("a1 is not homogeneous of order 1 (defect {homog_err:e})"));
        }
        let table = DerivativeTable::total_order(&self.a0, &[Block::Xi], self.dim, max_order)?;
        let mut a0_sup: f64 = 0.0;
        let mut buf = Vec::new();
        for (idx, f) in table.entries() {
            for p in &samples {
                let w = block_bracket(p, Block::Xi, self.dim).powi(idx[0].order() as i32);
                let q = f.eval_slots(p.slots(), &mut buf).abs() * w;
                a0_sup = a0_sup.max(if q.is_nan() { f64::INFINITY } else { q });
            }
        }
        if !(a0_sup <= cap) {
            failures.push(format!("a0 is not an order-0 symbol on |xi| >= rho0 (sup {a0_sup:e})"));
        }
        Ok(DispersionReport {
            symbol: self.name.clone(),
            min_grad_norm: min_grad,
            max_grad_norm: max_grad,
            splitting_defect: split_err,
            homogeneity_defect: homog_err,
            a0_sup,
            passed: failures.is_empty(),
            failures,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub symbol: String,
    pub min_grad_norm: f64,
    pub max_grad_norm: f64,
    pub splitting_defect: f64,
    pub homogeneity_defect: f64,
    pub a0_sup: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Diagonal propagator `e^{ita(ξ_k)}` on a fixed grid.
struct Propagator {
    grid: Grid,
    a: Vec<f64>,
}

impl Propagator {
    fn new(spec: &DispersionSpec, g: &Grid) -> Result<Self, SmoothError> {
        spec.check_grid(g)?;
        let a = spec.on_dual(&spec.a, g);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(format!("symbol {}", spec.name)).into());
        }
        Ok(Propagator { grid: *g, a })
    }

    fn at(&self, uh: &[Complex64], t: f64) -> Vec<Complex64> {
        let w: Vec<Complex64> = uh.iter().zip(&self.a).map(|(u, a)| u * Complex64::cis(t * a)).collect();
        self.grid.inverse(&w)
    }
}

/// `u(t) = e^{ita(D)} u₀`.
pub fn evolve(spec: &DispersionSpec, u0: &GridField, t: f64) -> Result<GridField, SmoothError> {
    let g = *u0.grid();
    let p = Propagator::new(spec, &g)?;
    Ok(GridField::new(g, p.at(&g.forward(u0.values()), t))?)
}

/// Relative mass of `u` outside `[−L/4, L/4]^n`.
fn outside_quarter(u: &GridField) -> f64 {
    let g = u.grid();
    let q = g.half_width / 4.0;
    let (mut out, mut all) = (0.0, 0.0);
    for (i, v) in u.values().iter().enumerate() {
        let x = g.coords(i);
        let m = v.norm_sqr();
        all += m;
        if x[..g.dim].iter().any(|c| c.abs() > q) {
            out += m;
        }
    }
    if all == 0.0 {
        0.0
    } else {
        (out / all).sqrt()
    }
}

/// Largest `|u|` on the outermost cells relative to `max |u|`.
fn boundary_level(v: &[Complex64], g: &Grid) -> f64 {
    let n = g.points;
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let edge = |i: usize| {
        let [a, b] = g.split(i);
        a == 0 || a == n - 1 || (g.dim == 2 && (b == 0 || b == n - 1))
    };
    let b = (0..v.len()).filter(|&i| edge(i)).map(|i| v[i].norm()).fold(0.0, f64::max);
    b / max
}

/// Boundary level above which the periodic wrap is considered to pollute
/// the solution.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacetimeNorm {
    /// `‖t^k ⟨x⟩^{−k−s} u‖_{L²([−T,T]×ℝⁿ)}`.
    pub value: f64,
    /// Half-widths `τ_i = iΔt` of the symmetric windows `[−τ_i, τ_i]`.
    pub taus: Vec<f64>,
    /// Time-truncated norms over `[−τ_i, τ_i]`; non-decreasing.
    pub curve: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SpacetimeNorm {
    /// `(S(T) − S(T/10)) / S(T)` on the saturation curve.
    pub fn final_decade_increase(&self) -> f64 {
        let last = *self.curve.last().unwrap_or(&0.0);
        if last == 0.0 {
            return 0.0;
        }
        let t_end = *self.taus.last().unwrap_or(&0.0);
        let i = self.taus.iter().position(|&t| t >= t_end / 10.0 - 1e-12).unwrap_or(0);
        (last - self.curve[i]) / last
    }
}

/// Trapezoid in `t` over `[−T, T]` with `Nt + 1` nodes (`Nt` even) of
/// `‖t^k ⟨x⟩^{−k−s} u(t)‖²`, square-rooted.
pub fn spacetime_norm(
    spec: &DispersionSpec,
    u0: &GridField,
    k: u32,
    s: f64,
    t_max: f64,
    nt: usize,
) -> Result<SpacetimeNorm, SmoothError> {
    let mut v = spacetime_norms(spec, std::slice::from_ref(u0), k, s, t_max, nt)?;
    Ok(v.pop().expect("one datum in, one norm out"))
}

/// [`spacetime_norm`] for several data on one grid. The propagator phases
/// are computed once per time node and shared.
pub fn spacetime_norms(
    spec: &DispersionSpec,
    data: &[GridField],
    k: u32,
    s: f64,
    t_max: f64,
    nt: usize,
) -> Result<Vec<SpacetimeNorm>, SmoothError> {
    if nt < 2 || nt % 2 != 0 {
        return Err(SmoothError::Precondition(format!("Nt = {nt} must be even and positive")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(SmoothError::Precondition(format!("T = {t_max} must be positive")));
    }
    let Some(first) = data.first() else {
        return Ok(Vec::new());
    };
    let g = *first.grid();
    if data.iter().any(|u| *u.grid() != g) {
        return Err(GridError::GridMismatch.into());
    }
    let prop = Propagator::new(spec, &g)?;
    let vmax = spec.grad_norms(&g).into_iter().fold(0.0, f64::max);
    let mut common = Vec::new();
    if t_max > g.half_width / (2.0 * vmax) {
        common.push(format!(
            "T = {t_max} exceeds L/(2 max|grad a|) = {:.3}",
            g.half_width / (2.0 * vmax)
        ));
    }
    let weight: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.coords(i);
            (1.0 + x[0] * x[0] + x[1] * x[1]).powf(-(k as f64 + s))
        })
        .collect();
    let spectra: Vec<Vec<Complex64>> = data.iter().map(|u| g.forward(u.values())).collect();
    let dt = 2.0 * t_max / nt as f64;
    let cell = g.cell_volume();
    // f[m][d] = ‖t^k⟨x⟩^{−k−s}u_d(t_m)‖².
    let f = (0..=nt)
        .into_par_iter()
        .map(|m| -> Result<Vec<f64>, SmoothError> {
            let t = -t_max + m as f64 * dt;
            let phase: Vec<Complex64> = prop.a.iter().map(|a| Complex64::cis(t * a)).collect();
            let tk = t.abs().powi(k as i32);
            let mut w = vec![Complex64::new(0.0, 0.0); g.len()];
            spectra
                .iter()
                .map(|uh| {
                    for ((o, u), p) in w.iter_mut().zip(uh).zip(&phase) {
                        *o = u * p;
                    }
                    let u = g.inverse(&w);
                    if boundary_level(&u, &g) > BOUNDARY_TOL {
                        return Err(SmoothError::Boundary { t });
                    }
                    let sum: f64 = u.iter().zip(&weight).map(|(v, w)| v.norm_sqr() * w).sum();
                    Ok(tk * tk * sum * cell)
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    let mid = nt / 2;
    let taus: Vec<f64> = (0..=mid).map(|i| i as f64 * dt).collect();
    Ok(data
        .iter()
        .enumerate()
        .map(|(d, u0)| {
            let mut warnings = common.clone();
            let spill = outside_quarter(u0);
            if spill > 1e-10 {
                warnings.push(format!("u0 has relative mass {spill:.2e} outside [-L/4, L/4]^n"));
            }
            let mut curve = vec![0.0];
            let mut acc = 0.0;
            for i in 1..=mid {
                let (r0, r1, l0, l1) = (f[mid + i - 1][d], f[mid + i][d], f[mid - i + 1][d], f[mid - i][d]);
                acc += 0.5 * dt * (r0 + r1 + l0 + l1);
                curve.push(acc.sqrt());
            }
            SpacetimeNorm { value: acc.sqrt(), taus: taus.clone(), curve, warnings }
        })
        .collect())
}

/// Seeded Gaussian family: 5 widths × 5 centres × 3 modulations, each
/// with a random phase and small seeded jitter.
pub fn gaussian_family(g: &Grid, seed: u64) -> Vec<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [0.6, 1.0, 1.5, 2.2, 3.0];
    let centres = [-4.0, -2.0, 0.0, 2.0, 4.0];
    let mods = [0.0, 1.0, -2.0];
    let mut out = Vec::with_capacity(75);
    for &w in &widths {
        for &c in &centres {
            for &kappa in &mods {
                let w = w * (1.0 + 0.1 * rng.gen_range(-1.0..1.0));
                let c = c + 0.25 * rng.gen_range(-1.0..1.0);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let centre = [c, -0.5 * c];
                let wave = [kappa, 0.5 * kappa];
                let f = GridField::from_fn(*g, |x| {
                    let (mut r2, mut th) = (0.0, phase);
                    for i in 0..x.len() {
                        r2 += (x[i] - centre[i]).powi(2);
                        th += wave[i] * x[i];
                    }
                    Complex64::from_polar((-r2 / (2.0 * w * w)).exp(), th)
                })
                .expect("gaussian data are finite");
                out.push(f);
            }
        }
    }
    out
}

/// `count` seeded Gaussians with widths in `[0.5, 1.5]`, centres and
/// modulations in `[−2, 2]ⁿ` and a random phase.
pub fn seeded_gaussians(g: &Grid, count: usize, seed: u64) -> Vec<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w: f64 = rng.gen_range(0.5..1.5);
            let c: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let kappa: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            GridField::from_fn(*g, |x| {
                let (mut r2, mut th) = (0.0, phase);
                for i in 0..x.len() {
                    r2 += (x[i] - c[i]).powi(2);
                    th += kappa[i] * x[i];
                }
                Complex64::from_polar((-r2 / (2.0 * w * w)).exp(), th)
            })
            .expect("gaussian data are finite")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub symbol: String,
    pub k: u32,
    pub s: f64,
    pub t_max: f64,
    pub nt: usize,
    pub grid: Grid,
    /// `‖t^k⟨x⟩^{−k−s}u‖ / ‖⟨x⟩^k u₀‖` per datum.
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    pub min_ratio: f64,
    /// Final-decade relative increase of each ratio's saturation curve.
    pub final_decade_increase: Vec<f64>,
    pub max_final_decade_increase: f64,
    pub taus: Vec<f64>,
    /// Saturation curves divided by `‖⟨x⟩^k u₀‖`.
    pub curves: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

pub fn smoothing_ratio(
    spec: &DispersionSpec,
    family: &[GridField],
    k: u32,
    s: f64,
    t_max: f64,
    nt: usize,
) -> Result<SmoothingReport, SmoothError> {
    if k >= 1 && s <= k as f64 + 0.5 {
        return Err(SmoothError::Precondition(format!("s = {s} must exceed k + 1/2 = {}", k as f64 + 0.5)));
    }
    let Some(first) = family.first() else {
        return Err(SmoothError::Precondition("empty data family".into()));
    };
    let g = *first.grid();
    let mut ratios = Vec::new();
    let mut incs = Vec::new();
    let mut curves = Vec::new();
    let mut taus = Vec::new();
    let mut warnings = Vec::new();
    let norms = spacetime_norms(spec, family, k, s, t_max, nt)?;
    for (i, (u0, st)) in family.iter().zip(norms).enumerate() {
        let base = crate::gridquant::sobolev_norm(u0, k as f64, 0.0);
        ratios.push(st.value / base);
        incs.push(st.final_decade_increase());
        curves.push(st.curve.iter().map(|c| c / base).collect());
        warnings.extend(st.warnings.iter().map(|w| format!("datum {i}: {w}")));
        taus = st.taus;
    }
    Ok(SmoothingReport {
        symbol: spec.name.clone(),
        k,
        s,
        t_max,
        nt,
        grid: g,
        sup_ratio: ratios.iter().copied().fold(0.0, f64::max),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_final_decade_increase: incs.iter().copied().fold(0.0, f64::max),
        ratios,
        final_decade_increase: incs,
        taus,
        curves,
        warnings,
    })
}

/// Least-squares slope of `curve²` against `log τ` over the final decade.
pub fn log_slope_of_square(taus: &[f64], curve: &[f64]) -> f64 {
    let t_end = *taus.last().unwrap_or(&1.0);
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(curve)
        .filter(|(t, _)| **t >= t_end / 10.0 - 1e-12 && **t > 0.0)
        .map(|(t, c)| (t.ln(), c * c))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖τ(t,X,D)T_t u₀ − T_t σ(X,D)u₀‖ / (‖u₀‖ + ‖x u₀‖)` with
/// `σ(X,D) = x·∇a(D)` and `τ(t,X,D) = x·∇a(D) + t|∇a|²(D)`.
pub fn commutator_residual(spec: &DispersionSpec, u0: &GridField, t: f64) -> Result<f64, SmoothError> {
    let g = *u0.grid();
    let prop = Propagator::new(spec, &g)?;
    let grads: Vec<Vec<f64>> = spec.grad.iter().map(|e| spec.on_dual(e, &g)).collect();
    let grad_sq: Vec<f64> = (0..g.len()).map(|k| grads.iter().map(|d| d[k] * d[k]).sum()).collect();
    let multiplier = |v: &[Complex64], m: &[f64]| -> Vec<Complex64> {
        let vh: Vec<Complex64> = g.forward(v).iter().zip(m).map(|(a, b)| a * b).collect();
        g.inverse(&vh)
    };
    let sigma = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (i, d) in grads.iter().enumerate() {
            let w = multiplier(v, d);
            for (j, o) in out.iter_mut().enumerate() {
                *o += g.coords(j)[i] * w[j];
            }
        }
        out
    };
    let evolve = |v: &[Complex64]| prop.at(&g.forward(v), t);
    let tu = evolve(u0.values());
    let mut lhs = sigma(&tu);
    for (l, r) in lhs.iter_mut().zip(multiplier(&tu, &grad_sq)) {
        *l += t * r;
    }
    let rhs = evolve(&sigma(u0.values()));
    let cell = g.cell_volume();
    let l2 = |v: &mut dyn Iterator<Item = f64>| (v.sum::<f64>() * cell).sqrt();
    let res = l2(&mut lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()));
    let base = u0.norm_l2()
        + l2(&mut u0.values().iter().enumerate().map(|(j, v)| {
            let x = g.coords(j);
            (x[0] * x[0] + x[1] * x[1]) * v.norm_sqr()
        }));
    Ok(res / base)
}

/// Compiled `a` for callers that sample the symbol directly.
pub fn compiled_symbol(spec: &DispersionSpec) -> CompiledExpr {
    spec.a.compile()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bump(g: Grid, c: f64) -> GridField {
        GridField::from_fn(g, |x| Complex64::new((-(x[0] - c).powi(2)).exp(), 0.0)).unwrap()
    }

    #[test]
    fn fixtures_validate() {
        let g1 = Grid::new(1, 256, 32.0).unwrap();
        let g2 = Grid::new(2, 32, 16.0).unwrap();
        let plan = SamplePlan::default();
        for (name, g) in [("linear", g1), ("arctan", g1), ("bracket-2d", g2)] {
            let spec = DispersionSpec::fixture(name).unwrap();
            let r = spec.validate(&g, 4, 1e6, &plan).unwrap();
            assert!(r.passed, "{name}: {:?}", r.failures);
        }
        let r = DispersionSpec::fixture("arctan").unwrap().validate(&g1, 4, 1e6, &plan).unwrap();
        assert!(r.min_grad_norm >= 1.0 && r.max_grad_norm <= 2.0);
        // A symbol with a critical point is not dispersive.
        let bad = DispersionSpec::new("sq", 1, parse("xi1^2", 1).unwrap(), parse("0", 1).unwrap(), parse("xi1^2", 1).unwrap(), 1.0).unwrap();
        assert!(!bad.validate(&g1, 2, 1e6, &plan).unwrap().passed);
        assert!(DispersionSpec::fixture("nope").is_err());
    }

    #[test]
    fn evolution_examples() {
        let g = Grid::new(1, 256, 32.0).unwrap();
        let spec = DispersionSpec::fixture("linear").unwrap();
        let u = bump(g, 1.0);
        assert!(evolve(&spec, &u, 0.0).unwrap().max_abs_diff(&u).unwrap() < 1e-14);
        let t = 8.0 * g.dx();
        let v = evolve(&spec, &u, t).unwrap();
        for j in 0..248 {
            assert!((v.values()[j] - u.values()[j + 8]).norm() < 1e-12);
        }
        let spec = DispersionSpec::fixture("arctan").unwrap();
        let w = evolve(&spec, &u, 3.7).unwrap();
        assert!((w.norm_l2() - u.norm_l2()).abs() < 1e-12);
        let two = evolve(&spec, &evolve(&spec, &u, 1.2).unwrap(), 2.5).unwrap();
        assert!(two.max_abs_diff(&evolve(&spec, &u, 3.7).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn fubini_constant_for_translation() {
        let g = Grid::new(1, 1024, 128.0).unwrap();
        let spec = DispersionSpec::fixture("linear").unwrap();
        let u = bump(g, 0.5);
        let st = spacetime_norm(&spec, &u, 0, 1.0, 60.0, 8 * 60 * 4).unwrap();
        assert!(st.warnings.is_empty(), "{:?}", st.warnings);
        let ratio = st.value / u.norm_l2();
        assert!((ratio - PI.sqrt()).abs() < 0.02 * PI.sqrt(), "{ratio}");
        assert!(st.curve.windows(2).all(|w| w[1] >= w[0]));
        let z = spacetime_norm(&spec, &GridField::zeros(g), 0, 1.0, 10.0, 80).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn boundary_contact_is_an_error() {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let spec = DispersionSpec::fixture("linear").unwrap();
        let r = spacetime_norm(&spec, &bump(g, 0.0), 0, 1.0, 15.0, 120);
        assert!(matches!(r, Err(SmoothError::Boundary { .. })));
        assert!(smoothing_ratio(&spec, &[bump(g, 0.0)], 1, 1.5, 1.0, 8).is_err());
    }

    #[test]
    fn commutator_examples() {
        let g = Grid::new(1, 256, 32.0).unwrap();
        let u = bump(g, 0.3);
        let lin = DispersionSpec::fixture("linear").unwrap();
        assert!(commutator_residual(&lin, &u, 2.0).unwrap() < 1e-10);
        let at = DispersionSpec::fixture("arctan").unwrap();
        assert!(commutator_residual(&at, &u, 0.0).unwrap() < 1e-12);
        assert!(commutator_residual(&at, &u, 2.0).unwrap() < 1e-8);
    }

    #[test]
    fn family_shape() {
        let g = Grid::new(1, 1024, 128.0).unwrap();
        let f = gaussian_family(&g, 7);
        assert_eq!(f.len(), 75);
        assert_eq!(gaussian_family(&g, 7), f);
        assert!(f.iter().all(|u| outside_quarter(u) < 1e-10));
    }

    #[test]
    fn slope_of_log_fit() {
        let taus: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let curve: Vec<f64> = taus.iter().map(|t| (3.0 * t.ln() + 1.0).sqrt()).collect();
        assert!((log_slope_of_square(&taus, &curve) - 3.0).abs() < 1e-12);
    }
}
