use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Grid, GridError, GridField, LinearOp};
use crate::classes::{AmplitudeSpec, PhaseSpec};
use crate::expr::{Block, CExpr, CompiledCExpr, CompiledExpr, Point, Var, MAX_DIM};

/// Largest `N` for dense assembly (n = 1).
pub const DENSE_CAP: usize = 256;

const BLOCKS: [Block; 5] = [Block::X, Block::Y, Block::Z, Block::Xi, Block::Eta];

pub(crate) fn check_vars(c: &CompiledCExpr, dim: usize, allowed: &[Block]) -> Result<(), GridError> {
    if c.depends_on(Var::T) {
        return Err(GridError::Unbound(Var::T));
    }
    for b in BLOCKS {
        for i in 0..MAX_DIM {
            let v = b.var(i);
            if c.depends_on(v) && (i >= dim || !allowed.contains(&b)) {
                return Err(GridError::Unbound(v));
            }
        }
    }
    Ok(())
}

fn depends_on_block(c: &CompiledCExpr, b: Block, dim: usize) -> bool {
    (0..dim).any(|i| c.depends_on(b.var(i)))
}

fn finite(v: Vec<Complex64>, grid: Grid, what: &str) -> Result<GridField, GridError> {
    if v.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(GridError::NonFinite(what.to_string()));
    }
    Ok(GridField::from_raw(grid, v))
}

fn check_dim(grid: &Grid, dim: usize) -> Result<(), GridError> {
    if grid.dim == dim {
        Ok(())
    } else {
        Err(GridError::Dimension { grid: grid.dim, input: dim })
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn jbr_sq(v: [f64; 2]) -> f64 {
    1.0 + v[0] * v[0] + v[1] * v[1]
}

/// A symbol, optionally with a phase, sampled lazily on `(x_j, ξ_k)`.
struct Kernel {
    grid: Grid,
    symbol: CompiledCExpr,
    phase: Option<CompiledExpr>,
}

impl Kernel {
    fn new(grid: Grid, symbol: &CExpr, phase: Option<&PhaseSpec>) -> Result<Self, GridError> {
        let c = symbol.compile();
        check_vars(&c, grid.dim, &[Block::X, Block::Xi])?;
        if let Some(phi) = phase {
            check_dim(&grid, phi.dim)?;
        }
        Ok(Kernel { grid, symbol: c, phase: phase.map(|p| p.expr.compile()) })
    }

    /// `e^{iφ(x_j,ξ_k)} c(x_j,ξ_k)`, with `φ = x·ξ` when no phase is set.
    fn at(&self, j: usize, k: usize, buf: &mut Vec<f64>) -> Complex64 {
        let p: Point = self.grid.point(j, k);
        let theta = match &self.phase {
            Some(f) => f.eval_slots(p.slots(), buf),
            None => dot(self.grid.coords(j), self.grid.dual(k)),
        };
        Complex64::cis(theta) * self.symbol.eval_slots(p.slots(), buf)
    }

    fn dep_x(&self) -> bool {
        depends_on_block(&self.symbol, Block::X, self.grid.dim)
    }

    fn dep_xi(&self) -> bool {
        depends_on_block(&self.symbol, Block::Xi, self.grid.dim)
    }

    /// Values at `x_j` (or at `ξ_k` when `dual`), the other block unset.
    fn one_block(&self, dual: bool) -> Vec<Complex64> {
        let g = self.grid;
        let mut buf = Vec::new();
        (0..g.len())
            .map(|i| {
                let p = if dual {
                    Point::new().with_block(Block::Xi, &g.dual(i)[..g.dim])
                } else {
                    Point::new().with_block(Block::X, &g.coords(i)[..g.dim])
                };
                self.symbol.eval_slots(p.slots(), &mut buf)
            })
            .collect()
    }

    fn forward(&self, u: &GridField) -> Result<GridField, GridError> {
        let g = self.grid;
        if *u.grid() != g {
            return Err(GridError::GridMismatch);
        }
        if self.phase.is_none() {
            match (self.dep_x(), self.dep_xi()) {
                (false, true) => {
                    let m = self.one_block(true);
                    let uh: Vec<Complex64> =
                        g.forward(u.values()).iter().zip(&m).map(|(a, b)| a * b).collect();
                    return finite(g.inverse(&uh), g, "symbol application");
                }
                (_, false) => {
                    let m = self.one_block(false);
                    let v = u.values().iter().zip(&m).map(|(a, b)| a * b).collect();
                    return finite(v, g, "symbol application");
                }
                _ => {}
            }
        }
        let uh = g.forward(u.values());
        let scale = 1.0 / g.len() as f64;
        let v = (0..g.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, j| {
                (0..g.len()).map(|k| self.at(j, k, buf) * uh[k]).sum::<Complex64>() * scale
            })
            .collect();
        finite(v, g, "symbol application")
    }

    /// Conjugate transpose: `w_k = Σ_j conj(e^{iφ} c)(x_j,ξ_k) v_j`, then synthesis.
    fn adjoint(&self, v: &GridField) -> Result<GridField, GridError> {
        let g = self.grid;
        if *v.grid() != g {
            return Err(GridError::GridMismatch);
        }
        if self.phase.is_none() {
            match (self.dep_x(), self.dep_xi()) {
                (false, true) => {
                    let m = self.one_block(true);
                    let vh: Vec<Complex64> =
                        g.forward(v.values()).iter().zip(&m).map(|(a, b)| a * b.conj()).collect();
                    return finite(g.inverse(&vh), g, "adjoint application");
                }
                (_, false) => {
                    let m = self.one_block(false);
                    let w = v.values().iter().zip(&m).map(|(a, b)| a * b.conj()).collect();
                    return finite(w, g, "adjoint application");
                }
                _ => {}
            }
        }
        let vals = v.values();
        let w: Vec<Complex64> = (0..g.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, k| {
                (0..g.len()).map(|j| self.at(j, k, buf).conj() * vals[j]).sum::<Complex64>()
            })
            .collect();
        finite(g.inverse(&w), g, "adjoint application")
    }
}

/// `p(x,D)u(x_j) = N^{−n} Σ_k e^{i x_j·ξ_k} p(x_j,ξ_k) û_k`; symbols that
/// depend on one block only take the FFT or pointwise path.
pub fn apply_psido(p: &CExpr, u: &GridField) -> Result<GridField, GridError> {
    Kernel::new(*u.grid(), p, None)?.forward(u)
}

/// `Tu(x_j) = N^{−n} Σ_k e^{iφ(x_j,ξ_k)} c(x_j,ξ_k) û_k`.
pub fn apply_fio(c: &CExpr, phi: &PhaseSpec, u: &GridField) -> Result<GridField, GridError> {
    Kernel::new(*u.grid(), c, Some(phi))?.forward(u)
}

/// Adjoint of [`apply_fio`], or of [`apply_psido`] when `phi` is `None`.
pub fn adjoint_fio(c: &CExpr, phi: Option<&PhaseSpec>, v: &GridField) -> Result<GridField, GridError> {
    Kernel::new(*v.grid(), c, phi)?.adjoint(v)
}

fn kernel_op(label: String, k: Kernel) -> LinearOp {
    let k = Arc::new(k);
    let k2 = Arc::clone(&k);
    LinearOp::new(
        label,
        k.grid,
        move |u| k.forward(u),
        Some(Arc::new(move |v: &GridField| k2.adjoint(v)) as _),
    )
}

pub fn psido_op(p: &CExpr, grid: Grid) -> Result<LinearOp, GridError> {
    Ok(kernel_op(format!("op({p})"), Kernel::new(grid, p, None)?))
}

pub fn fio_op(c: &CExpr, phi: &PhaseSpec, grid: Grid) -> Result<LinearOp, GridError> {
    Ok(kernel_op(format!("fio({c}; {})", phi.expr), Kernel::new(grid, c, Some(phi))?))
}

fn multiply_x(u: &mut [Complex64], g: &Grid, s: f64) {
    if s != 0.0 {
        for (i, v) in u.iter_mut().enumerate() {
            *v *= jbr_sq(g.coords(i)).powf(s / 2.0);
        }
    }
}

fn multiply_xi(u: &[Complex64], g: &Grid, s: f64) -> Vec<Complex64> {
    if s == 0.0 {
        return u.to_vec();
    }
    let mut uh = g.forward(u);
    for (k, v) in uh.iter_mut().enumerate() {
        *v *= jbr_sq(g.dual(k)).powf(s / 2.0);
    }
    g.inverse(&uh)
}

/// `Π_{s1,s2} u = ⟨x⟩^{s1} ⟨D⟩^{s2} u`, the x-left quantization of `⟨x⟩^{s1}⟨ξ⟩^{s2}`.
pub fn apply_weight(s1: f64, s2: f64, u: &GridField) -> GridField {
    let g = *u.grid();
    let mut v = multiply_xi(u.values(), &g, s2);
    multiply_x(&mut v, &g, s1);
    GridField::from_raw(g, v)
}

/// `Π̃_{s1,s2} u = ⟨D⟩^{s2}(⟨x⟩^{s1} u)`, the y-left quantization; equal to
/// `Π_{−s1,−s2}⁻¹` and to `Π_{s1,s2}*`.
pub fn apply_weight_tilde(s1: f64, s2: f64, u: &GridField) -> GridField {
    let g = *u.grid();
    let mut v = u.values().to_vec();
    multiply_x(&mut v, &g, s1);
    GridField::from_raw(g, multiply_xi(&v, &g, s2))
}

pub fn weight_op(s1: f64, s2: f64, grid: Grid) -> LinearOp {
    LinearOp::new(
        format!("Pi[{s1},{s2}]"),
        grid,
        move |u| Ok(apply_weight(s1, s2, u)),
        Some(Arc::new(move |u: &GridField| Ok(apply_weight_tilde(s1, s2, u))) as _),
    )
}

pub fn weight_tilde_op(s1: f64, s2: f64, grid: Grid) -> LinearOp {
    LinearOp::new(
        format!("PiTilde[{s1},{s2}]"),
        grid,
        move |u| Ok(apply_weight_tilde(s1, s2, u)),
        Some(Arc::new(move |u: &GridField| Ok(apply_weight(s1, s2, u))) as _),
    )
}

/// `‖Π_{s1,s2} u‖_{L²}` on the grid.
pub fn sobolev_norm(u: &GridField, s1: f64, s2: f64) -> f64 {
    apply_weight(s1, s2, u).norm_l2()
}

fn dense_guard(a_dim: usize, phi: &PhaseSpec, grid: &Grid) -> Result<(), GridError> {
    if grid.dim != 1 || grid.points > DENSE_CAP {
        return Err(GridError::SizeCap { dim: grid.dim, points: grid.points, cap: DENSE_CAP });
    }
    check_dim(grid, a_dim)?;
    check_dim(grid, phi.dim)
}

/// Dense matrix of `Tu(x) = ∫∫ e^{i(φ(x,ξ)−y·ξ)} a(x,y,ξ) u(y) dy đξ`:
/// `M_jl = N⁻¹ Σ_k e^{i(φ(x_j,ξ_k) − y_l ξ_k)} a(x_j,y_l,ξ_k)`.
pub fn assemble_amplitude_op(a: &AmplitudeSpec, phi: &PhaseSpec, grid: Grid) -> Result<LinearOp, GridError> {
    dense_guard(a.dim, phi, &grid)?;
    let m = assemble(&grid, |x, y, xi, buf, fa, fp| {
        let p = Point::new().with(Var::x(0), x).with(Var::y(0), y).with(Var::xi(0), xi);
        Complex64::cis(fp.eval_slots(p.slots(), buf) - y * xi) * fa.eval_slots(p.slots(), buf)
    }, a, phi)?;
    Ok(LinearOp::from_dense(format!("T[{}; {}]", a.expr, phi.expr), grid, m))
}

/// Dense matrix of `T*` from its kernel `e^{i(x·ξ − φ(y,ξ))} ā(y,x,ξ)`.
pub fn assemble_adjoint_op(a: &AmplitudeSpec, phi: &PhaseSpec, grid: Grid) -> Result<LinearOp, GridError> {
    dense_guard(a.dim, phi, &grid)?;
    let m = assemble(&grid, |x, y, xi, buf, fa, fp| {
        let p = Point::new().with(Var::x(0), y).with(Var::y(0), x).with(Var::xi(0), xi);
        Complex64::cis(x * xi - fp.eval_slots(p.slots(), buf)) * fa.eval_slots(p.slots(), buf)
    }, a, phi)?;
    Ok(LinearOp::from_dense(format!("T*[{}; {}]", a.expr, phi.expr), grid, m))
}

fn assemble(
    grid: &Grid,
    entry: impl Fn(f64, f64, f64, &mut Vec<f64>, &CompiledExpr, &CompiledExpr) -> Complex64 + Sync,
    a: &AmplitudeSpec,
    phi: &PhaseSpec,
) -> Result<super::DenseMatrix, GridError> {
    let check = CExpr::real(a.expr.clone()).compile();
    check_vars(&check, 1, &[Block::X, Block::Y, Block::Xi])?;
    let (fa, fp) = (a.expr.compile(), phi.expr.compile());
    let n = grid.points;
    let (xs, ks) = (grid.nodes(), grid.freqs());
    let scale = 1.0 / n as f64;
    let data: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map_init(Vec::new, |buf, idx| {
            let (j, l) = (idx / n, idx % n);
            ks.iter()
                .map(|&xi| entry(xs[j], xs[l], xi, buf, &fa, &fp))
                .sum::<Complex64>()
                * scale
        })
        .collect();
    if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(GridError::NonFinite("dense assembly".into()));
    }
    Ok(super::DenseMatrix::new(n, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{DecayFlags, OrderTriple, PhaseProfile};
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn grid(n: usize, l: f64) -> Grid {
        Grid::new(1, n, l).unwrap()
    }

    fn cx(s: &str, dim: usize) -> CExpr {
        CExpr::real(parse(s, dim).unwrap())
    }

    fn phase(s: &str) -> PhaseSpec {
        PhaseSpec::new(parse(s, 1).unwrap(), 1, PhaseProfile::L2).unwrap()
    }

    fn amp(s: &str) -> AmplitudeSpec {
        AmplitudeSpec::new(parse(s, 1).unwrap(), 1, OrderTriple::default(), DecayFlags::NONE).unwrap()
    }

    fn gaussian(g: Grid, c: f64) -> GridField {
        GridField::from_fn(g, |x| Complex64::new((-(x[0] - c).powi(2)).exp(), 0.3 * x[0] * (-x[0] * x[0]).exp()))
            .unwrap()
    }

    #[test]
    fn psido_examples() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 16, 4.0).unwrap();
            let u = GridField::from_fn(g, |x| Complex64::new(x[0].sin(), x.iter().sum::<f64>().cos())).unwrap();
            let v = apply_psido(&cx("1", dim), &u).unwrap();
            assert!(v.max_abs_diff(&u).unwrap() < 1e-12);
            // Plane wave eigenfunction.
            let k0 = 3;
            let xi0 = g.freq(k0);
            let w = GridField::from_fn(g, |x| Complex64::cis(x[0] * xi0)).unwrap();
            let pw = apply_psido(&cx("xi1", dim), &w).unwrap();
            assert!(pw.max_abs_diff(&w.scale(xi0.into())).unwrap() < 1e-12);
            // Multiplication, also through the dense path.
            let m = apply_psido(&cx("jbr(x1)", dim), &u).unwrap();
            let want = GridField::from_fn(g, |x| {
                (1.0 + x[0] * x[0]).sqrt() * Complex64::new(x[0].sin(), x.iter().sum::<f64>().cos())
            })
            .unwrap();
            assert!(m.max_abs_diff(&want).unwrap() < 1e-12);
            let lin = if dim == 1 { "x1*xi1" } else { "x1*xi1 + x2*xi2" };
            let lin = PhaseSpec::new(parse(lin, dim).unwrap(), dim, PhaseProfile::L2).unwrap();
            let m2 = apply_fio(&cx("jbr(x1)", dim), &lin, &u).unwrap();
            assert!(m2.max_abs_diff(&want).unwrap() < 1e-11);
        }
    }

    #[test]
    fn fio_examples() {
        let g = grid(64, 8.0);
        let u = gaussian(g, 0.5);
        let id = apply_fio(&cx("1", 1), &phase("x1*xi1"), &u).unwrap();
        assert!(id.max_abs_diff(&u).unwrap() < 1e-12);
        // Node-exact translation: Tu(x) = u(x + t).
        let t = 3.0 * g.dx();
        let phi = phase(&format!("x1*xi1 + {t}*xi1"));
        let v = apply_fio(&cx("1", 1), &phi, &u).unwrap();
        for j in 0..61 {
            assert!((v.values()[j] - u.values()[j + 3]).norm() < 1e-12);
        }
        // Agrees with the symbol path for φ = x·ξ.
        let p = cx("x1 * atan(xi1) + jbr(x1, xi1)^-1", 1);
        let a = apply_fio(&p, &phase("x1*xi1"), &u).unwrap();
        let b = apply_psido(&p, &u).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn weights() {
        let g = grid(64, 8.0);
        let u = gaussian(g, 0.0);
        assert_eq!(apply_weight(0.0, 0.0, &u), u);
        let xi0 = g.freq(5);
        let w = GridField::from_fn(g, |x| Complex64::cis(x[0] * xi0)).unwrap();
        let v = apply_weight(0.0, 2.0, &w);
        assert!(v.max_abs_diff(&w.scale((1.0 + xi0 * xi0).into())).unwrap() < 1e-12);
        let back = apply_weight_tilde(-1.0, -1.0, &apply_weight(1.0, 1.0, &u));
        assert!(back.max_abs_diff(&u).unwrap() < 1e-12);
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid(256, 16.0);
        let e = GridField::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        assert!((sobolev_norm(&e, 0.0, 0.0) - e.norm_l2()).abs() < 1e-15);
        let want = (1.25 * (PI / 2.0).sqrt()).sqrt();
        assert!((sobolev_norm(&e, 1.0, 0.0) - want).abs() < 1e-4);
        let spike = GridField::basis(g, 128);
        assert_eq!(g.node(128), 0.0);
        assert!((sobolev_norm(&spike, 1.0, 0.0) - spike.norm_l2()).abs() < 1e-15);
    }

    #[test]
    fn dense_assembly_examples() {
        let g = grid(64, 8.0);
        let id = assemble_amplitude_op(&amp("1"), &phase("x1*xi1"), g).unwrap();
        let m = id.dense().unwrap();
        for j in 0..64 {
            for l in 0..64 {
                let want = if j == l { 1.0 } else { 0.0 };
                assert!((m.get(j, l) - want).norm() < 1e-8);
            }
        }
        // Amplitude y: multiplication by x.
        let t = assemble_amplitude_op(&amp("y1"), &phase("x1*xi1"), g).unwrap();
        let u = gaussian(g, 0.2);
        let v = t.apply(&u).unwrap();
        let want = GridField::from_fn(g, |x| x[0].into()).unwrap();
        let want = GridField::new(g, want.values().iter().zip(u.values()).map(|(a, b)| a * b).collect()).unwrap();
        assert!(v.max_abs_diff(&want).unwrap() < 1e-8);
    }

    #[test]
    fn adjoint_by_formula_matches_transpose() {
        let g = grid(32, 6.0);
        let a = amp("atan(x1 - y1) * jbr(xi1)^-1 + jbr(y1)^-2");
        let phi = phase("x1*xi1 + 0.3*jbr(xi1) + atan(x1)");
        let t = assemble_amplitude_op(&a, &phi, g).unwrap();
        let ts = assemble_adjoint_op(&a, &phi, g).unwrap();
        let diff = t.dense().unwrap().adjoint().max_abs_diff(ts.dense().unwrap());
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn symbol_adjoints_match_dense() {
        let g = grid(16, 4.0);
        let c = CExpr::new(parse("jbr(x1)^-1 * atan(xi1)", 1).unwrap(), parse("x1*xi1*jbr(x1,xi1)^-2", 1).unwrap());
        for op in [
            fio_op(&c, &phase("x1*xi1 + atan(x1)*xi1"), g).unwrap(),
            psido_op(&c, g).unwrap(),
            psido_op(&cx("atan(xi1)", 1), g).unwrap(),
            psido_op(&cx("atan(x1)", 1), g).unwrap(),
            weight_op(1.0, -1.0, g),
        ] {
            let d = op.materialize().unwrap();
            let dstar = d.dense().unwrap().adjoint();
            for l in 0..16 {
                let col = op.apply_adjoint(&GridField::basis(g, l)).unwrap();
                for j in 0..16 {
                    assert!((col.values()[j] - dstar.get(j, l)).norm() < 1e-12, "{}", op.label());
                }
            }
        }
    }

    #[test]
    fn size_cap() {
        let g = grid(512, 8.0);
        assert!(matches!(
            assemble_amplitude_op(&amp("1"), &phase("x1*xi1"), g),
            Err(GridError::SizeCap { .. })
        ));
        let u = GridField::zeros(grid(8, 1.0));
        assert!(matches!(apply_psido(&cx("y1", 1), &u), Err(GridError::Unbound(_))));
    }
}
