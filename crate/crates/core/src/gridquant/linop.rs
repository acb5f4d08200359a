use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Grid, GridError, GridField, DENSE_CAP};

type Applier = Arc<dyn Fn(&GridField) -> Result<GridField, GridError> + Send + Sync>;

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn new(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n, "dense matrix needs n² entries");
        DenseMatrix { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, l: usize) -> Complex64 {
        self.data[j * self.n + l]
    }

    pub fn matvec(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn adjoint(&self) -> DenseMatrix {
        let n = self.n;
        let mut d = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for l in 0..n {
                d[l * n + j] = self.data[j * n + l].conj();
            }
        }
        DenseMatrix::new(n, d)
    }

    /// `self · other`.
    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let t = other.adjoint();
        let data = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (j, l) = (idx / n, idx % n);
                (0..n).map(|k| self.data[j * n + k] * t.data[l * n + k].conj()).sum()
            })
            .collect();
        DenseMatrix::new(n, data)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// A matrix-free linear operator on grid fields, with an optional adjoint
/// and an optional dense form.
#[derive(Clone)]
pub struct LinearOp {
    label: String,
    grid: Grid,
    apply: Applier,
    adjoint: Option<Applier>,
    dense: Option<Arc<DenseMatrix>>,
}

impl std::fmt::Debug for LinearOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearOp")
            .field("label", &self.label)
            .field("grid", &self.grid)
            .field("adjoint", &self.adjoint.is_some())
            .field("dense", &self.dense.is_some())
            .finish()
    }
}

impl LinearOp {
    pub fn new(
        label: impl Into<String>,
        grid: Grid,
        apply: impl Fn(&GridField) -> Result<GridField, GridError> + Send + Sync + 'static,
        adjoint: Option<Applier>,
    ) -> Self {
        LinearOp { label: label.into(), grid, apply: Arc::new(apply), adjoint, dense: None }
    }

    pub fn from_dense(label: impl Into<String>, grid: Grid, m: DenseMatrix) -> Self {
        let m = Arc::new(m);
        let (a, b) = (Arc::clone(&m), Arc::clone(&m));
        let g = grid;
        LinearOp {
            label: label.into(),
            grid,
            apply: Arc::new(move |u: &GridField| Ok(GridField::from_raw(g, a.matvec(u.values())))),
            adjoint: Some(Arc::new(move |u: &GridField| {
                let v = u.values();
                let n = b.size();
                let out = (0..n)
                    .into_par_iter()
                    .map(|l| (0..n).map(|j| b.get(j, l).conj() * v[j]).sum())
                    .collect();
                Ok(GridField::from_raw(g, out))
            })),
            dense: Some(m),
        }
    }

    pub fn identity(grid: Grid) -> Self {
        LinearOp::new("I", grid, |u| Ok(u.clone()), Some(Arc::new(|u: &GridField| Ok(u.clone()))))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dense(&self) -> Option<&DenseMatrix> {
        self.dense.as_deref()
    }

    pub fn has_adjoint(&self) -> bool {
        self.adjoint.is_some()
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField, GridError> {
        if *u.grid() != self.grid {
            return Err(GridError::GridMismatch);
        }
        (self.apply)(u)
    }

    pub fn apply_adjoint(&self, u: &GridField) -> Result<GridField, GridError> {
        if *u.grid() != self.grid {
            return Err(GridError::GridMismatch);
        }
        match &self.adjoint {
            Some(f) => f(u),
            None => Err(GridError::NoAdjoint(self.label.clone())),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearOp) -> Result<LinearOp, GridError> {
        if self.grid != inner.grid {
            return Err(GridError::GridMismatch);
        }
        let label = format!("{} . {}", self.label, inner.label);
        if let (Some(a), Some(b)) = (&self.dense, &inner.dense) {
            return Ok(LinearOp::from_dense(label, self.grid, a.mul(b)));
        }
        let (a, b) = (self.clone(), inner.clone());
        let adjoint: Option<Applier> = match (&self.adjoint, &inner.adjoint) {
            (Some(_), Some(_)) => {
                let (a, b) = (self.clone(), inner.clone());
                Some(Arc::new(move |u: &GridField| b.apply_adjoint(&a.apply_adjoint(u)?)))
            }
            _ => None,
        };
        Ok(LinearOp::new(label, self.grid, move |u| a.apply(&b.apply(u)?), adjoint))
    }

    /// Dense form built column by column from the applier (n = 1, `N ≤` cap).
    /// The applier is kept, so both paths can be cross-checked.
    pub fn materialize(&self) -> Result<LinearOp, GridError> {
        if self.dense.is_some() {
            return Ok(self.clone());
        }
        let g = self.grid;
        if g.dim != 1 || g.points > DENSE_CAP {
            return Err(GridError::SizeCap { dim: g.dim, points: g.points, cap: DENSE_CAP });
        }
        let n = g.points;
        let cols = (0..n)
            .into_par_iter()
            .map(|l| self.apply(&GridField::basis(g, l)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (l, c) in cols.iter().enumerate() {
            for (j, v) in c.values().iter().enumerate() {
                data[j * n + l] = *v;
            }
        }
        let mut op = LinearOp::from_dense(self.label.clone(), g, DenseMatrix::new(n, data));
        op.apply = Arc::clone(&self.apply);
        Ok(op)
    }
}

/// Largest difference between the dense form and the applier over all basis
/// vectors; `None` when the operator is not materialized.
pub fn check_dense(op: &LinearOp) -> Result<Option<f64>, GridError> {
    let Some(m) = op.dense() else { return Ok(None) };
    let g = *op.grid();
    let mut worst: f64 = 0.0;
    for l in 0..g.len() {
        let col = op.apply(&GridField::basis(g, l))?;
        for (j, v) in col.values().iter().enumerate() {
            worst = worst.max((v - m.get(j, l)).norm());
        }
    }
    Ok(Some(worst))
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> GridField {
    let v = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    GridField::from_raw(grid, v)
}

/// Relative linearity defect `‖A(αu+βv) − αAu − βAv‖ / (|α|‖Au‖ + |β|‖Av‖)`
/// on a seeded random pair.
pub fn check_linearity(op: &LinearOp, seed: u64) -> Result<f64, GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = *op.grid();
    let (u, v) = (random_field(g, &mut rng), random_field(g, &mut rng));
    let al = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let be = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let (au, av) = (op.apply(&u)?, op.apply(&v)?);
    let lhs = op.apply(&u.scale(al).add(&v.scale(be))?)?;
    let rhs = au.scale(al).add(&av.scale(be))?;
    let scale = al.norm() * au.norm_l2() + be.norm() * av.norm_l2();
    Ok(lhs.sub(&rhs)?.norm_l2() / scale.max(f64::MIN_POSITIVE))
}

pub const DEFAULT_ITERS: usize = 60;

/// Result of [`opnorm`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpNorm {
    pub norm: f64,
    pub iters: usize,
    pub converged: bool,
    /// Relative change of the last step.
    pub rel_change: f64,
    pub grid: Grid,
}

/// Operator norm from the Krylov sequence of `A*A` started at a seeded
/// random vector. Lanczos with full reorthogonalization extracts the top
/// Ritz value from the same power sequence, which converges far faster
/// than the plain power quotient on clustered spectra.
pub fn opnorm(a: &LinearOp, iters: usize, seed: u64) -> Result<OpNorm, GridError> {
    let g = *a.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_field(g, &mut rng);
    let nrm = vec_norm(start.values());
    let mut basis: Vec<Vec<Complex64>> = vec![start.values().iter().map(|v| v / nrm).collect()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut est = 0.0;
    let mut rel_change = f64::INFINITY;
    let mut done = 0;
    let mut converged = false;
    for k in 0..iters.max(1) {
        let q = GridField::from_raw(g, basis[k].clone());
        let w = a.apply_adjoint(&a.apply(&q)?)?;
        let mut w = w.into_values();
        let ak = dotc(&basis[k], &w).re;
        alpha.push(ak);
        for _ in 0..2 {
            for b in &basis {
                let c = dotc(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bk = vec_norm(&w);
        let top = tridiag_max_eig(&alpha, &beta).max(0.0).sqrt();
        if !top.is_finite() {
            return Err(GridError::NonFinite(format!("opnorm of {}", a.label())));
        }
        rel_change = if k == 0 { f64::INFINITY } else { (top - est).abs() / top.max(f64::MIN_POSITIVE) };
        est = top;
        done = k + 1;
        let breakdown = bk <= 1e-13 * top.max(1e-300) * top.max(1e-300) || done == g.len();
        if breakdown {
            converged = true;
            rel_change = 0.0;
            break;
        }
        if rel_change <= 1e-14 {
            break;
        }
        beta.push(bk);
        basis.push(w.iter().map(|v| v / bk).collect());
    }
    converged = converged || rel_change <= 1e-6;
    Ok(OpNorm { norm: est, iters: done, converged, rel_change, grid: g })
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `a` and off-diagonal `b`, by Sturm-sequence bisection.
fn tridiag_max_eig(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = b.get(i).map_or(0.0, |v| v.abs()) + if i > 0 { b[i - 1].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    // Number of eigenvalues below x.
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { off / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, CExpr};
    use crate::gridquant::{fio_op, psido_op};
    use crate::classes::{PhaseProfile, PhaseSpec};

    fn g(n: usize) -> Grid {
        Grid::new(1, n, 8.0).unwrap()
    }

    #[test]
    fn tridiagonal_eigenvalue() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        assert!((tridiag_max_eig(&[2.0, 2.0], &[1.0]) - 3.0).abs() < 1e-12);
        assert!((tridiag_max_eig(&[5.0], &[]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn opnorm_examples() {
        let id = opnorm(&LinearOp::identity(g(64)), DEFAULT_ITERS, 1).unwrap();
        assert!((id.norm - 1.0).abs() < 1e-8 && id.converged);
        let m = psido_op(&CExpr::real(parse("jbr(x1)^-1", 1).unwrap()), g(128)).unwrap();
        let r = opnorm(&m, DEFAULT_ITERS, 2).unwrap();
        assert!((r.norm - 1.0).abs() < 1e-6, "{r:?}");
        let u = CExpr::expi(&parse("atan(xi1)", 1).unwrap());
        let phi = PhaseSpec::new(parse("x1*xi1", 1).unwrap(), 1, PhaseProfile::L2).unwrap();
        let r = opnorm(&fio_op(&u, &phi, g(64)).unwrap(), DEFAULT_ITERS, 3).unwrap();
        assert!((r.norm - 1.0).abs() < 1e-6, "{r:?}");
        let r = opnorm(&psido_op(&u, Grid::new(2, 16, 4.0).unwrap()).unwrap(), DEFAULT_ITERS, 4).unwrap();
        assert!((r.norm - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn norm_is_invariant_under_unitary_composition() {
        let grid = g(64);
        let a = psido_op(&CExpr::real(parse("atan(x1) * jbr(xi1)^-1 + 0.5", 1).unwrap()), grid).unwrap();
        let u = psido_op(&CExpr::expi(&parse("2*atan(xi1)", 1).unwrap()), grid).unwrap();
        let n1 = opnorm(&a, DEFAULT_ITERS, 5).unwrap().norm;
        let n2 = opnorm(&a.compose(&u).unwrap(), DEFAULT_ITERS, 5).unwrap().norm;
        assert!((n1 - n2).abs() < 1e-5 * n1, "{n1} vs {n2}");
        let d = a.materialize().unwrap();
        assert!(check_dense(&d).unwrap().unwrap() < 1e-10);
        assert!(check_linearity(&a, 9).unwrap() < 1e-10);
        let n3 = opnorm(&d, DEFAULT_ITERS, 6).unwrap().norm;
        assert!((n1 - n3).abs() < 1e-6 * n1);
    }

    #[test]
    fn missing_adjoint_is_reported() {
        let op = LinearOp::new("f", g(8), |u| Ok(u.clone()), None);
        assert!(matches!(opnorm(&op, 5, 0), Err(GridError::NoAdjoint(_))));
    }
}
