//! Periodic-grid discretization of pseudo-differential and Fourier integral
//! operators, weighted Sobolev operators and operator-norm estimation.
//!
//! Conventions: nodes `x_j = −L + 2Lj/N`, dual nodes `ξ_k = πk/L` with
//! `k ∈ [−N/2, N/2)` stored in FFT order, transform
//! `û_k = Σ_j e^{−i x_j·ξ_k} u_j` and synthesis `u_j = N^{−n} Σ_k e^{i x_j·ξ_k} û_k`.
//! The factor `N^{−n}` is `Δx^n Δξ^n/(2π)^n`, so discrete sums carry the
//! normalized measure `đξ`.

mod linop;
mod ops;
mod th25;

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Block, CExpr, DiffError, Point, Var};

pub use linop::{check_dense, check_linearity, opnorm, DenseMatrix, LinearOp, OpNorm, DEFAULT_ITERS};
pub use ops::{
    adjoint_fio, apply_fio, apply_psido, apply_weight,
    apply_weight_tilde, assemble_adjoint_op, assemble_amplitude_op, fio_op, psido_op, sobolev_norm,
    weight_op, weight_tilde_op, DENSE_CAP,
};
pub use th25::{th25_bound, Th25Bound};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has {found} values, grid needs {expected}")]
    Length { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("variable {0} cannot be bound on the grid")]
    Unbound(Var),
    #[error("dense assembly needs n = 1 and N <= {cap}, got n = {dim}, N = {points}")]
    SizeCap { dim: usize, points: usize, cap: usize },
    #[error("dimension mismatch: grid has n = {grid}, input has n = {input}")]
    Dimension { grid: usize, input: usize },
    #[error("operator {0} has no adjoint")]
    NoAdjoint(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Uniform periodic grid on `[−L, L)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    /// Points per axis, a power of two.
    pub points: usize,
    /// Half-width `L`.
    pub half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self, GridError> {
        if !(1..=2).contains(&dim) {
            return Err(GridError::BadGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(GridError::BadGrid(format!("{points} points per axis is not a power of two")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadGrid(format!("half-width {half_width} must be positive")));
        }
        Ok(Grid { dim, points, half_width })
    }

    /// Total number of nodes `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// Dual node at FFT-order position `k`.
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.points as i64;
        let k = k as i64;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.dxi()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.freq(k)).collect()
    }

    /// Per-axis positions of flat index `idx` (row-major).
    pub fn split(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.points, idx % self.points]
        }
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.split(idx);
        [self.node(a), if self.dim == 2 { self.node(b) } else { 0.0 }]
    }

    pub fn dual(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.split(idx);
        [self.freq(a), if self.dim == 2 { self.freq(b) } else { 0.0 }]
    }

    /// A point with the `x` block bound to node `idx` and the `ξ` block to
    /// dual node `kdx`.
    pub(crate) fn point(&self, idx: usize, kdx: usize) -> Point {
        let (x, k) = (self.coords(idx), self.dual(kdx));
        Point::new()
            .with_block(Block::X, &x[..self.dim])
            .with_block(Block::Xi, &k[..self.dim])
    }

    /// `(−1)^{k1+k2}`, the shift from FFT to centred nodes.
    fn sign(&self, idx: usize) -> f64 {
        let [a, b] = self.split(idx);
        if (a + b) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn fft_axes(&self, data: &mut [Complex64], inverse: bool) {
        let fft = plan(self.points, inverse);
        fft.process(data);
        if self.dim == 2 {
            let n = self.points;
            let mut t = transpose(data, n);
            fft.process(&mut t);
            data.copy_from_slice(&transpose(&t, n));
        }
    }

    /// `û_k = Σ_j e^{−i x_j·ξ_k} u_j`.
    pub fn forward(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut d = u.to_vec();
        self.fft_axes(&mut d, false);
        for (k, v) in d.iter_mut().enumerate() {
            *v *= self.sign(k);
        }
        d
    }

    /// `u_j = N^{−n} Σ_k e^{i x_j·ξ_k} û_k`.
    pub fn inverse(&self, uh: &[Complex64]) -> Vec<Complex64> {
        let scale = 1.0 / self.len() as f64;
        let mut d: Vec<Complex64> = uh
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.sign(k))
            .collect();
        self.fft_axes(&mut d, true);
        d.iter_mut().for_each(|v| *v *= scale);
        d
    }
}

fn transpose(d: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut t = vec![Complex64::new(0.0, 0.0); d.len()];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = d[i * n + j];
        }
    }
    t
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let mut p = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

/// Complex values on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(GridError::NonFinite("field values".into()));
        }
        Ok(GridField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridField { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Result<Self, GridError> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..grid.dim])).collect();
        Self::new(grid, values)
    }

    /// Samples an expression in the `x` block.
    pub fn from_expr(grid: Grid, e: &CExpr) -> Result<Self, GridError> {
        ops::check_vars(&e.compile(), grid.dim, &[Block::X])?;
        let c = e.compile();
        let mut buf = Vec::new();
        let values = (0..grid.len())
            .map(|i| {
                let p = Point::new().with_block(Block::X, &grid.coords(i)[..grid.dim]);
                c.eval_slots(p.slots(), &mut buf)
            })
            .collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridField { grid, values }
    }

    /// Unit vector at flat index `idx`.
    pub fn basis(grid: Grid, idx: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[idx] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    fn same_grid(&self, o: &GridField) -> Result<(), GridError> {
        if self.grid == o.grid {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }

    pub fn add(&self, o: &GridField) -> Result<GridField, GridError> {
        self.same_grid(o)?;
        let v = self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect();
        Ok(GridField::from_raw(self.grid, v))
    }

    pub fn sub(&self, o: &GridField) -> Result<GridField, GridError> {
        self.same_grid(o)?;
        let v = self.values.iter().zip(&o.values).map(|(a, b)| a - b).collect();
        Ok(GridField::from_raw(self.grid, v))
    }

    pub fn scale(&self, c: Complex64) -> GridField {
        GridField::from_raw(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    /// `∫ u v̄` with cell-volume weights.
    pub fn inner(&self, o: &GridField) -> Result<Complex64, GridError> {
        self.same_grid(o)?;
        let s: Complex64 = self.values.iter().zip(&o.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Grid `L²` norm with cell-volume weights.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &GridField) -> Result<f64, GridError> {
        Ok(self.sub(o)?.max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn grid_validation_and_nodes() {
        assert!(Grid::new(3, 64, 1.0).is_err());
        assert!(Grid::new(1, 60, 1.0).is_err());
        assert!(Grid::new(1, 64, 0.0).is_err());
        let g = Grid::new(1, 8, 4.0).unwrap();
        assert_eq!(g.nodes(), vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let mut f = g.freqs();
        f.sort_by(f64::total_cmp);
        let pi4 = std::f64::consts::PI / 4.0;
        assert_eq!(f[0], -4.0 * pi4);
        assert_eq!(f[7], 3.0 * pi4);
    }

    #[test]
    fn transform_matches_direct_sum_and_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for dim in [1, 2] {
            let g = Grid::new(dim, 8, 2.5).unwrap();
            let u: Vec<Complex64> =
                (0..g.len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let uh = g.forward(&u);
            for k in 0..g.len() {
                let xi = g.dual(k);
                let direct: Complex64 = (0..g.len())
                    .map(|j| {
                        let x = g.coords(j);
                        u[j] * Complex64::cis(-(x[0] * xi[0] + x[1] * xi[1]))
                    })
                    .sum();
                assert!((direct - uh[k]).norm() < 1e-12);
            }
            let back = g.inverse(&uh);
            let err = back.iter().zip(&u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn field_arithmetic_checks_grids() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let h = Grid::new(1, 16, 4.0).unwrap();
        let u = GridField::from_fn(g, |x| Complex64::new(x[0], 0.0)).unwrap();
        assert_eq!(u.sub(&GridField::zeros(h)), Err(GridError::GridMismatch));
        assert!(GridField::new(g, vec![Complex64::new(f64::NAN, 0.0); 16]).is_err());
        assert!((u.inner(&u).unwrap().re - u.norm_l2().powi(2)).abs() < 1e-12);
    }
}
