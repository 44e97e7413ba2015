//! Rectangle grids, the Neumann cosine eigenbasis and the operators built on it.
//!
//! Nodes sit at cell centres, so the orthonormal DCT-II is exactly orthogonal
//! on the nodal values and midpoint quadrature with the uniform cell measure
//! is the discrete L² inner product. Spectral coefficients are the discrete L²
//! projections onto the orthonormal eigenfunctions
//!
//! ```text
//! e_jk(x, y) = √((2 − δ_j0)/lx) · √((2 − δ_k0)/ly) · cos(jπx/lx) · cos(kπy/ly),
//! −Δ e_jk = λ_jk e_jk,   λ_jk = (jπ/lx)² + (kπ/ly)².
//! ```
//!
//! With that (unitary) normalization every diagonal spectral multiplier is a
//! symmetric operator on nodal values.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

/// Tensor-product grid on `[0, lx] × [0, ly]`. A one-dimensional grid is
/// encoded with `ny == 1`; `ly` then acts as a unit thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 {
            return Err(Error::InvalidGrid(format!("nx = {nx}, need at least 2 nodes")));
        }
        if ny == 0 {
            return Err(Error::InvalidGrid("ny = 0".into()));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("side lengths must be positive, got {lx} x {ly}")));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// One-dimensional grid of `nx` nodes on `[0, lx]`.
    pub fn new_1d(nx: usize, lx: f64) -> Result<Self> {
        Self::new(nx, 1, lx, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    /// Number of nodes (and of spectral modes).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_measure(&self) -> f64 {
        (self.lx / self.nx as f64) * (self.ly / self.ny as f64)
    }

    /// |Ω|
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Cell-centre coordinates of node `(ix, iy)`.
    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            (ix as f64 + 0.5) * self.lx / self.nx as f64,
            (iy as f64 + 0.5) * self.ly / self.ny as f64,
        )
    }

    /// Neumann eigenvalue of mode `(j, k)`.
    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        let a = j as f64 * PI / self.lx;
        let b = k as f64 * PI / self.ly;
        a * a + b * b
    }

    /// Eigenvalues in the same row-major layout as the coefficients.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.ny {
            for j in 0..self.nx {
                out.push(self.eigenvalue(j, k));
            }
        }
        out
    }

    /// Smallest positive eigenvalue.
    pub fn lambda_min_positive(&self) -> f64 {
        let lx = self.eigenvalue(1, 0);
        if self.ny > 1 {
            lx.min(self.eigenvalue(0, 1))
        } else {
            lx
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Nodal values of a scalar function, row-major (`values[iy * nx + ix]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Construction without the finiteness check; used by solvers that report
    /// blow-up themselves.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the cell centres.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                let (x, y) = grid.node(ix, iy);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        debug_assert!(self.grid.same_shape(&other.grid));
        Field::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        )
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// Discrete L²(Ω) inner product (midpoint quadrature).
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert!(self.grid.same_shape(&other.grid));
        self.grid.cell_measure() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cosine coefficients of a [`Field`], same row-major layout; entry `(j, k)`
/// belongs to the eigenvalue λ_jk.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn from_coeffs(grid: Grid, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a grid of {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, j: usize, k: usize) -> f64 {
        self.coeffs[self.grid.index(j, k)]
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }
}

/// Planned forward/inverse cosine transforms for one grid.
///
/// Cloning is cheap; plans are shared.
#[derive(Clone)]
pub struct CosineTransform {
    grid: Grid,
    dct_x: Arc<dyn TransformType2And3<f64>>,
    dct_y: Option<Arc<dyn TransformType2And3<f64>>>,
    lambda: Arc<Vec<f64>>,
}

impl std::fmt::Debug for CosineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosineTransform").field("grid", &self.grid).finish()
    }
}

impl CosineTransform {
    pub fn new(grid: Grid) -> Self {
        let mut planner = DctPlanner::new();
        let dct_x = planner.plan_dct2(grid.nx());
        let dct_y = (grid.ny() > 1).then(|| planner.plan_dct2(grid.ny()));
        Self {
            grid,
            dct_x,
            dct_y,
            lambda: Arc::new(grid.eigenvalues()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// λ_jk in coefficient layout.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// In-place forward transform of nodal values into unitary coefficients.
    pub fn forward_in_place(&self, buf: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        debug_assert_eq!(buf.len(), nx * ny);
        for row in buf.chunks_exact_mut(nx) {
            self.dct_x.process_dct2(row);
        }
        if let Some(dct_y) = &self.dct_y {
            let mut col = vec![0.0; ny];
            for ix in 0..nx {
                for iy in 0..ny {
                    col[iy] = buf[iy * nx + ix];
                }
                dct_y.process_dct2(&mut col);
                for iy in 0..ny {
                    buf[iy * nx + ix] = col[iy];
                }
            }
        }
        // DCT-II output X_k → orthonormal √((2 − δ_k0)/N) X_k, then √(cell measure).
        let h = self.grid.cell_measure().sqrt();
        let sx0 = (1.0 / nx as f64).sqrt();
        let sx = (2.0 / nx as f64).sqrt();
        let sy0 = (1.0 / ny as f64).sqrt();
        let sy = (2.0 / ny as f64).sqrt();
        for k in 0..ny {
            let fy = if k == 0 { sy0 } else { sy };
            for j in 0..nx {
                let fx = if j == 0 { sx0 } else { sx };
                buf[k * nx + j] *= h * fx * fy;
            }
        }
    }

    /// In-place inverse of [`forward_in_place`](Self::forward_in_place).
    pub fn inverse_in_place(&self, buf: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        debug_assert_eq!(buf.len(), nx * ny);
        // DCT-III computes X_0/2 + Σ X_k cos(..); undo the orthonormal scaling accordingly.
        let h = 1.0 / self.grid.cell_measure().sqrt();
        let sx0 = 2.0 / (nx as f64).sqrt();
        let sx = (2.0 / nx as f64).sqrt();
        let (sy0, sy) = if ny > 1 {
            (2.0 / (ny as f64).sqrt(), (2.0 / ny as f64).sqrt())
        } else {
            (1.0, 1.0)
        };
        for k in 0..ny {
            let fy = if k == 0 { sy0 } else { sy };
            for j in 0..nx {
                let fx = if j == 0 { sx0 } else { sx };
                buf[k * nx + j] *= h * fx * fy;
            }
        }
        for row in buf.chunks_exact_mut(nx) {
            self.dct_x.process_dct3(row);
        }
        if let Some(dct_y) = &self.dct_y {
            let mut col = vec![0.0; ny];
            for ix in 0..nx {
                for iy in 0..ny {
                    col[iy] = buf[iy * nx + ix];
                }
                dct_y.process_dct3(&mut col);
                for iy in 0..ny {
                    buf[iy * nx + ix] = col[iy];
                }
            }
        }
    }

    pub fn to_spectral(&self, f: &Field) -> SpectralField {
        debug_assert!(self.grid.same_shape(f.grid()));
        let mut coeffs = f.values().to_vec();
        self.forward_in_place(&mut coeffs);
        SpectralField { grid: self.grid, coeffs }
    }

    pub fn from_spectral(&self, s: &SpectralField) -> Field {
        debug_assert!(self.grid.same_shape(s.grid()));
        let mut values = s.coeffs().to_vec();
        self.inverse_in_place(&mut values);
        Field::from_raw(self.grid, values)
    }

    /// Applies the diagonal multiplier `m(λ)` in spectral space.
    pub fn apply_multiplier(&self, f: &Field, m: impl Fn(f64) -> f64) -> Field {
        let mut buf = f.values().to_vec();
        self.forward_in_place(&mut buf);
        for (c, &l) in buf.iter_mut().zip(self.lambda.iter()) {
            *c *= m(l);
        }
        self.inverse_in_place(&mut buf);
        Field::from_raw(self.grid, buf)
    }

    /// Nodal Laplacian −(−Δ) of a field.
    pub fn laplacian_field(&self, f: &Field) -> Field {
        self.apply_multiplier(f, |l| -l)
    }

    /// ‖∇f‖² = Σ λ c².
    pub fn grad_norm_sq(&self, f: &Field) -> f64 {
        let s = self.to_spectral(f);
        s.coeffs.iter().zip(self.lambda.iter()).map(|(c, l)| l * c * c).sum()
    }

    pub fn solve_n(&self, f: &Field) -> Result<Field> {
        let mut s = self.to_spectral(f);
        let c00 = s.coeffs[0];
        let norm = s.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if c00.abs() > 1e-10 * norm {
            return Err(Error::NonzeroMean { mean: mean(f) });
        }
        s.coeffs[0] = 0.0;
        for (c, &l) in s.coeffs.iter_mut().zip(self.lambda.iter()).skip(1) {
            *c /= l;
        }
        Ok(self.from_spectral(&s))
    }

    pub fn norm_v(&self, f: &Field) -> f64 {
        let s = self.to_spectral(f);
        s.coeffs
            .iter()
            .zip(self.lambda.iter())
            .map(|(c, l)| (1.0 + l) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_vstar(&self, f: &Field) -> f64 {
        let s = self.to_spectral(f);
        let grad_part: f64 = s
            .coeffs
            .iter()
            .zip(self.lambda.iter())
            .skip(1)
            .map(|(c, l)| c * c / l)
            .sum();
        let m = mean(f);
        (grad_part + m * m).sqrt()
    }
}

/// All modes `(j, k)` ordered by nondecreasing eigenvalue, ties broken
/// lexicographically on `(j, k)`.
pub fn modes_by_eigenvalue(grid: &Grid) -> Vec<(usize, usize)> {
    let mut modes: Vec<(usize, usize)> = (0..grid.nx())
        .flat_map(|j| (0..grid.ny()).map(move |k| (j, k)))
        .collect();
    modes.sort_by(|a, b| {
        grid.eigenvalue(a.0, a.1)
            .total_cmp(&grid.eigenvalue(b.0, b.1))
            .then(a.cmp(b))
    });
    modes
}

/// Nodal values of the orthonormal eigenfunction `e_jk`.
pub fn eigenfunction(grid: Grid, j: usize, k: usize) -> Field {
    let ax = ((if j == 0 { 1.0 } else { 2.0 }) / grid.lx()).sqrt();
    let ay = ((if k == 0 { 1.0 } else { 2.0 }) / grid.ly()).sqrt();
    let (lx, ly) = (grid.lx(), grid.ly());
    Field::from_fn(grid, |x, y| {
        ax * ay * (j as f64 * PI * x / lx).cos() * (k as f64 * PI * y / ly).cos()
    })
}

pub fn to_spectral(f: &Field) -> SpectralField {
    CosineTransform::new(*f.grid()).to_spectral(f)
}

pub fn from_spectral(s: &SpectralField) -> Field {
    CosineTransform::new(*s.grid()).from_spectral(s)
}

/// Multiplies every coefficient by −λ_jk.
pub fn laplacian(s: &SpectralField) -> SpectralField {
    let grid = *s.grid();
    let coeffs = s
        .coeffs
        .iter()
        .zip(grid.eigenvalues())
        .map(|(c, l)| -l * c)
        .collect();
    SpectralField { grid, coeffs }
}

/// Cell-measure weighted average.
pub fn mean(f: &Field) -> f64 {
    f.values().iter().sum::<f64>() / f.values().len() as f64
}

/// Inverse Neumann Laplacian on zero-mean fields: `−Δ N f = f`, `mean(N f) = 0`.
pub fn solve_n(f: &Field) -> Result<Field> {
    CosineTransform::new(*f.grid()).solve_n(f)
}

pub fn norm_h(f: &Field) -> f64 {
    f.inner(f).sqrt()
}

pub fn norm_v(f: &Field) -> f64 {
    CosineTransform::new(*f.grid()).norm_v(f)
}

/// Dual norm `‖f‖*² = ‖∇N(f − f̄)‖² + |f̄|²`.
pub fn norm_vstar(f: &Field) -> f64 {
    CosineTransform::new(*f.grid()).norm_vstar(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_field, seeded};

    fn square_pi(n: usize) -> Grid {
        Grid::new(n, n, PI, PI).unwrap()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(1, 4, 1.0, 1.0).is_err());
        assert!(Grid::new(4, 4, 0.0, 1.0).is_err());
        assert!(Grid::new(4, 0, 1.0, 1.0).is_err());
        assert!(Grid::new_1d(8, 2.0).is_ok());
    }

    #[test]
    fn constant_maps_to_mean_mode() {
        let grid = Grid::new(8, 6, 2.0, 3.0).unwrap();
        let s = to_spectral(&Field::constant(grid, 1.5));
        assert!((s.coeff(0, 0) - 1.5 * 6f64.sqrt()).abs() < 1e-12);
        assert!(s.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
        let back = from_spectral(&s);
        assert!(back.values().iter().all(|v| (v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn eigenfunction_is_unit_coefficient() {
        for grid in [Grid::new(8, 6, 2.0, 3.0).unwrap(), Grid::new_1d(10, 1.3).unwrap()] {
            let s = to_spectral(&eigenfunction(grid, 1, 0));
            for (i, c) in s.coeffs().iter().enumerate() {
                let expected = if i == grid.index(1, 0) { 1.0 } else { 0.0 };
                assert!((c - expected).abs() < 1e-12, "coeff {i} = {c}");
            }
            let mut unit = SpectralField::zeros(grid);
            unit.coeffs_mut()[grid.index(1, 0)] = 1.0;
            let e = from_spectral(&unit);
            let ref_e = eigenfunction(grid, 1, 0);
            assert!(e.sub(&ref_e).max_abs() < 1e-12);
        }
    }

    #[test]
    fn random_round_trip() {
        let mut rng = seeded(7);
        for grid in [Grid::new(16, 12, 1.0, 2.0).unwrap(), Grid::new_1d(33, 4.0).unwrap()] {
            let f = random_field(&mut rng, grid);
            let back = from_spectral(&to_spectral(&f));
            let err = norm_h(&back.sub(&f)) / norm_h(&f);
            assert!(err < 1e-12, "round trip error {err}");
        }
    }

    #[test]
    fn laplacian_examples() {
        let grid = square_pi(8);
        let zero = laplacian(&to_spectral(&Field::constant(grid, 3.0)));
        assert!(zero.coeffs().iter().all(|c| c.abs() < 1e-12));

        let l10 = from_spectral(&laplacian(&to_spectral(&eigenfunction(grid, 1, 0))));
        assert!(l10.axpy(1.0, &eigenfunction(grid, 1, 0)).max_abs() < 1e-12);

        let l11 = from_spectral(&laplacian(&to_spectral(&eigenfunction(grid, 1, 1))));
        assert!(l11.axpy(2.0, &eigenfunction(grid, 1, 1)).max_abs() < 1e-12);
    }

    #[test]
    fn mean_examples() {
        let grid = square_pi(8);
        assert!((mean(&Field::constant(grid, 2.5)) - 2.5).abs() < 1e-15);
        let e = eigenfunction(grid, 1, 0);
        assert!(mean(&e).abs() < 1e-14);
        assert!((mean(&e.map(|v| v + 1.0)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_n_examples() {
        let grid = square_pi(8);
        let e10 = eigenfunction(grid, 1, 0);
        assert!(solve_n(&e10).unwrap().sub(&e10).max_abs() < 1e-12);
        let e11 = eigenfunction(grid, 1, 1);
        assert!(solve_n(&e11).unwrap().sub(&e11.scale(0.5)).max_abs() < 1e-12);
        assert!(matches!(
            solve_n(&Field::constant(grid, 1.0)),
            Err(Error::NonzeroMean { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        let grid = square_pi(8);
        let z = Field::zeros(grid);
        assert_eq!(norm_h(&z), 0.0);
        assert_eq!(norm_v(&z), 0.0);
        assert_eq!(norm_vstar(&z), 0.0);

        let one = Field::constant(grid, 1.0);
        assert!((norm_h(&one) - PI).abs() < 1e-12);
        assert!((norm_vstar(&one) - 1.0).abs() < 1e-12);

        // ‖∇N e‖ = ‖e‖/√λ with λ = 1 and ‖e‖ = 1 (Parseval)
        let e = eigenfunction(grid, 1, 0);
        let oracle = norm_h(&e) / grid.eigenvalue(1, 0).sqrt();
        assert!((norm_vstar(&e) - oracle).abs() < 1e-12);
        assert!((norm_vstar(&e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_inverts_solve_n() {
        let mut rng = seeded(11);
        let grid = Grid::new(12, 10, 1.5, 1.0).unwrap();
        let ops = CosineTransform::new(grid);
        let f = random_field(&mut rng, grid);
        let f = f.map(|v| v - mean(&f));
        let u = ops.solve_n(&f).unwrap();
        let back = ops.laplacian_field(&u);
        assert!(back.axpy(1.0, &f).max_abs() < 1e-10 * f.max_abs().max(1.0));
        assert!(mean(&u).abs() < 1e-12);
    }
}
