//! Faedo–Galerkin truncation onto the lowest Neumann eigenmodes, integrated
//! independently of the spectral time stepper and used as a reference.
//!
//! With `y` the coefficients of φ and `Λ = diag(λ₁..λₙ)` the system reads
//!
//! ```text
//! y′ = −y − Λ(Λy + G(y)) + g,    z = Λy + G(y)
//! ```
//!
//! where `G(y)ⱼ = (f′(Σᵢ yᵢeᵢ), eⱼ)` by nodal quadrature and `gⱼ = (u, eⱼ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::spectral::{eigenfunction, modes_by_eigenvalue, Field, Grid};
use crate::state::{check_series, StateTrajectory, TimeGrid};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 50;

#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    grid: Grid,
    modes: Vec<(usize, usize)>,
    lambda: Vec<f64>,
    basis: Vec<Field>,
}

impl GalerkinSystem {
    /// The first `n` eigenmodes of the grid in nondecreasing λ, ties broken
    /// by `(j, k)`.
    pub fn new(grid: Grid, n: usize) -> Result<Self> {
        let all = modes_by_eigenvalue(&grid);
        if n == 0 || n > all.len() {
            return Err(Error::BadModeCount {
                requested: n,
                available: all.len(),
            });
        }
        let modes: Vec<_> = all.into_iter().take(n).collect();
        let lambda = modes.iter().map(|&(j, k)| grid.eigenvalue(j, k)).collect();
        let basis = modes.iter().map(|&(j, k)| eigenfunction(grid, j, k)).collect();
        Ok(Self {
            grid,
            modes,
            lambda,
            basis,
        })
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    fn project(&self, f: &Field) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.basis.iter().map(|e| e.inner(f)))
    }

    pub fn project_initial(&self, phi0: &Field) -> Result<DVector<f64>> {
        if !phi0.grid().same_shape(&self.grid) {
            return Err(Error::ShapeMismatch("initial datum and Galerkin basis live on different grids".into()));
        }
        Ok(self.project(phi0))
    }

    pub fn synthesize(&self, y: &DVector<f64>) -> Field {
        let mut values = vec![0.0; self.grid.len()];
        for (c, e) in y.iter().zip(&self.basis) {
            for (v, b) in values.iter_mut().zip(e.values()) {
                *v += c * b;
            }
        }
        Field::from_raw(self.grid, values)
    }

    /// `G(y)` and its Jacobian `J_{jl} = (f″(φ)eⱼ, e_l)`.
    fn nonlinearity<P: Potential + ?Sized>(&self, y: &DVector<f64>, potential: &P) -> (DVector<f64>, DMatrix<f64>) {
        let phi = self.synthesize(y);
        let n = self.n();
        let h = self.grid.cell_measure();
        let df: Vec<f64> = phi.values().iter().map(|&r| potential.df(r)).collect();
        let d2f: Vec<f64> = phi.values().iter().map(|&r| potential.d2f(r)).collect();
        let g = DVector::from_iterator(
            n,
            self.basis.iter().map(|e| h * e.values().iter().zip(&df).map(|(a, b)| a * b).sum::<f64>()),
        );
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            for l in j..n {
                let ej = self.basis[j].values();
                let el = self.basis[l].values();
                let v = h * (0..ej.len()).map(|i| ej[i] * el[i] * d2f[i]).sum::<f64>();
                jac[(j, l)] = v;
                jac[(l, j)] = v;
            }
        }
        (g, jac)
    }

    fn rhs(&self, y: &DVector<f64>, g_nl: &DVector<f64>, forcing: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| {
                let l = self.lambda[i];
                -y[i] - l * (l * y[i] + g_nl[i]) + forcing[i]
            }),
        )
    }

    /// Implicit midpoint with `substeps` sub-steps per step of `time`, the
    /// control held at `uⁿ` on `[tₙ, tₙ₊₁)`.
    pub fn integrate<P: Potential + ?Sized>(
        &self,
        y0: &DVector<f64>,
        u: &[Field],
        potential: &P,
        time: &TimeGrid,
        substeps: usize,
    ) -> Result<GalerkinTrajectory> {
        check_series(time, u)?;
        if !u[0].grid().same_shape(&self.grid) {
            return Err(Error::ShapeMismatch("control and Galerkin basis live on different grids".into()));
        }
        if y0.len() != self.n() {
            return Err(Error::ShapeMismatch(format!("{} initial coefficients for {} modes", y0.len(), self.n())));
        }
        if substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        let n = self.n();
        let h = time.tau() / substeps as f64;
        let mut y = y0.clone();
        let mut ys = vec![y.clone()];
        let mut zs = vec![self.chemical_potential(&y, potential)];
        for (step, u_n) in u.iter().take(time.steps()).enumerate() {
            let forcing = self.project(u_n);
            for _ in 0..substeps {
                // Solve m − y − (h/2)F(m) = 0 for the midpoint m.
                let mut m = y.clone();
                let mut converged = false;
                for _ in 0..NEWTON_MAX_ITERS {
                    let (g_nl, jac) = self.nonlinearity(&m, potential);
                    let residual = &m - &y - self.rhs(&m, &g_nl, &forcing) * (0.5 * h);
                    let mut jm = DMatrix::<f64>::identity(n, n);
                    for i in 0..n {
                        let li = self.lambda[i];
                        jm[(i, i)] += 0.5 * h * (1.0 + li * li);
                        for l in 0..n {
                            jm[(i, l)] += 0.5 * h * li * jac[(i, l)];
                        }
                    }
                    let delta = jm.lu().solve(&residual).ok_or(Error::NewtonFailure { step })?;
                    m -= &delta;
                    if !m.iter().all(|v| v.is_finite()) {
                        return Err(Error::NewtonFailure { step });
                    }
                    if delta.norm() <= NEWTON_TOL * m.norm().max(1.0) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::NewtonFailure { step });
                }
                y = &m * 2.0 - &y;
            }
            zs.push(self.chemical_potential(&y, potential));
            ys.push(y.clone());
        }
        Ok(GalerkinTrajectory {
            system: self.clone(),
            time: *time,
            y: ys,
            z: zs,
        })
    }

    fn chemical_potential<P: Potential + ?Sized>(&self, y: &DVector<f64>, potential: &P) -> DVector<f64> {
        let (g_nl, _) = self.nonlinearity(y, potential);
        DVector::from_iterator(self.n(), (0..self.n()).map(|i| self.lambda[i] * y[i] + g_nl[i]))
    }
}

/// Coefficient trajectories `y(tₙ)`, `z(tₙ)`.
#[derive(Debug, Clone)]
pub struct GalerkinTrajectory {
    pub system: GalerkinSystem,
    pub time: TimeGrid,
    pub y: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
}

impl GalerkinTrajectory {
    pub fn phi(&self, n: usize) -> Field {
        self.system.synthesize(&self.y[n])
    }

    pub fn mu(&self, n: usize) -> Field {
        self.system.synthesize(&self.z[n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub phi_errors: Vec<f64>,
    pub mu_errors: Vec<f64>,
    pub max_phi_error: f64,
    pub max_mu_error: f64,
}

fn relative_distance(a: &Field, b: &Field) -> f64 {
    let d = a.sub(b);
    let num = d.inner(&d).sqrt();
    let den = b.inner(b).sqrt();
    if den > 1e-12 {
        num / den
    } else {
        num
    }
}

/// Per-step relative L² distances of φ and μ. Falls back to the absolute
/// distance where the reference norm vanishes.
pub fn compare_to_pde(oracle: &GalerkinTrajectory, pde: &StateTrajectory) -> Result<ComparisonReport> {
    if !oracle.system.grid().same_shape(pde.grid()) {
        return Err(Error::ShapeMismatch("oracle and solver grids differ".into()));
    }
    if oracle.y.len() != pde.phi.len() {
        return Err(Error::ShapeMismatch(format!(
            "oracle has {} snapshots, solver has {}",
            oracle.y.len(),
            pde.phi.len()
        )));
    }
    let phi_errors: Vec<f64> = (0..oracle.y.len()).map(|n| relative_distance(&oracle.phi(n), &pde.phi[n])).collect();
    let mu_errors: Vec<f64> = (0..oracle.z.len()).map(|n| relative_distance(&oracle.mu(n), &pde.mu[n])).collect();
    Ok(ComparisonReport {
        max_phi_error: phi_errors.iter().copied().fold(0.0, f64::max),
        max_mu_error: mu_errors.iter().copied().fold(0.0, f64::max),
        phi_errors,
        mu_errors,
    })
}

/// L² projection of `field` onto the span of the first `count` modes.
pub fn band_limit_projection(field: &Field, count: usize) -> Result<Field> {
    let system = GalerkinSystem::new(*field.grid(), count)?;
    Ok(system.synthesize(&system.project(field)))
}

/// Nodal field with the given coefficients on the first modes.
pub fn field_from_modes(grid: Grid, coeffs: &[f64]) -> Result<Field> {
    let system = GalerkinSystem::new(grid, coeffs.len())?;
    Ok(system.synthesize(&DVector::from_column_slice(coeffs)))
}
