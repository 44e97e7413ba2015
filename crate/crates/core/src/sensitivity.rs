//! Tangent and adjoint solvers for the discrete state scheme.
//!
//! In nodal form one step of the forward scheme is
//! `φⁿ⁺¹ = Aφⁿ + τAuⁿ − τB·g(φⁿ)` and `μⁿ⁺¹ = Lφⁿ⁺¹ + g(φⁿ)` with the
//! commuting symmetric multipliers
//!
//! ```text
//! A = D,  B = Dλ,  L = λ + S,  D = 1/(1 + τ + τλ² + τλS)
//! ```
//!
//! and `g(r) = f′(r) − Sr`. Writing `Γₙ = diag(f″(φⁿ) − S)`, the tangent is
//!
//! ```text
//! ξⁿ⁺¹ = (A − τBΓₙ)ξⁿ + τAhⁿ,    ηⁿ⁺¹ = Lξⁿ⁺¹ + Γₙξⁿ,    ξ⁰ = η⁰ = 0
//! ```
//!
//! and the adjoint below is its exact transpose, so the reduced gradient
//! agrees with the derivative of the discrete cost to rounding error.

use crate::control::CostSpec;
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::spectral::{CosineTransform, Field};
use crate::state::{check_series, StateTrajectory, TimeGrid};

/// `ξⁿ, ηⁿ`, `n = 0..=nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentTrajectory {
    pub xi: Vec<Field>,
    pub eta: Vec<Field>,
}

/// `pⁿ, qⁿ`, `n = 0..=nt`, stored in forward time order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub p: Vec<Field>,
    pub q: Vec<Field>,
}

struct LinearOps {
    transform: CosineTransform,
    tau: f64,
    s: f64,
    d: Vec<f64>,
    /// `Γₙ` for `n = 0..nt`.
    gamma: Vec<Vec<f64>>,
}

impl LinearOps {
    fn new<P: Potential + ?Sized>(base: &StateTrajectory, potential: &P) -> Self {
        let grid = *base.grid();
        let transform = CosineTransform::new(grid);
        let tau = base.time.tau();
        let s = potential.stabilization();
        let d = transform
            .eigenvalues()
            .iter()
            .map(|&l| 1.0 / (1.0 + tau + tau * l * l + tau * l * s))
            .collect();
        let gamma = base.phi[..base.time.steps()]
            .iter()
            .map(|phi| phi.values().iter().map(|&r| potential.d2f(r) - s).collect())
            .collect();
        Self {
            transform,
            tau,
            s,
            d,
            gamma,
        }
    }

    fn lambda(&self) -> &[f64] {
        self.transform.eigenvalues()
    }
}

fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn finite_or(fields: &[Field], step_of: impl Fn(usize) -> usize) -> Result<()> {
    match fields.iter().position(|f| !f.is_finite()) {
        Some(i) => Err(Error::NonFinite { step: step_of(i) }),
        None => Ok(()),
    }
}

/// Derivative of the control-to-state map at `base` in direction `h`.
pub fn solve_linearized<P: Potential + ?Sized>(
    base: &StateTrajectory,
    h: &[Field],
    potential: &P,
) -> Result<TangentTrajectory> {
    check_series(&base.time, h)?;
    if !h[0].grid().same_shape(base.grid()) {
        return Err(Error::ShapeMismatch("direction and base trajectory live on different grids".into()));
    }
    let ops = LinearOps::new(base, potential);
    let grid = *base.grid();
    let tau = ops.tau;
    let nt = base.time.steps();
    let mut xi = vec![Field::zeros(grid)];
    let mut eta = vec![Field::zeros(grid)];
    for n in 0..nt {
        let prev = xi[n].values();
        let coupling = hadamard(&ops.gamma[n], prev);
        let mut coupling_hat = coupling.clone();
        ops.transform.forward_in_place(&mut coupling_hat);
        let mut next: Vec<f64> = prev.iter().zip(h[n].values()).map(|(x, v)| x + tau * v).collect();
        ops.transform.forward_in_place(&mut next);
        for (i, c) in next.iter_mut().enumerate() {
            *c = ops.d[i] * (*c - tau * ops.lambda()[i] * coupling_hat[i]);
        }
        let mut e: Vec<f64> = next.iter().zip(ops.lambda()).map(|(c, l)| (l + ops.s) * c).collect();
        ops.transform.inverse_in_place(&mut next);
        ops.transform.inverse_in_place(&mut e);
        for (v, c) in e.iter_mut().zip(&coupling) {
            *v += c;
        }
        xi.push(Field::from_raw(grid, next));
        eta.push(Field::from_raw(grid, e));
    }
    finite_or(&xi, |i| i)?;
    finite_or(&eta, |i| i)?;
    Ok(TangentTrajectory { xi, eta })
}

/// Cost sources `aₙ = α₁wₙ(φⁿ − φ_Qⁿ) [+ α₂(φᴺ − φ_Ω)]` and
/// `bₙ = α₃wₙ(μⁿ − μ_Qⁿ)`.
pub(crate) fn cost_sources(base: &StateTrajectory, cost: &CostSpec) -> (Vec<Field>, Vec<Field>) {
    let [a1, a2, a3, _] = cost.alpha();
    let time = &base.time;
    let nt = time.steps();
    let mut a: Vec<Field> = (0..=nt)
        .map(|n| base.phi[n].sub(&cost.phi_q()[n]).scale(a1 * time.weight(n)))
        .collect();
    a[nt] = a[nt].axpy(a2, &base.phi[nt].sub(cost.phi_omega()));
    let b = (0..=nt)
        .map(|n| base.mu[n].sub(&cost.mu_q()[n]).scale(a3 * time.weight(n)))
        .collect();
    (a, b)
}

/// Transpose of the tangent map applied to the cost sources.
pub fn solve_adjoint<P: Potential + ?Sized>(
    base: &StateTrajectory,
    cost: &CostSpec,
    potential: &P,
) -> Result<AdjointTrajectory> {
    cost.check_against(base)?;
    let ops = LinearOps::new(base, potential);
    let grid = *base.grid();
    let tau = ops.tau;
    let nt = base.time.steps();
    let (a, b) = cost_sources(base, cost);
    let apply_l = |f: &Field| ops.transform.apply_multiplier(f, |l| l + ops.s);

    // λ_N = c_N, λₙ = cₙ + (A − τΓₙB)λₙ₊₁ and pⁿ = Aλₙ₊₁.
    let mut p = vec![Field::zeros(grid); nt + 1];
    let mut lam = a[nt].axpy(1.0, &apply_l(&b[nt]));
    for n in (0..nt).rev() {
        let mut a_part = lam.values().to_vec();
        ops.transform.forward_in_place(&mut a_part);
        let mut b_part: Vec<f64> = a_part.iter().zip(ops.lambda()).map(|(c, l)| l * c).collect();
        for (i, (x, y)) in a_part.iter_mut().zip(b_part.iter_mut()).enumerate() {
            *x *= ops.d[i];
            *y *= ops.d[i];
        }
        ops.transform.inverse_in_place(&mut a_part);
        ops.transform.inverse_in_place(&mut b_part);
        let pn = Field::from_raw(grid, a_part);
        if n > 0 {
            let gamma = &ops.gamma[n];
            let mut c = a[n].axpy(1.0, &apply_l(&b[n]));
            for (i, v) in c.values_mut().iter_mut().enumerate() {
                *v += gamma[i] * (b[n + 1].values()[i] - tau * b_part[i]);
            }
            lam = c.axpy(1.0, &pn);
        }
        p[n] = pn;
    }
    let [_, a2, a3, _] = cost.alpha();
    p[nt] = base.phi[nt].sub(cost.phi_omega()).scale(a2);
    let q: Vec<Field> = (0..=nt)
        .map(|n| {
            ops.transform
                .laplacian_field(&p[n])
                .scale(-1.0)
                .axpy(-a3, &base.mu[n].sub(&cost.mu_q()[n]))
        })
        .collect();
    finite_or(&p, |i| i)?;
    finite_or(&q, |i| i)?;
    Ok(AdjointTrajectory { p, q })
}

/// Gradient density of the discrete cost with respect to the trapezoid
/// L²(Q) inner product: `gⁿ = (τ/wₙ)pⁿ + α₄uⁿ` for `n < nt`, `gᴺ = α₄uᴺ`.
pub fn reduced_gradient(time: &TimeGrid, adj: &AdjointTrajectory, u: &[Field], cost: &CostSpec) -> Result<Vec<Field>> {
    check_series(time, u)?;
    check_series(time, &adj.p)?;
    let a4 = cost.alpha()[3];
    let nt = time.steps();
    Ok((0..=nt)
        .map(|n| {
            let own = u[n].scale(a4);
            if n < nt {
                own.axpy(time.tau() / time.weight(n), &adj.p[n])
            } else {
                own
            }
        })
        .collect())
}

/// Both sides of the discrete adjoint identity
/// `Σₙ ⟨aₙ, ξⁿ⟩ + ⟨bₙ, ηⁿ⟩ = Σ_{n<nt} τ⟨pⁿ, hⁿ⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointIdentity {
    pub lhs: f64,
    pub rhs: f64,
}

impl AdjointIdentity {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    /// Residual relative to `|lhs| + |rhs|`; zero when both sides vanish.
    pub fn relative(&self) -> f64 {
        let scale = self.lhs.abs() + self.rhs.abs();
        if scale == 0.0 {
            0.0
        } else {
            self.residual() / scale
        }
    }
}

pub fn adjoint_identity_residual(
    base: &StateTrajectory,
    tangent: &TangentTrajectory,
    adj: &AdjointTrajectory,
    h: &[Field],
    cost: &CostSpec,
) -> Result<AdjointIdentity> {
    cost.check_against(base)?;
    check_series(&base.time, h)?;
    let (a, b) = cost_sources(base, cost);
    let lhs = (0..a.len())
        .map(|n| a[n].inner(&tangent.xi[n]) + b[n].inner(&tangent.eta[n]))
        .sum();
    let tau = base.time.tau();
    let rhs = (0..base.time.steps()).map(|n| tau * adj.p[n].inner(&h[n])).sum();
    Ok(AdjointIdentity { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{cost_j, CostSpec};
    use crate::potentials::PotentialSpec;
    use crate::rng::{random_band_limited, random_smooth_series, seeded, SimRng};
    use crate::spectral::Grid;
    use crate::state::{series_inner, simulate_series};
    use std::f64::consts::PI;

    struct Setup {
        time: TimeGrid,
        phi0: Field,
        u: Vec<Field>,
        spec: PotentialSpec,
    }

    fn setup(rng: &mut SimRng) -> Setup {
        let grid = Grid::new(12, 12, 2.0 * PI, 2.0 * PI).unwrap();
        let time = TimeGrid::new(0.2, 20).unwrap();
        let phi0 = random_band_limited(rng, grid, 8).scale(0.4);
        let u = random_smooth_series(rng, grid, 21, 6, 0.5);
        Setup {
            time,
            phi0,
            u,
            spec: PotentialSpec::regular(),
        }
    }

    fn random_cost(rng: &mut SimRng, s: &Setup, alpha: [f64; 4]) -> CostSpec {
        let grid = *s.phi0.grid();
        let n = s.time.steps() + 1;
        CostSpec::new(
            alpha,
            random_smooth_series(rng, grid, n, 6, 0.3),
            random_band_limited(rng, grid, 6).scale(0.3),
            random_smooth_series(rng, grid, n, 6, 0.3),
        )
        .unwrap()
    }

    fn add(u: &[Field], eps: f64, h: &[Field]) -> Vec<Field> {
        u.iter().zip(h).map(|(a, b)| a.axpy(eps, b)).collect()
    }

    #[test]
    fn zero_direction_gives_zero_tangent() {
        let mut rng = seeded(1);
        let s = setup(&mut rng);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        let zero = vec![Field::zeros(*s.phi0.grid()); s.u.len()];
        let t = solve_linearized(&base, &zero, &s.spec).unwrap();
        assert!(t.xi.iter().chain(&t.eta).all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn tangent_is_linear() {
        let mut rng = seeded(2);
        let s = setup(&mut rng);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        let grid = *s.phi0.grid();
        let h1 = random_smooth_series(&mut rng, grid, 21, 6, 1.0);
        let h2 = random_smooth_series(&mut rng, grid, 21, 6, 1.0);
        let t1 = solve_linearized(&base, &h1, &s.spec).unwrap();
        let t2 = solve_linearized(&base, &h2, &s.spec).unwrap();
        let combo: Vec<Field> = h1.iter().zip(&h2).map(|(a, b)| a.scale(2.0).axpy(-3.0, b)).collect();
        let tc = solve_linearized(&base, &combo, &s.spec).unwrap();
        for n in 0..=s.time.steps() {
            let expect = t1.xi[n].scale(2.0).axpy(-3.0, &t2.xi[n]);
            assert!(tc.xi[n].sub(&expect).max_abs() <= 1e-12 * (1.0 + expect.max_abs()));
            let expect = t1.eta[n].scale(2.0).axpy(-3.0, &t2.eta[n]);
            assert!(tc.eta[n].sub(&expect).max_abs() <= 1e-12 * (1.0 + expect.max_abs()));
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let mut rng = seeded(3);
        let s = setup(&mut rng);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        let h = random_smooth_series(&mut rng, *s.phi0.grid(), 21, 6, 1.0);
        let t = solve_linearized(&base, &h, &s.spec).unwrap();
        let eps = 1e-6;
        let plus = simulate_series(&s.phi0, &s.time, &add(&s.u, eps, &h), &s.spec).unwrap();
        let minus = simulate_series(&s.phi0, &s.time, &add(&s.u, -eps, &h), &s.spec).unwrap();
        for n in 1..=s.time.steps() {
            let fd = plus.phi[n].sub(&minus.phi[n]).scale(0.5 / eps);
            assert!(fd.sub(&t.xi[n]).max_abs() < 1e-7 * (1.0 + fd.max_abs()));
            let fd = plus.mu[n].sub(&minus.mu[n]).scale(0.5 / eps);
            assert!(fd.sub(&t.eta[n]).max_abs() < 1e-6 * (1.0 + fd.max_abs()));
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let mut rng = seeded(4);
        let s = setup(&mut rng);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        for _ in 0..3 {
            let cost = random_cost(&mut rng, &s, [0.7, 1.3, 0.4, 0.1]);
            let h = random_smooth_series(&mut rng, *s.phi0.grid(), 21, 6, 1.0);
            let t = solve_linearized(&base, &h, &s.spec).unwrap();
            let adj = solve_adjoint(&base, &cost, &s.spec).unwrap();
            let id = adjoint_identity_residual(&base, &t, &adj, &h, &cost).unwrap();
            assert!(id.relative() < 1e-10, "{id:?}");
        }
    }

    #[test]
    fn adjoint_vanishes_without_tracking() {
        let mut rng = seeded(5);
        let s = setup(&mut rng);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        let grid = *s.phi0.grid();
        let cost = CostSpec::zero_targets(grid, &s.time, [0.0, 0.0, 0.0, 1.0]).unwrap();
        let adj = solve_adjoint(&base, &cost, &s.spec).unwrap();
        assert!(adj.p.iter().chain(&adj.q).all(|f| f.max_abs() == 0.0));
        let g = reduced_gradient(&s.time, &adj, &s.u, &cost).unwrap();
        for (gn, un) in g.iter().zip(&s.u) {
            assert_eq!(gn, un);
        }

        let h = random_smooth_series(&mut rng, grid, 21, 6, 1.0);
        let t = solve_linearized(&base, &h, &s.spec).unwrap();
        assert_eq!(adjoint_identity_residual(&base, &t, &adj, &h, &cost).unwrap().residual(), 0.0);

        let n = s.time.steps() + 1;
        let cost = CostSpec::new(
            [0.0, 1.0, 0.0, 0.0],
            vec![Field::zeros(grid); n],
            base.final_phi().clone(),
            vec![Field::zeros(grid); n],
        )
        .unwrap();
        let adj = solve_adjoint(&base, &cost, &s.spec).unwrap();
        assert!(adj.p.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded(6);
        let s = setup(&mut rng);
        let cost = random_cost(&mut rng, &s, [1.0, 0.5, 0.3, 0.2]);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        let adj = solve_adjoint(&base, &cost, &s.spec).unwrap();
        let g = reduced_gradient(&s.time, &adj, &s.u, &cost).unwrap();
        let j_at = |u: &[Field]| {
            let traj = simulate_series(&s.phi0, &s.time, u, &s.spec).unwrap();
            cost_j(&traj, u, &cost).unwrap()
        };
        for _ in 0..2 {
            let h = random_smooth_series(&mut rng, *s.phi0.grid(), 21, 6, 1.0);
            let exact = series_inner(&s.time, &g, &h);
            let eps = 1e-4;
            let fd = (j_at(&add(&s.u, eps, &h)) - j_at(&add(&s.u, -eps, &h))) / (2.0 * eps);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "fd {fd} adjoint {exact}");
        }
        let doubled = cost.scaled(2.0);
        let adj2 = solve_adjoint(&base, &doubled, &s.spec).unwrap();
        let g2 = reduced_gradient(&s.time, &adj2, &s.u, &doubled).unwrap();
        for (a, b) in g.iter().zip(&g2) {
            assert!(a.scale(2.0).sub(b).max_abs() < 1e-12 * (1.0 + b.max_abs()));
        }
    }

    #[test]
    fn terminal_condition_is_exact() {
        let mut rng = seeded(7);
        let s = setup(&mut rng);
        let cost = random_cost(&mut rng, &s, [0.3, 2.0, 0.1, 0.0]);
        let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec).unwrap();
        let adj = solve_adjoint(&base, &cost, &s.spec).unwrap();
        let expect = base.final_phi().sub(cost.phi_omega()).scale(2.0);
        assert_eq!(adj.p.last().unwrap(), &expect);
    }
}
