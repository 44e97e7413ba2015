//! Forward solver for the controlled Cahn–Hilliard–Oono system.
//!
//! One step of the stabilized linearly implicit scheme, mode by mode:
//!
//! ```text
//! (1 + τ + τλ² + τλS) φ̂ⁿ⁺¹ = φ̂ⁿ + τûⁿ − τλ ĝⁿ,    g = f′(φⁿ) − Sφⁿ (nodal)
//! μⁿ⁺¹ = −Δφⁿ⁺¹ + Sφⁿ⁺¹ + gⁿ
//! ```
//!
//! The constant mode (λ = 0) decouples and follows implicit Euler for
//! `φ̄′ + φ̄ = ū` exactly.

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::spectral::{mean, CosineTransform, Field, Grid};

/// Uniform time grid `tₙ = nτ`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::Validation(format!("final time T = {final_time} must be positive")));
        }
        if steps == 0 {
            return Err(Error::Validation("number of time steps must be at least 1".into()));
        }
        Ok(Self { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau()
    }

    /// Trapezoid weight of node `n`.
    pub fn weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.steps {
            0.5 * self.tau()
        } else {
            self.tau()
        }
    }

    /// Same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            final_time: self.final_time,
            steps: self.steps * factor,
        }
    }
}

/// Discrete `‖∂ₜu‖_{L²(Q)}` with forward differences.
pub fn dt_norm(time: &TimeGrid, slices: &[Field]) -> f64 {
    let tau = time.tau();
    slices
        .windows(2)
        .map(|w| {
            let d = w[1].sub(&w[0]);
            d.inner(&d) / tau
        })
        .sum::<f64>()
        .sqrt()
}

/// Discrete L²(Q) inner product: trapezoid in time, midpoint in space.
pub fn series_inner(time: &TimeGrid, a: &[Field], b: &[Field]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(n, (x, y))| time.weight(n) * x.inner(y))
        .sum()
}

pub fn series_norm(time: &TimeGrid, a: &[Field]) -> f64 {
    series_inner(time, a, a).sqrt()
}

/// A control `u⁰..u^{nt}` on the time grid together with the bounds
/// `‖u‖∞ ≤ M` and `‖∂ₜu‖_{L²(Q)} ≤ M′` it is known to satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFunction {
    time: TimeGrid,
    slices: Vec<Field>,
    m_bound: f64,
    mprime_bound: f64,
}

impl ControlFunction {
    pub fn new(time: TimeGrid, slices: Vec<Field>, m_bound: f64, mprime_bound: f64) -> Result<Self> {
        check_series(&time, &slices)?;
        if !(m_bound >= 0.0 && mprime_bound >= 0.0) {
            return Err(Error::Validation(format!(
                "control bounds must be nonnegative, got M = {m_bound}, M' = {mprime_bound}"
            )));
        }
        let linf = slices.iter().map(Field::max_abs).fold(0.0, f64::max);
        if linf > m_bound + 1e-12 {
            return Err(Error::Validation(format!("‖u‖∞ = {linf} exceeds M = {m_bound}")));
        }
        let dt = dt_norm(&time, &slices);
        if dt > mprime_bound + 1e-12 * mprime_bound.max(1.0) {
            return Err(Error::Validation(format!("‖∂ₜu‖ = {dt} exceeds M' = {mprime_bound}")));
        }
        Ok(Self {
            time,
            slices,
            m_bound,
            mprime_bound,
        })
    }

    /// Time-independent control `u ≡ c`.
    pub fn constant(grid: Grid, time: TimeGrid, c: f64, m_bound: f64, mprime_bound: f64) -> Result<Self> {
        Self::new(time, vec![Field::constant(grid, c); time.steps() + 1], m_bound, mprime_bound)
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn grid(&self) -> &Grid {
        self.slices[0].grid()
    }

    pub fn slices(&self) -> &[Field] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<Field> {
        self.slices
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn mprime_bound(&self) -> f64 {
        self.mprime_bound
    }

    pub fn linf(&self) -> f64 {
        self.slices.iter().map(Field::max_abs).fold(0.0, f64::max)
    }

    pub fn dt_norm(&self) -> f64 {
        dt_norm(&self.time, &self.slices)
    }

    pub fn means(&self) -> Vec<f64> {
        self.slices.iter().map(mean).collect()
    }
}

pub(crate) fn check_series(time: &TimeGrid, slices: &[Field]) -> Result<()> {
    if slices.len() != time.steps() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} slices for {} time steps (expected {})",
            slices.len(),
            time.steps(),
            time.steps() + 1
        )));
    }
    let grid = slices[0].grid();
    if slices.iter().any(|s| !s.grid().same_shape(grid)) {
        return Err(Error::ShapeMismatch("slices live on different grids".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub mean: f64,
    pub energy: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    pub grad_mu_norm: f64,
}

/// Snapshots `φⁿ, μⁿ`, `n = 0..=nt`, of one forward solve. The monotone part
/// of the chemical potential is implicit: `ξⁿ = β(φⁿ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub time: TimeGrid,
    pub phi: Vec<Field>,
    pub mu: Vec<Field>,
    pub diagnostics: Vec<Diagnostics>,
}

impl StateTrajectory {
    pub fn grid(&self) -> &Grid {
        self.phi[0].grid()
    }

    pub fn final_phi(&self) -> &Field {
        self.phi.last().expect("trajectory has at least one snapshot")
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.max_phi.abs().max(d.min_phi.abs())).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub pass: bool,
    /// Smallest distance of inf φ₀, sup φ₀ and φ̄₀ ± M to the boundary of D(β).
    pub margin: f64,
    pub details: String,
}

pub const DEFAULT_DELTA_MARGIN: f64 = 1e-3;

/// Checks that inf φ₀, sup φ₀ and φ̄₀ ± M lie inside D(β) with the given margin.
pub fn validate_compatibility<P: Potential + ?Sized>(
    phi0: &Field,
    u: &ControlFunction,
    potential: &P,
    delta_margin: f64,
) -> CompatibilityReport {
    let (a, b) = potential.domain();
    let bar = mean(phi0);
    let m = u.m_bound();
    let points = [
        ("inf phi0", phi0.min()),
        ("sup phi0", phi0.max()),
        ("mean(phi0) - M", bar - m),
        ("mean(phi0) + M", bar + m),
    ];
    let mut margin = f64::INFINITY;
    let mut worst = "";
    for (name, p) in points {
        let d = (p - a).min(b - p);
        if d < margin {
            margin = d;
            worst = name;
        }
    }
    let pass = margin >= delta_margin;
    let details = if margin.is_infinite() {
        "D(beta) is the whole real line".to_string()
    } else if pass {
        format!("margin {margin:.6} attained by {worst}")
    } else {
        format!("{worst} lies within {margin:.6} of the boundary of D(beta) = ({a}, {b}); required {delta_margin}")
    };
    CompatibilityReport { pass, margin, details }
}

/// One time step of the stabilized scheme, reusable across steps.
#[derive(Debug, Clone)]
pub struct StateStepper<'a, P: ?Sized> {
    potential: &'a P,
    transform: CosineTransform,
    tau: f64,
    inv_denom: Vec<f64>,
}

impl<'a, P: Potential + ?Sized> StateStepper<'a, P> {
    pub fn new(grid: Grid, potential: &'a P, tau: f64) -> Self {
        let transform = CosineTransform::new(grid);
        let s = potential.stabilization();
        let inv_denom = transform
            .eigenvalues()
            .iter()
            .map(|&l| 1.0 / (1.0 + tau + tau * l * l + tau * l * s))
            .collect();
        Self {
            potential,
            transform,
            tau,
            inv_denom,
        }
    }

    pub fn transform(&self) -> &CosineTransform {
        &self.transform
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Explicit part `g = f′(φ) − Sφ`.
    fn explicit_part(&self, phi: &Field) -> Vec<f64> {
        let s = self.potential.stabilization();
        phi.values().iter().map(|&r| self.potential.df(r) - s * r).collect()
    }

    /// Advances `(φⁿ, uⁿ)` to `(φⁿ⁺¹, μⁿ⁺¹)`; no finiteness check.
    pub fn advance(&self, phi: &Field, u: &Field) -> (Field, Field) {
        let grid = *phi.grid();
        let s = self.potential.stabilization();
        let tau = self.tau;
        let g = self.explicit_part(phi);
        let mut g_hat = g.clone();
        self.transform.forward_in_place(&mut g_hat);
        let mut rhs: Vec<f64> = phi.values().iter().zip(u.values()).map(|(p, v)| p + tau * v).collect();
        self.transform.forward_in_place(&mut rhs);
        let lambda = self.transform.eigenvalues();
        for i in 0..rhs.len() {
            rhs[i] = self.inv_denom[i] * (rhs[i] - tau * lambda[i] * g_hat[i]);
        }
        let mut mu: Vec<f64> = rhs.iter().zip(lambda).map(|(c, l)| (l + s) * c).collect();
        self.transform.inverse_in_place(&mut rhs);
        self.transform.inverse_in_place(&mut mu);
        for (m, gv) in mu.iter_mut().zip(&g) {
            *m += gv;
        }
        (Field::from_raw(grid, rhs), Field::from_raw(grid, mu))
    }

    /// Chemical potential consistent with φ: `μ = −Δφ + f′(φ)`.
    pub fn consistent_mu(&self, phi: &Field) -> Field {
        let lap = self.transform.laplacian_field(phi);
        Field::from_raw(
            *phi.grid(),
            lap.values().iter().zip(phi.values()).map(|(l, &r)| -l + self.potential.df(r)).collect(),
        )
    }

    pub fn energy(&self, phi: &Field) -> f64 {
        let h = phi.grid().cell_measure();
        0.5 * self.transform.grad_norm_sq(phi) + h * phi.values().iter().map(|&r| self.potential.f(r)).sum::<f64>()
    }

    fn diagnostics(&self, t: f64, phi: &Field, mu: &Field) -> Diagnostics {
        Diagnostics {
            t,
            mean: mean(phi),
            energy: self.energy(phi),
            min_phi: phi.min(),
            max_phi: phi.max(),
            grad_mu_norm: self.transform.grad_norm_sq(mu).sqrt(),
        }
    }
}

/// Single step from `(φⁿ, uⁿ)`.
pub fn step<P: Potential + ?Sized>(phi_n: &Field, u_n: &Field, potential: &P, tau: f64) -> Result<(Field, Field)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {tau} must be positive")));
    }
    let (phi, mu) = StateStepper::new(*phi_n.grid(), potential, tau).advance(phi_n, u_n);
    if phi.is_finite() && mu.is_finite() {
        Ok((phi, mu))
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    /// Run even if the compatibility check fails.
    pub override_compatibility: bool,
    pub delta_margin: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            override_compatibility: false,
            delta_margin: DEFAULT_DELTA_MARGIN,
        }
    }
}

pub fn simulate<P: Potential + ?Sized>(
    phi0: &Field,
    u: &ControlFunction,
    potential: &P,
    options: &SimulateOptions,
) -> Result<StateTrajectory> {
    if !phi0.grid().same_shape(u.grid()) {
        return Err(Error::ShapeMismatch("initial datum and control live on different grids".into()));
    }
    if !options.override_compatibility {
        let report = validate_compatibility(phi0, u, potential, options.delta_margin);
        if !report.pass {
            return Err(Error::Incompatible(report.details));
        }
    }
    simulate_series(phi0, u.time(), u.slices(), potential)
}

/// Forward solve for an arbitrary control series (no admissibility checks).
pub(crate) fn simulate_series<P: Potential + ?Sized>(
    phi0: &Field,
    time: &TimeGrid,
    u: &[Field],
    potential: &P,
) -> Result<StateTrajectory> {
    check_series(time, u)?;
    if !phi0.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let stepper = StateStepper::new(*phi0.grid(), potential, time.tau());
    let nt = time.steps();
    let mut phi = Vec::with_capacity(nt + 1);
    let mut mu = Vec::with_capacity(nt + 1);
    let mut diagnostics = Vec::with_capacity(nt + 1);
    let mu0 = stepper.consistent_mu(phi0);
    if !mu0.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    diagnostics.push(stepper.diagnostics(0.0, phi0, &mu0));
    phi.push(phi0.clone());
    mu.push(mu0);
    for n in 0..nt {
        let (p, m) = stepper.advance(&phi[n], &u[n]);
        if !(p.is_finite() && m.is_finite()) {
            return Err(Error::NonFinite { step: n + 1 });
        }
        let d = stepper.diagnostics(time.time(n + 1), &p, &m);
        if !d.energy.is_finite() {
            return Err(Error::NonFinite { step: n + 1 });
        }
        diagnostics.push(d);
        phi.push(p);
        mu.push(m);
    }
    Ok(StateTrajectory {
        time: *time,
        phi,
        mu,
        diagnostics,
    })
}

/// Exact solution of `φ̄′ + φ̄ = ū`, `φ̄(0) = φ̄₀`, for `ū` constant on each
/// interval `[tₙ, tₙ₊₁)` with value `ubar[n]`:
/// `φ̄(t) = e^{−t}φ̄₀ + ∫₀ᵗ e^{−(t−s)}ū(s) ds`.
pub fn mean_closed_form(phi0bar: f64, ubar: &[f64], tau: f64, t: f64) -> f64 {
    let mut value = phi0bar;
    let mut t0 = 0.0;
    let mut n = 0;
    while t0 < t {
        let dt = tau.min(t - t0);
        let ub = ubar.get(n).or(ubar.last()).copied().unwrap_or(0.0);
        let decay = (-dt).exp();
        value = decay * value + (1.0 - decay) * ub;
        t0 += dt;
        n += 1;
        if dt < tau {
            break;
        }
    }
    value
}

/// Implicit-Euler iterates of `φ̄′ + φ̄ = ū`: `(1 + τ)φ̄ⁿ⁺¹ = φ̄ⁿ + τūⁿ`.
pub fn mean_implicit_euler(phi0bar: f64, ubar: &[f64], tau: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(phi0bar);
    for n in 0..steps {
        let prev = out[n];
        out.push((prev + tau * ubar[n]) / (1.0 + tau));
    }
    out
}

/// `E(φ) = ∫ ½|∇φ|² + f(φ)`.
pub fn energy<P: Potential + ?Sized>(phi: &Field, potential: &P) -> f64 {
    let transform = CosineTransform::new(*phi.grid());
    let h = phi.grid().cell_measure();
    0.5 * transform.grad_norm_sq(phi) + h * phi.values().iter().map(|&r| potential.f(r)).sum::<f64>()
}

/// `rⁿ = (Eⁿ⁺¹ − Eⁿ)/τ + ‖∇μⁿ⁺¹‖² − ∫μⁿ⁺¹(uⁿ − φⁿ⁺¹)`, `n = 0..nt`.
pub fn energy_balance_residual(traj: &StateTrajectory, u: &[Field]) -> Vec<f64> {
    let tau = traj.time.tau();
    (0..traj.time.steps())
        .map(|n| {
            let d0 = &traj.diagnostics[n];
            let d1 = &traj.diagnostics[n + 1];
            let source = traj.mu[n + 1].inner(&u[n].sub(&traj.phi[n + 1]));
            (d1.energy - d0.energy) / tau + d1.grad_mu_norm * d1.grad_mu_norm - source
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{PotentialSpec, Quadratic, Regularization};
    use crate::rng::{random_band_limited, seeded};
    use crate::spectral::eigenfunction;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(16, 16, 2.0 * PI, 2.0 * PI).unwrap()
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        let t = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(t.tau(), 0.25);
        assert_eq!(t.weight(0), 0.125);
        assert_eq!(t.weight(2), 0.25);
    }

    #[test]
    fn control_bounds_are_enforced() {
        let t = TimeGrid::new(1.0, 4).unwrap();
        assert!(ControlFunction::constant(grid(), t, 1.5, 1.0, 0.0).is_err());
        assert!(ControlFunction::constant(grid(), t, 1.0, 1.0, 0.0).is_ok());
        let ramp: Vec<Field> = (0..5).map(|n| Field::constant(grid(), 0.1 * n as f64)).collect();
        // ∂ₜu = 0.4, ‖·‖ = 0.4·√(|Ω|·T)
        let expected = 0.4 * (4.0 * PI * PI).sqrt();
        assert!((dt_norm(&t, &ramp) - expected).abs() < 1e-12);
        assert!(ControlFunction::new(t, ramp.clone(), 1.0, expected * 0.99).is_err());
        assert!(ControlFunction::new(t, ramp, 1.0, expected).is_ok());
    }

    #[test]
    fn compatibility_examples() {
        let g = grid();
        let t = TimeGrid::new(1.0, 10).unwrap();
        let reg = PotentialSpec::regular();
        let u = ControlFunction::constant(g, t, 2.0, 100.0, 0.0).unwrap();
        assert!(validate_compatibility(&Field::constant(g, 50.0), &u, &reg, 1e-3).pass);

        let log = PotentialSpec::logarithmic(2.0, 0.1, Regularization::Exact).unwrap();
        let u2 = ControlFunction::constant(g, t, 2.0, 2.0, 0.0).unwrap();
        assert!(!validate_compatibility(&Field::zeros(g), &u2, &log, 1e-3).pass);

        let u3 = ControlFunction::constant(g, t, 0.0, 0.5, 0.0).unwrap();
        let r = validate_compatibility(&Field::constant(g, 0.2), &u3, &log, 1e-3);
        assert!(r.pass);
        assert!((r.margin - 0.3).abs() < 1e-12);
    }

    #[test]
    fn stationary_equilibrium() {
        let g = grid();
        let spec = PotentialSpec::regular();
        let (phi, mu) = step(&Field::constant(g, 1.0), &Field::constant(g, 1.0), &spec, 0.01).unwrap();
        assert!(phi.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(mu.max_abs() < 1e-13);

        let t = TimeGrid::new(0.5, 20).unwrap();
        let u = ControlFunction::constant(g, t, 1.0, 1.0, 0.0).unwrap();
        let traj = simulate(&Field::constant(g, 1.0), &u, &spec, &SimulateOptions::default()).unwrap();
        assert_eq!(traj.phi.len(), 21);
        for p in &traj.phi {
            assert!(p.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        }
        assert!(energy(&Field::constant(g, 1.0), &spec).abs() < 1e-15);
        let res = energy_balance_residual(&traj, u.slices());
        assert!(res.iter().all(|r| r.abs() < 1e-10), "{res:?}");
    }

    #[test]
    fn constant_mode_is_implicit_euler() {
        let g = grid();
        let mut rng = seeded(3);
        let phi = random_band_limited(&mut rng, g, 6).scale(0.3);
        let u = random_band_limited(&mut rng, g, 6).scale(0.3);
        let tau = 0.02;
        let (next, _) = step(&phi, &u, &PotentialSpec::regular(), tau).unwrap();
        let expected = (mean(&phi) + tau * mean(&u)) / (1.0 + tau);
        assert!((mean(&next) - expected).abs() < 1e-14);
    }

    #[test]
    fn single_mode_linear_recurrence() {
        let g = grid();
        let linear = Quadratic {
            curvature: 0.0,
            stabilization: 0.0,
        };
        let e = eigenfunction(g, 2, 1);
        let lambda = g.eigenvalue(2, 1);
        let tau = 0.05;
        let (next, _) = step(&e, &Field::zeros(g), &linear, tau).unwrap();
        let factor = 1.0 / (1.0 + tau + tau * lambda * lambda);
        assert!(next.sub(&e.scale(factor)).max_abs() < 1e-14);
    }

    #[test]
    fn remark_mean_crossing() {
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let t = TimeGrid::new(1.0, 400).unwrap();
        let u = ControlFunction::constant(g, t, 2.0, 2.0, 0.0).unwrap();
        let traj = simulate(&Field::zeros(g), &u, &PotentialSpec::regular(), &SimulateOptions::default()).unwrap();
        let n = traj.diagnostics.iter().position(|d| d.mean > 1.0).unwrap();
        let t_cross = traj.time.time(n);
        assert!((t_cross - 2f64.ln()).abs() < 0.02 * 2f64.ln());
    }

    #[test]
    fn mean_closed_form_examples() {
        let tau = 0.01;
        assert!((mean_closed_form(0.3, &[0.3; 100], tau, 0.77) - 0.3).abs() < 1e-15);
        let v = mean_closed_form(0.0, &[2.0; 100], tau, 2f64.ln());
        assert!((v - 1.0).abs() < 1e-13);
        let t = 0.63;
        assert!((mean_closed_form(0.0, &[2.0; 100], tau, t) - 2.0 * (1.0 - (-t).exp())).abs() < 1e-13);
        assert!((mean_closed_form(1.0, &[0.0; 100], tau, t) - (-t).exp()).abs() < 1e-14);
    }

    #[test]
    fn incompatible_run_is_refused() {
        let g = grid();
        let t = TimeGrid::new(1.0, 10).unwrap();
        let log = PotentialSpec::logarithmic(2.0, 0.01, Regularization::PiecewiseLog).unwrap();
        let u = ControlFunction::constant(g, t, 2.0, 2.0, 0.0).unwrap();
        let err = simulate(&Field::zeros(g), &u, &log, &SimulateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
        let forced = SimulateOptions {
            override_compatibility: true,
            ..Default::default()
        };
        assert!(simulate(&Field::zeros(g), &u, &log, &forced).is_ok());
    }

    #[test]
    fn blow_up_is_reported() {
        let g = grid();
        let t = TimeGrid::new(1.0, 5).unwrap();
        let log = PotentialSpec::logarithmic(2.0, 0.1, Regularization::Exact).unwrap();
        let u = ControlFunction::constant(g, t, 2.0, 2.0, 0.0).unwrap();
        let forced = SimulateOptions {
            override_compatibility: true,
            ..Default::default()
        };
        let err = simulate(&Field::constant(g, 0.9), &u, &log, &forced).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn energy_residual_is_first_order_for_linear_model() {
        let g = Grid::new(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let linear = Quadratic {
            curvature: 0.0,
            stabilization: 0.0,
        };
        let mut rng = seeded(5);
        let phi0 = random_band_limited(&mut rng, g, 8).scale(0.2);
        let run = |steps: usize| {
            let t = TimeGrid::new(0.5, steps).unwrap();
            let u = vec![Field::zeros(g); steps + 1];
            let traj = simulate_series(&phi0, &t, &u, &linear).unwrap();
            energy_balance_residual(&traj, &u).iter().fold(0.0_f64, |m, r| m.max(r.abs()))
        };
        let coarse = run(50);
        let fine = run(100);
        let ratio = coarse / fine;
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
    }
}
