//! Tracking cost, projection onto the admissible controls and a projected
//! gradient optimizer.
//!
//! Admissible controls satisfy `‖u‖∞ ≤ M` and `‖∂ₜu‖_{L²(Q)} ≤ M′`. All
//! space–time inner products use the trapezoid rule in time and the
//! midpoint rule in space.

use rustdct::{Dct1, DctPlanner};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::{random_smooth_series, seeded};
use crate::sensitivity::{reduced_gradient, solve_adjoint, AdjointTrajectory};
use crate::spectral::{Field, Grid};
use crate::state::{
    check_series, dt_norm, series_inner, series_norm, simulate_series, validate_compatibility, ControlFunction,
    StateTrajectory, TimeGrid, DEFAULT_DELTA_MARGIN,
};

/// Weights `α₁..α₄` with targets `φ_Q`, `φ_Ω`, `μ_Q` of
///
/// ```text
/// J = α₁/2 ∫_Q |φ − φ_Q|² + α₂/2 ∫_Ω |φ(T) − φ_Ω|² + α₃/2 ∫_Q |μ − μ_Q|² + α₄/2 ∫_Q |u|²
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    alpha: [f64; 4],
    phi_q: Vec<Field>,
    phi_omega: Field,
    mu_q: Vec<Field>,
}

impl CostSpec {
    pub fn new(alpha: [f64; 4], phi_q: Vec<Field>, phi_omega: Field, mu_q: Vec<Field>) -> Result<Self> {
        if alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::Validation(format!("cost weights must be nonnegative, got {alpha:?}")));
        }
        if alpha.iter().all(|a| *a == 0.0) {
            return Err(Error::Validation("cost weights must not all vanish".into()));
        }
        if phi_q.is_empty() || phi_q.len() != mu_q.len() {
            return Err(Error::ShapeMismatch(format!(
                "target series have {} and {} slices",
                phi_q.len(),
                mu_q.len()
            )));
        }
        let grid = phi_omega.grid();
        if phi_q.iter().chain(&mu_q).any(|f| !f.grid().same_shape(grid)) {
            return Err(Error::ShapeMismatch("cost targets live on different grids".into()));
        }
        Ok(Self {
            alpha,
            phi_q,
            phi_omega,
            mu_q,
        })
    }

    pub fn zero_targets(grid: Grid, time: &TimeGrid, alpha: [f64; 4]) -> Result<Self> {
        let n = time.steps() + 1;
        Self::new(alpha, vec![Field::zeros(grid); n], Field::zeros(grid), vec![Field::zeros(grid); n])
    }

    /// Targets taken from a forward run, so that the generating control
    /// reproduces them exactly.
    pub fn from_trajectory(alpha: [f64; 4], traj: &StateTrajectory) -> Result<Self> {
        Self::new(alpha, traj.phi.clone(), traj.final_phi().clone(), traj.mu.clone())
    }

    pub fn alpha(&self) -> [f64; 4] {
        self.alpha
    }

    pub fn phi_q(&self) -> &[Field] {
        &self.phi_q
    }

    pub fn phi_omega(&self) -> &Field {
        &self.phi_omega
    }

    pub fn mu_q(&self) -> &[Field] {
        &self.mu_q
    }

    /// All weights multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            alpha: self.alpha.map(|a| a * k),
            ..self.clone()
        }
    }

    pub fn check_against(&self, traj: &StateTrajectory) -> Result<()> {
        if self.phi_q.len() != traj.phi.len() {
            return Err(Error::ShapeMismatch(format!(
                "cost targets have {} slices, trajectory has {}",
                self.phi_q.len(),
                traj.phi.len()
            )));
        }
        if !self.phi_omega.grid().same_shape(traj.grid()) {
            return Err(Error::ShapeMismatch("cost targets and trajectory live on different grids".into()));
        }
        Ok(())
    }
}

pub fn cost_j(traj: &StateTrajectory, u: &[Field], cost: &CostSpec) -> Result<f64> {
    cost.check_against(traj)?;
    check_series(&traj.time, u)?;
    if !u[0].grid().same_shape(traj.grid()) {
        return Err(Error::ShapeMismatch("control and trajectory live on different grids".into()));
    }
    let [a1, a2, a3, a4] = cost.alpha;
    let time = &traj.time;
    let mut j = 0.0;
    for n in 0..=time.steps() {
        let dphi = traj.phi[n].sub(&cost.phi_q[n]);
        let dmu = traj.mu[n].sub(&cost.mu_q[n]);
        j += 0.5 * time.weight(n) * (a1 * dphi.inner(&dphi) + a3 * dmu.inner(&dmu) + a4 * u[n].inner(&u[n]));
    }
    let dend = traj.final_phi().sub(&cost.phi_omega);
    Ok(j + 0.5 * a2 * dend.inner(&dend))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Sufficient-decrease constant in (0, 1).
    pub armijo_c: f64,
    /// Step reduction factor in (0, 1).
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
    /// Converged once `‖u − P(u − g)‖ ≤ stationarity_tol·(1 + ‖g‖)`.
    pub stationarity_tol: f64,
    pub dykstra_iters: usize,
    pub seed: u64,
    pub override_compatibility: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            initial_step: 1.0,
            stationarity_tol: 1e-6,
            dykstra_iters: 50,
            seed: 0,
            override_compatibility: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.armijo_c) {
            return Err(Error::Validation(format!("armijo_c = {} must lie in (0, 1)", self.armijo_c)));
        }
        if !unit(self.backtrack) {
            return Err(Error::Validation(format!("backtrack = {} must lie in (0, 1)", self.backtrack)));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 || self.dykstra_iters == 0 {
            return Err(Error::Validation("iteration counts must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.stationarity_tol > 0.0) {
            return Err(Error::Validation("initial_step and stationarity_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Per-node time series in the cosine basis `v_k(n) = cos(πkn/N)`, which
/// diagonalizes the forward-difference energy against the trapezoid weights.
struct TimeModes {
    steps: usize,
    dct: std::sync::Arc<dyn Dct1<f64>>,
    sigma: Vec<f64>,
    mass: Vec<f64>,
}

impl TimeModes {
    fn new(steps: usize) -> Self {
        let dct = DctPlanner::new().plan_dct1(steps + 1);
        let sigma = (0..=steps)
            .map(|k| 2.0 * (1.0 - (std::f64::consts::PI * k as f64 / steps as f64).cos()))
            .collect();
        let mass = (0..=steps)
            .map(|k| if k == 0 || k == steps { steps as f64 } else { 0.5 * steps as f64 })
            .collect();
        Self {
            steps,
            dct,
            sigma,
            mass,
        }
    }

    fn analyze(&self, series: &mut [f64]) {
        self.dct.process_dct1(series);
        for (a, m) in series.iter_mut().zip(&self.mass) {
            *a /= m;
        }
    }

    fn synthesize(&self, coeffs: &mut [f64]) {
        coeffs[0] *= 2.0;
        coeffs[self.steps] *= 2.0;
        self.dct.process_dct1(coeffs);
    }
}

fn to_columns(u: &[Field]) -> Vec<Vec<f64>> {
    let len = u[0].values().len();
    (0..len).map(|i| u.iter().map(|f| f.values()[i]).collect()).collect()
}

fn from_columns(grid: Grid, cols: &[Vec<f64>]) -> Vec<Field> {
    let count = cols[0].len();
    (0..count)
        .map(|n| Field::from_raw(grid, cols.iter().map(|c| c[n]).collect()))
        .collect()
}

/// Exact projection onto `‖∂ₜu‖ ≤ M′` in the L²(Q) metric.
fn project_dt_ball(time: &TimeGrid, modes: &TimeModes, u: &[Field], mprime: f64) -> Vec<Field> {
    if dt_norm(time, u) <= mprime {
        return u.to_vec();
    }
    let grid = *u[0].grid();
    let tau = time.tau();
    let h = grid.cell_measure();
    let mut cols = to_columns(u);
    for c in cols.iter_mut() {
        modes.analyze(c);
    }
    let shrink = |nu: f64, k: usize| 1.0 / (1.0 + nu * modes.sigma[k] / (tau * tau));
    let energy = |nu: f64| {
        let mut e = 0.0;
        for c in &cols {
            for (k, a) in c.iter().enumerate() {
                let b = a * shrink(nu, k);
                e += modes.sigma[k] * modes.mass[k] * b * b;
            }
        }
        (h / tau * e).sqrt()
    };
    let nu = if mprime == 0.0 {
        f64::INFINITY
    } else {
        let mut hi = tau * tau;
        while energy(hi) > mprime && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if energy(mid) > mprime {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    };
    for c in cols.iter_mut() {
        for (k, a) in c.iter_mut().enumerate() {
            *a = if nu.is_infinite() {
                if k == 0 {
                    *a
                } else {
                    0.0
                }
            } else {
                *a * shrink(nu, k)
            };
        }
        modes.synthesize(c);
    }
    from_columns(grid, &cols)
}

fn clamp_series(u: &[Field], m: f64) -> Vec<Field> {
    u.iter().map(|f| f.map(|v| v.clamp(-m, m))).collect()
}

fn sub_series(a: &[Field], b: &[Field]) -> Vec<Field> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

fn add_series(a: &[Field], b: &[Field]) -> Vec<Field> {
    a.iter().zip(b).map(|(x, y)| x.axpy(1.0, y)).collect()
}

/// Trapezoid time mean per spatial node.
fn time_mean(time: &TimeGrid, u: &[Field]) -> Field {
    let grid = *u[0].grid();
    let mut acc = Field::zeros(grid);
    for (n, f) in u.iter().enumerate() {
        acc = acc.axpy(time.weight(n), f);
    }
    acc.scale(1.0 / time.final_time())
}

/// Projection onto the admissible controls by Dykstra's alternating scheme,
/// finished by a step that enforces both bounds exactly.
pub fn project_uad(
    u_raw: &[Field],
    time: &TimeGrid,
    m: f64,
    mprime: f64,
    dykstra_iters: usize,
) -> Result<ControlFunction> {
    check_series(time, u_raw)?;
    if u_raw.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    if !(m >= 0.0 && mprime >= 0.0) {
        return Err(Error::Validation(format!("bounds must be nonnegative, got M = {m}, M' = {mprime}")));
    }
    if mprime == 0.0 {
        let c = time_mean(time, u_raw).map(|v| v.clamp(-m, m));
        return ControlFunction::new(*time, vec![c; u_raw.len()], m, mprime);
    }
    let modes = TimeModes::new(time.steps());
    let grid = *u_raw[0].grid();
    let mut x = u_raw.to_vec();
    let mut p = vec![Field::zeros(grid); x.len()];
    let mut q = p.clone();
    for _ in 0..dykstra_iters {
        let y = clamp_series(&add_series(&x, &p), m);
        p = sub_series(&add_series(&x, &p), &y);
        let next = project_dt_ball(time, &modes, &add_series(&y, &q), mprime);
        q = sub_series(&add_series(&y, &q), &next);
        let change = series_norm(time, &sub_series(&next, &x));
        x = next;
        if change <= 1e-10 {
            break;
        }
    }
    let mut x = clamp_series(&x, m);
    let d = dt_norm(time, &x);
    if d > mprime {
        let centre = time_mean(time, &x);
        let t = if d > 0.0 { mprime / d } else { 0.0 };
        x = x.iter().map(|f| centre.axpy(t, &f.sub(&centre))).collect();
    }
    ControlFunction::new(*time, x, m, mprime)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeStatus {
    Converged,
    MaxIters,
    LineSearchStall,
}

impl OptimizeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIters => "max-iters",
            Self::LineSearchStall => "line-search-stall",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iter: usize,
    pub j: f64,
    pub step: f64,
    pub stationarity: f64,
    pub feasibility_linf: f64,
    pub feasibility_h1: f64,
}

/// Reduced problem `u ↦ J(S(u), u)` for a fixed initial state.
#[derive(Debug, Clone)]
pub struct ControlProblem<P> {
    pub phi0: Field,
    pub potential: P,
    pub time: TimeGrid,
    pub cost: CostSpec,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub j: f64,
    pub trajectory: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    pub gradient: Vec<Field>,
}

impl<P: Potential> ControlProblem<P> {
    pub fn new(phi0: Field, potential: P, time: TimeGrid, cost: CostSpec) -> Result<Self> {
        if cost.phi_q().len() != time.steps() + 1 || !cost.phi_omega().grid().same_shape(phi0.grid()) {
            return Err(Error::ShapeMismatch("cost targets do not match the state grids".into()));
        }
        Ok(Self {
            phi0,
            potential,
            time,
            cost,
        })
    }

    pub fn state(&self, u: &[Field]) -> Result<StateTrajectory> {
        simulate_series(&self.phi0, &self.time, u, &self.potential)
    }

    pub fn cost(&self, u: &[Field]) -> Result<f64> {
        cost_j(&self.state(u)?, u, &self.cost)
    }

    pub fn evaluate(&self, u: &[Field]) -> Result<Evaluation> {
        let trajectory = self.state(u)?;
        let j = cost_j(&trajectory, u, &self.cost)?;
        let adjoint = solve_adjoint(&trajectory, &self.cost, &self.potential)?;
        let gradient = reduced_gradient(&self.time, &adjoint, u, &self.cost)?;
        Ok(Evaluation {
            j,
            trajectory,
            adjoint,
            gradient,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub u_star: ControlFunction,
    pub evaluation: Evaluation,
    pub history: Vec<HistoryEntry>,
    pub status: OptimizeStatus,
}

fn stationarity(
    time: &TimeGrid,
    u: &ControlFunction,
    g: &[Field],
    config: &OptimizerConfig,
) -> Result<f64> {
    let trial: Vec<Field> = u.slices().iter().zip(g).map(|(a, b)| a.sub(b)).collect();
    let projected = project_uad(&trial, time, u.m_bound(), u.mprime_bound(), config.dykstra_iters)?;
    Ok(series_norm(time, &sub_series(u.slices(), projected.slices())))
}

fn history_entry(iter: usize, j: f64, step: f64, stat: f64, u: &ControlFunction) -> HistoryEntry {
    HistoryEntry {
        iter,
        j,
        step,
        stationarity: stat,
        feasibility_linf: (u.linf() - u.m_bound()).max(0.0),
        feasibility_h1: (u.dt_norm() - u.mprime_bound()).max(0.0),
    }
}

/// Projected gradient descent with Barzilai–Borwein trial steps and
/// monotone Armijo backtracking along the projection arc.
pub fn optimize<P: Potential>(
    u0: &[Field],
    problem: &ControlProblem<P>,
    m: f64,
    mprime: f64,
    config: &OptimizerConfig,
) -> Result<OptimizeResult> {
    config.validate()?;
    let time = problem.time;
    let mut u = project_uad(u0, &time, m, mprime, config.dykstra_iters)?;
    if !config.override_compatibility {
        let report = validate_compatibility(&problem.phi0, &u, &problem.potential, DEFAULT_DELTA_MARGIN);
        if !report.pass {
            return Err(Error::Incompatible(report.details));
        }
    }
    let mut eval = problem.evaluate(u.slices())?;
    let mut stat = stationarity(&time, &u, &eval.gradient, config)?;
    let mut history = vec![history_entry(0, eval.j, 0.0, stat, &u)];
    let mut step = config.initial_step;
    let mut status = OptimizeStatus::MaxIters;
    let converged = |stat: f64, g: &[Field]| stat <= config.stationarity_tol * (1.0 + series_norm(&time, g));
    for iter in 1..=config.max_iters {
        if converged(stat, &eval.gradient) {
            status = OptimizeStatus::Converged;
            break;
        }
        let mut s = step;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial: Vec<Field> = u.slices().iter().zip(&eval.gradient).map(|(a, g)| a.axpy(-s, g)).collect();
            let cand = project_uad(&trial, &time, m, mprime, config.dykstra_iters)?;
            let d = sub_series(cand.slices(), u.slices());
            let slope = series_inner(&time, &eval.gradient, &d);
            match problem.evaluate(cand.slices()) {
                Ok(next) if next.j <= eval.j + config.armijo_c * slope => {
                    accepted = Some((cand, next, d));
                    break;
                }
                Ok(_) | Err(Error::NonFinite { .. }) => s *= config.backtrack,
                Err(e) => return Err(e),
            }
        }
        let Some((cand, next, d)) = accepted else {
            status = OptimizeStatus::LineSearchStall;
            break;
        };
        let dg = sub_series(&next.gradient, &eval.gradient);
        let sy = series_inner(&time, &d, &dg);
        let ss = series_inner(&time, &d, &d);
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (2.0 * s).min(1e10) };
        u = cand;
        eval = next;
        stat = stationarity(&time, &u, &eval.gradient, config)?;
        history.push(history_entry(iter, eval.j, s, stat, &u));
    }
    if status == OptimizeStatus::MaxIters && converged(stat, &eval.gradient) {
        status = OptimizeStatus::Converged;
    }
    Ok(OptimizeResult {
        u_star: u,
        evaluation: eval,
        history,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityReport {
    /// Most negative `⟨g, v − u*⟩` over the probes.
    pub min_value: f64,
    /// `max(1, ‖g‖)·max ‖v − u*‖` over the probes.
    pub scale: f64,
    pub probes: usize,
}

impl OptimalityReport {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.min_value / self.scale
        } else {
            0.0
        }
    }
}

/// Variational inequality `⟨p + α₄u*, v − u*⟩ ≥ 0` probed at `samples`
/// random admissible `v` and at the projected gradient point.
pub fn optimality_residual(
    u_star: &ControlFunction,
    gradient: &[Field],
    samples: usize,
    seed: u64,
    dykstra_iters: usize,
) -> Result<OptimalityReport> {
    let time = *u_star.time();
    check_series(&time, gradient)?;
    let grid = *u_star.grid();
    let (m, mprime) = (u_star.m_bound(), u_star.mprime_bound());
    let mut rng = seeded(seed);
    let mut probes = Vec::with_capacity(samples + 1);
    let trial: Vec<Field> = u_star.slices().iter().zip(gradient).map(|(a, g)| a.sub(g)).collect();
    probes.push(project_uad(&trial, &time, m, mprime, dykstra_iters)?);
    let amplitude = if m.is_finite() { 1.5 * m.max(1e-3) } else { 1.0 };
    for _ in 0..samples {
        let raw = random_smooth_series(&mut rng, grid, time.steps() + 1, 6, amplitude);
        probes.push(project_uad(&raw, &time, m, mprime, dykstra_iters)?);
    }
    let gnorm = series_norm(&time, gradient);
    let mut min_value = f64::INFINITY;
    let mut spread: f64 = 0.0;
    for v in &probes {
        let d = sub_series(v.slices(), u_star.slices());
        min_value = min_value.min(series_inner(&time, gradient, &d));
        spread = spread.max(series_norm(&time, &d));
    }
    Ok(OptimalityReport {
        min_value,
        scale: gnorm.max(1.0) * spread,
        probes: probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialSpec;
    use crate::rng::{random_band_limited, random_smooth_series};
    use crate::state::simulate_series;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(8, 8, 2.0 * PI, 2.0 * PI).unwrap()
    }

    #[test]
    fn cost_examples() {
        let g = grid();
        let time = TimeGrid::new(0.5, 10).unwrap();
        let spec = PotentialSpec::regular();
        let phi0 = Field::constant(g, 0.3);
        let u = vec![Field::constant(g, 1.0); 11];
        let traj = simulate_series(&phi0, &time, &u, &spec).unwrap();

        let perfect = CostSpec::from_trajectory([1.0, 1.0, 1.0, 0.0], &traj).unwrap();
        let zero_u = vec![Field::zeros(g); 11];
        assert_eq!(cost_j(&traj, &zero_u, &perfect).unwrap(), 0.0);

        let only_u = CostSpec::zero_targets(g, &time, [0.0, 0.0, 0.0, 1.0]).unwrap();
        let area = g.area();
        assert!((cost_j(&traj, &u, &only_u).unwrap() - area * 0.5 / 2.0).abs() < 1e-12);

        let end = CostSpec::new(
            [0.0, 1.0, 0.0, 0.0],
            vec![Field::zeros(g); 11],
            traj.final_phi().axpy(-1.0, &Field::constant(g, 2.0)),
            vec![Field::zeros(g); 11],
        )
        .unwrap();
        assert!((cost_j(&traj, &u, &end).unwrap() - 2.0 * area).abs() < 1e-10);

        assert!(CostSpec::zero_targets(g, &time, [0.0; 4]).is_err());
        assert!(CostSpec::zero_targets(g, &time, [1.0, -1.0, 0.0, 0.0]).is_err());
        let short = CostSpec::zero_targets(g, &TimeGrid::new(0.5, 5).unwrap(), [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(cost_j(&traj, &u, &short), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn projection_fixes_feasible_points() {
        let g = grid();
        let time = TimeGrid::new(1.0, 20).unwrap();
        let mut rng = seeded(3);
        let u = random_smooth_series(&mut rng, g, 21, 6, 0.5);
        let p = project_uad(&u, &time, 10.0, 100.0, 50).unwrap();
        for (a, b) in p.slices().iter().zip(&u) {
            assert!(a.sub(b).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_clamps_constant_in_time() {
        let g = grid();
        let time = TimeGrid::new(1.0, 10).unwrap();
        let u = vec![Field::constant(g, 1.5); 11];
        let p = project_uad(&u, &time, 1.0, 0.5, 50).unwrap();
        assert!(p.slices().iter().all(|f| f.values().iter().all(|v| (*v - 1.0).abs() < 1e-12)));
    }

    #[test]
    fn zero_variation_is_clamped_time_mean() {
        let g = Grid::new_1d(4, 1.0).unwrap();
        let time = TimeGrid::new(1.0, 6).unwrap();
        let mut rng = seeded(11);
        let u = random_smooth_series(&mut rng, g, 7, 4, 2.0);
        let m = 0.6;
        let p = project_uad(&u, &time, m, 0.0, 50).unwrap();
        // KKT: a constant c in [−M, M] minimizing Σ wₙ(c − uₙ)² is the
        // clamped weighted mean.
        for x in 0..g.len() {
            let mean: f64 = (0..=6).map(|n| time.weight(n) * u[n].values()[x]).sum::<f64>() / time.final_time();
            let c = mean.clamp(-m, m);
            for n in 0..=6 {
                assert!((p.slices()[n].values()[x] - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_projection_is_exact_kkt_point() {
        let g = Grid::new_1d(3, 1.0).unwrap();
        let time = TimeGrid::new(0.5, 8).unwrap();
        let mut rng = seeded(12);
        let u = random_smooth_series(&mut rng, g, 9, 3, 1.0);
        let modes = TimeModes::new(8);
        let mprime = 0.25 * dt_norm(&time, &u);
        let x = project_dt_ball(&time, &modes, &u, mprime);
        assert!((dt_norm(&time, &x) - mprime).abs() < 1e-10);
        // W(x − u) must be a nonpositive multiple of the constraint gradient
        // DᵀDx, checked through a dense least-squares fit.
        let tau = time.tau();
        let h = g.cell_measure();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut residual = Vec::new();
        for i in 0..g.len() {
            let xs: Vec<f64> = x.iter().map(|f| f.values()[i]).collect();
            let us: Vec<f64> = u.iter().map(|f| f.values()[i]).collect();
            for n in 0..=8 {
                let mut k = 0.0;
                if n > 0 {
                    k += xs[n] - xs[n - 1];
                }
                if n < 8 {
                    k -= xs[n + 1] - xs[n];
                }
                let grad = h * k / tau;
                let lhs = h * time.weight(n) * (xs[n] - us[n]);
                residual.push((lhs, grad));
                num += lhs * grad;
                den += grad * grad;
            }
        }
        let nu = -num / den;
        assert!(nu > 0.0);
        for (lhs, grad) in residual {
            assert!((lhs + nu * grad).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn projection_is_idempotent_and_nonexpansive(seed in 0u64..10_000, m in 0.1f64..1.0, mp in 0.0f64..2.0) {
            let g = Grid::new(4, 4, 1.0, 1.0).unwrap();
            let time = TimeGrid::new(1.0, 10).unwrap();
            let mut rng = seeded(seed);
            let a = random_smooth_series(&mut rng, g, 11, 4, 2.0);
            let b = random_smooth_series(&mut rng, g, 11, 4, 2.0);
            let pa = project_uad(&a, &time, m, mp, 500).unwrap();
            let pb = project_uad(&b, &time, m, mp, 500).unwrap();
            prop_assert!(pa.linf() <= m + 1e-9 && pa.dt_norm() <= mp + 1e-9);
            let again = project_uad(pa.slices(), &time, m, mp, 500).unwrap();
            prop_assert!(series_norm(&time, &sub_series(again.slices(), pa.slices())) <= 1e-10);
            let before = series_norm(&time, &sub_series(&a, &b));
            let after = series_norm(&time, &sub_series(pa.slices(), pb.slices()));
            prop_assert!(after <= before * (1.0 + 1e-6) + 1e-9);
        }
    }

    #[test]
    fn tikhonov_only_drives_control_to_zero() {
        let g = grid();
        let time = TimeGrid::new(0.2, 10).unwrap();
        let cost = CostSpec::zero_targets(g, &time, [0.0, 0.0, 0.0, 1.0]).unwrap();
        let problem = ControlProblem::new(Field::zeros(g), PotentialSpec::regular(), time, cost).unwrap();
        let mut rng = seeded(5);
        let u0 = random_smooth_series(&mut rng, g, 11, 4, 0.5);
        let out = optimize(&u0, &problem, 1e6, 1e6, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.status, OptimizeStatus::Converged);
        assert!(out.evaluation.j < 1e-12);
        assert!(out.u_star.linf() < 1e-6);
    }

    #[test]
    fn infeasible_start_is_projected_and_descent_is_monotone() {
        let g = grid();
        let time = TimeGrid::new(0.2, 10).unwrap();
        let mut rng = seeded(6);
        let spec = PotentialSpec::regular();
        let phi0 = random_band_limited(&mut rng, g, 6).scale(0.3);
        let u_true = project_uad(&random_smooth_series(&mut rng, g, 11, 4, 0.4), &time, 0.5, 1.0, 50).unwrap();
        let target = simulate_series(&phi0, &time, u_true.slices(), &spec).unwrap();
        let cost = CostSpec::from_trajectory([1.0, 1.0, 0.1, 1e-3], &target).unwrap();
        let problem = ControlProblem::new(phi0, spec, time, cost).unwrap();
        let u0 = vec![Field::constant(g, 3.0); 11];
        let config = OptimizerConfig {
            max_iters: 30,
            ..Default::default()
        };
        let out = optimize(&u0, &problem, 0.5, 1.0, &config).unwrap();
        assert_eq!(out.history[0].feasibility_linf, 0.0);
        assert!(out.history.windows(2).all(|w| w[1].j <= w[0].j));
        let j_true = problem.cost(u_true.slices()).unwrap();
        assert!(out.evaluation.j <= out.history[0].j);
        assert!(j_true >= 0.0);
    }

    #[test]
    fn optimality_residual_examples() {
        let g = grid();
        let time = TimeGrid::new(0.2, 10).unwrap();
        let u = ControlFunction::constant(g, time, 0.0, 1.0, 1.0).unwrap();
        let zero = vec![Field::zeros(g); 11];
        let r = optimality_residual(&u, &zero, 10, 1, 50).unwrap();
        assert!(r.min_value.abs() <= 1e-10);
        assert_eq!(r.probes, 11);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            armijo_c: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
