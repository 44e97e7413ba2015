//! Registry of named invariant checks.
//!
//! Every check builds its own small deterministic scenario from the seed,
//! so a report can be reproduced from the check name and seed alone.

use std::f64::consts::PI;

use rand::Rng;

use crate::control::{cost_j, optimality_residual, optimize, project_uad, ControlProblem, CostSpec, OptimizerConfig};
use crate::error::Result;
use crate::galerkin::{compare_to_pde, GalerkinSystem};
use crate::potentials::{
    check_exp_derivative_bound, young_exp_constants, Potential, PotentialSpec, Quadratic, Regularization, Variant,
};
use crate::rng::{random_band_limited, random_field, random_smooth_in_range, random_smooth_series, seeded, SimRng};
use crate::sensitivity::{adjoint_identity_residual, reduced_gradient, solve_adjoint, solve_linearized};
use crate::spectral::{mean, norm_h, norm_vstar, solve_n, to_spectral, CosineTransform, Field, Grid};
use crate::state::{
    energy_balance_residual, mean_closed_form, series_inner, series_norm, simulate_series, StateTrajectory, TimeGrid,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub pass: bool,
    /// Measured quantity compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            pass: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn at_least(value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            pass: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn within(value: f64, lo: f64, hi: f64, detail: impl Into<String>) -> Self {
        Self {
            pass: (lo..=hi).contains(&value),
            value,
            threshold: hi,
            detail: format!("{} (accepted range [{lo}, {hi}])", detail.into()),
        }
    }
}

/// Comma-separated scientific formatting for a short list of errors.
struct Sci<'a>(&'a [f64]);

impl std::fmt::LowerExp for Sci<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            std::fmt::LowerExp::fmt(v, f)?;
        }
        Ok(())
    }
}

pub struct Check {
    pub name: &'static str,
    pub module: &'static str,
    pub summary: &'static str,
    run: fn(u64) -> Result<CheckOutcome>,
}

impl Check {
    pub fn run(&self, seed: u64) -> Result<CheckOutcome> {
        (self.run)(seed)
    }
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Check").field("name", &self.name).finish()
    }
}

pub static REGISTRY: &[Check] = &[
    Check { name: "spectral.parseval", module: "spectral", summary: "H norm equals the coefficient norm", run: spectral_parseval },
    Check { name: "spectral.n_symmetry", module: "spectral", summary: "inverse Laplacian is symmetric on zero-mean fields", run: spectral_n_symmetry },
    Check { name: "spectral.poincare", module: "spectral", summary: "dual norm bounded by H norm over sqrt of the first positive eigenvalue", run: spectral_poincare },
    Check { name: "spectral.laplacian_inverse", module: "spectral", summary: "Laplacian after inverse Laplacian is minus the identity", run: spectral_laplacian_inverse },
    Check { name: "potentials.monotonicity", module: "potentials", summary: "regularized beta is nondecreasing", run: potentials_monotonicity },
    Check { name: "potentials.yosida_lipschitz", module: "potentials", summary: "Yosida approximation is 1/eps-Lipschitz", run: potentials_yosida_lipschitz },
    Check { name: "potentials.sandwich", module: "potentials", summary: "Yosida values bounded by the minimal section and the primitive", run: potentials_sandwich },
    Check { name: "potentials.pi_lipschitz", module: "potentials", summary: "f'' minus beta' is bounded by the Lipschitz constant of pi", run: potentials_pi_lipschitz },
    Check { name: "potentials.exp_derivative_bound", module: "potentials", summary: "piecewise-log derivative bounded by 2 exp|beta|", run: potentials_exp_bound },
    Check { name: "potentials.young_inequality", module: "potentials", summary: "exponential Young inequality with the derived constants", run: potentials_young },
    Check { name: "state.mean_law", module: "state", summary: "discrete mean equals implicit Euler for the mean ODE", run: state_mean_law },
    Check { name: "state.mean_formula", module: "state", summary: "discrete mean converges at first order to the exact mean and stays in its hull", run: state_mean_formula },
    Check { name: "state.energy_balance", module: "state", summary: "energy balance residual is first order in tau", run: state_energy_balance },
    Check { name: "state.separation", module: "state", summary: "logarithmic solution stays away from the pure phases", run: state_separation },
    Check { name: "state.xi_bound", module: "state", summary: "sup of beta(phi) bounded by sup of phi + mu - pi(phi)", run: state_xi_bound },
    Check { name: "state.continuous_dependence", module: "state", summary: "perturbation ratio bounded and stable under refinement", run: state_continuous_dependence },
    Check { name: "galerkin.constant_mode", module: "galerkin_oracle", summary: "first Galerkin coefficient follows the mean ODE and its hull", run: galerkin_constant_mode },
    Check { name: "galerkin.refinement", module: "galerkin_oracle", summary: "oracle to solver distance decreases with more modes and smaller tau", run: galerkin_refinement },
    Check { name: "sensitivity.adjoint_exactness", module: "sensitivity", summary: "discrete adjoint identity holds to rounding", run: sensitivity_adjoint_exactness },
    Check { name: "sensitivity.tangent_linearity", module: "sensitivity", summary: "tangent map is linear", run: sensitivity_tangent_linearity },
    Check { name: "sensitivity.frechet_order", module: "sensitivity", summary: "Taylor remainder decays at second order", run: sensitivity_frechet_order },
    Check { name: "sensitivity.tangent_continuity", module: "sensitivity", summary: "tangent to direction ratio bounded and stable under refinement", run: sensitivity_tangent_continuity },
    Check { name: "sensitivity.gradient_fd", module: "sensitivity", summary: "reduced gradient agrees with central finite differences", run: sensitivity_gradient_fd },
    Check { name: "control.cost_nonnegative", module: "control", summary: "J is nonnegative and vanishes for perfect tracking", run: control_cost_nonnegative },
    Check { name: "control.projection", module: "control", summary: "projection is feasible, idempotent and nonexpansive", run: control_projection },
    Check { name: "control.monotone_descent", module: "control", summary: "accepted optimizer steps never increase J", run: control_monotone_descent },
    Check { name: "control.existence_sanity", module: "control", summary: "optimizer returns a feasible control no worse than the start", run: control_existence_sanity },
    Check { name: "control.variational_inequality", module: "control", summary: "first-order condition holds at the computed optimum", run: control_variational_inequality },
];

pub fn find(name: &str) -> Option<&'static Check> {
    REGISTRY.iter().find(|c| c.name == name)
}

fn square(n: usize) -> Grid {
    Grid::new(n, n, 2.0 * PI, 2.0 * PI).expect("valid grid")
}

fn zero_mean(f: Field) -> Field {
    let m = mean(&f);
    f.map(|v| v - m)
}

fn spectral_parseval(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = Grid::new(12, 10, 3.0, 2.0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = random_field(&mut rng, grid);
        let h2 = f.inner(&f);
        let c2: f64 = to_spectral(&f).coeffs().iter().map(|c| c * c).sum();
        worst = worst.max((h2 - c2).abs() / h2);
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max relative Parseval defect over 20 random fields"))
}

fn spectral_n_symmetry(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = Grid::new(12, 10, 3.0, 2.0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = zero_mean(random_field(&mut rng, grid));
        let g = zero_mean(random_field(&mut rng, grid));
        let a = f.inner(&solve_n(&g)?);
        let b = g.inner(&solve_n(&f)?);
        worst = worst.max((a - b).abs() / (a.abs() + b.abs()).max(f64::MIN_POSITIVE));
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max relative asymmetry of <f, Ng>"))
}

fn spectral_poincare(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = Grid::new(12, 10, 3.0, 2.0)?;
    let c = 1.0 / grid.lambda_min_positive().sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = zero_mean(random_field(&mut rng, grid));
        worst = worst.max(norm_vstar(&f) / (c * norm_h(&f)));
    }
    Ok(CheckOutcome::at_most(worst, 1.0 + 1e-12, "max of |f|_V* / (C |f|_H)"))
}

fn spectral_laplacian_inverse(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = Grid::new(12, 10, 3.0, 2.0)?;
    let t = CosineTransform::new(grid);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = zero_mean(random_field(&mut rng, grid));
        let back = t.laplacian_field(&t.solve_n(&f)?);
        worst = worst.max(back.axpy(1.0, &f).max_abs());
    }
    Ok(CheckOutcome::at_most(worst, 1e-10, "max nodal defect of Laplacian(N f) + f"))
}

/// Regularized potentials exercised by the scalar checks.
fn regularized_specs() -> Result<Vec<PotentialSpec>> {
    Ok(vec![
        PotentialSpec::new(Variant::Regular, 0.1, Regularization::Yosida, None)?,
        PotentialSpec::logarithmic(2.0, 0.05, Regularization::Yosida)?,
        PotentialSpec::logarithmic(2.0, 1e-3, Regularization::PiecewiseLog)?,
        PotentialSpec::double_obstacle(1.0, 0.1)?,
    ])
}

fn yosida_specs() -> Result<Vec<PotentialSpec>> {
    Ok(vec![
        PotentialSpec::new(Variant::Regular, 0.1, Regularization::Yosida, None)?,
        PotentialSpec::logarithmic(2.0, 0.05, Regularization::Yosida)?,
        PotentialSpec::logarithmic(1.5, 0.5, Regularization::Yosida)?,
        PotentialSpec::double_obstacle(1.0, 0.1)?,
    ])
}

fn potentials_monotonicity(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for spec in regularized_specs()? {
        for _ in 0..10_000 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-3.0..3.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (blo, bhi) = (spec.beta_reg(lo)?, spec.beta_reg(hi)?);
            worst = worst.max((blo - bhi) / (1.0 + bhi.abs()));
        }
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max relative decrease of beta over 4x10^4 ordered pairs"))
}

fn potentials_yosida_lipschitz(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for spec in yosida_specs()? {
        for _ in 0..10_000 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-3.0..3.0);
            let lhs = (spec.beta_yosida(a)? - spec.beta_yosida(b)?).abs();
            let rhs = (a - b).abs() / spec.eps;
            worst = worst.max((lhs - rhs) / (1.0 + rhs));
        }
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max relative excess over the 1/eps Lipschitz bound"))
}

fn potentials_sandwich(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for spec in yosida_specs()? {
        let (a, b) = spec.beta_domain();
        let (lo, hi) = (a.max(-3.0), b.min(3.0));
        for _ in 0..10_000 {
            let r = rng.gen_range(lo..=hi);
            if r <= a || r >= b {
                continue;
            }
            let be = spec.beta_yosida(r)?.abs();
            let b0 = spec.beta_min_section(r)?.abs();
            let he = spec.betahat(r)?;
            let h0 = spec.betahat_exact(r);
            let tol = 1.0 + b0.max(h0);
            worst = worst.max((be - b0) / tol).max(-he / tol).max((he - h0) / tol);
        }
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max relative violation of |beta_eps| <= |beta°| and 0 <= betahat_eps <= betahat"))
}

fn potentials_pi_lipschitz(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for spec in regularized_specs()? {
        let lip = spec.pi_d1().abs();
        for _ in 0..10_000 {
            let r: f64 = rng.gen_range(-3.0..3.0);
            let d = (spec.f_d2(r)? - spec.beta_reg_d1(r)?).abs();
            worst = worst.max(d - lip);
        }
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max of |f'' - beta'| minus the declared Lipschitz constant"))
}

fn potentials_exp_bound(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for eps in [1e-4, 1e-2, 0.3] {
        let spec = PotentialSpec::logarithmic(2.0, eps, Regularization::PiecewiseLog)?;
        let samples: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-3.0..3.0)).collect();
        worst = worst.max(check_exp_derivative_bound(&spec, &samples)?.max_violation);
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max violation of beta_eps' <= 2 exp|beta_eps| over 3x10^4 samples"))
}

fn potentials_young(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for p in [1.0, 2.0, 3.0, 5.0] {
        let c = young_exp_constants(p)?;
        for _ in 0..10_000 {
            let r: f64 = rng.gen_range(0.0..4.0);
            let s: f64 = rng.gen_range(0.0..4.0);
            let scale = 0.5 * s * s * (p * s).exp() + (c.kappa * r).exp() + c.kappa_prime;
            worst = worst.max(-c.slack(p, r, s) / scale);
        }
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max relative violation over 4x10^4 (r, s) samples"))
}

struct RegularRun {
    time: TimeGrid,
    phi0: Field,
    u: Vec<Field>,
    traj: StateTrajectory,
}

fn regular_run(rng: &mut SimRng, n: usize, final_time: f64, steps: usize) -> Result<RegularRun> {
    let grid = square(n);
    let time = TimeGrid::new(final_time, steps)?;
    let phi0 = random_band_limited(rng, grid, 10).scale(0.3).map(|v| v + 0.1);
    let u = random_smooth_series(rng, grid, steps + 1, 6, 0.8);
    let traj = simulate_series(&phi0, &time, &u, &PotentialSpec::regular())?;
    Ok(RegularRun { time, phi0, u, traj })
}

fn state_mean_law(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let run = regular_run(&mut rng, 16, 0.5, 50)?;
    let tau = run.time.tau();
    let mut expect = mean(&run.phi0);
    let mut worst: f64 = 0.0;
    for n in 0..run.time.steps() {
        expect = (expect + tau * mean(&run.u[n])) / (1.0 + tau);
        worst = worst.max((run.traj.diagnostics[n + 1].mean - expect).abs());
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max deviation from implicit Euler mean iterates"))
}

fn state_mean_formula(seed: u64) -> Result<CheckOutcome> {
    let grid = square(8);
    let mut rng = seeded(seed);
    let phi0bar: f64 = rng.gen_range(-0.5..0.5);
    let (w, amp): (f64, f64) = (rng.gen_range(1.0..4.0), rng.gen_range(0.2..0.9));
    let errors: Vec<(f64, bool)> = [40, 80]
        .iter()
        .map(|&steps| -> Result<(f64, bool)> {
            let time = TimeGrid::new(1.0, steps)?;
            let ubar: Vec<f64> = (0..=steps).map(|n| amp * (w * time.time(n)).sin()).collect();
            let u: Vec<Field> = ubar.iter().map(|&v| Field::constant(grid, v)).collect();
            let traj = simulate_series(&Field::constant(grid, phi0bar), &time, &u, &PotentialSpec::regular())?;
            let (lo, hi) = (phi0bar.min(-amp), phi0bar.max(amp));
            let mut err: f64 = 0.0;
            let mut inside = true;
            for n in 0..=steps {
                let exact = mean_closed_form(phi0bar, &ubar, time.tau(), time.time(n));
                err = err.max((traj.diagnostics[n].mean - exact).abs());
                inside &= exact >= lo - 1e-14 && exact <= hi + 1e-14;
            }
            Ok((err, inside))
        })
        .collect::<Result<_>>()?;
    let ratio = errors[0].0 / errors[1].0;
    let mut out = CheckOutcome::within(ratio, 1.6, 2.4, "error ratio between tau and tau/2");
    if !(errors[0].1 && errors[1].1) {
        out.pass = false;
        out.detail.push_str("; exact mean left its hull");
    }
    Ok(out)
}

fn state_energy_balance(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = square(16);
    let linear = Quadratic {
        curvature: 0.0,
        stabilization: 0.0,
    };
    let phi0 = random_band_limited(&mut rng, grid, 8).scale(0.2);
    let residual = |steps: usize| -> Result<f64> {
        let time = TimeGrid::new(0.5, steps)?;
        let u = vec![Field::zeros(grid); steps + 1];
        let traj = simulate_series(&phi0, &time, &u, &linear)?;
        Ok(energy_balance_residual(&traj, &u).iter().fold(0.0_f64, |m, r| m.max(r.abs())))
    };
    let ratio = residual(50)? / residual(100)?;
    Ok(CheckOutcome::within(ratio, 1.6, 2.4, "max residual ratio between tau and tau/2"))
}

/// Logarithmic run in the separation regime: c₁ = 2, piecewise-log ε = 10⁻⁴,
/// φ₀ spanning [−0.6, 0.6], |u| ≤ 0.2, T = 0.5.
pub fn separation_run(seed: u64, n: usize, steps: usize) -> Result<(PotentialSpec, StateTrajectory)> {
    let mut rng = seeded(seed);
    let grid = square(n);
    let spec = PotentialSpec::logarithmic(2.0, 1e-4, Regularization::PiecewiseLog)?;
    let phi0 = random_smooth_in_range(&mut rng, grid, 10, -0.6, 0.6);
    let time = TimeGrid::new(0.5, steps)?;
    let u = random_smooth_series(&mut rng, grid, steps + 1, 6, 0.2);
    let control = crate::state::ControlFunction::new(time, u, 0.2, f64::INFINITY)?;
    let traj = crate::state::simulate(&phi0, &control, &spec, &Default::default())?;
    Ok((spec, traj))
}

/// Largest `max|β(φⁿ)| − max|φⁿ + μⁿ − π(φⁿ)|` over the snapshots.
pub fn xi_bound_excess(spec: &PotentialSpec, traj: &StateTrajectory) -> f64 {
    traj.phi
        .iter()
        .zip(&traj.mu)
        .map(|(phi, mu)| {
            let lhs = phi.values().iter().map(|&r| spec.beta(r).abs()).fold(0.0, f64::max);
            let rhs = phi
                .values()
                .iter()
                .zip(mu.values())
                .map(|(&r, m)| (r + m - Potential::pi(spec, r)).abs())
                .fold(0.0, f64::max);
            lhs - rhs
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn state_separation(seed: u64) -> Result<CheckOutcome> {
    let (_, traj) = separation_run(seed, 16, 100)?;
    Ok(CheckOutcome::at_most(traj.max_abs_phi(), 1.0 - 1e-3, "max |phi| over the run"))
}

fn state_xi_bound(seed: u64) -> Result<CheckOutcome> {
    let (spec, traj) = separation_run(seed, 16, 100)?;
    Ok(CheckOutcome::at_most(xi_bound_excess(&spec, &traj), 1e-8, "max over snapshots of sup|beta(phi)| - sup|phi + mu - pi(phi)|"))
}

/// `(‖φ₁−φ₂‖_{C⁰(H)} + ‖μ₁−μ₂‖_{L²(H)}) / ‖u₁−u₂‖_{L²(H)}`.
pub fn perturbation_ratio(time: &TimeGrid, a: &StateTrajectory, b: &StateTrajectory, ua: &[Field], ub: &[Field]) -> f64 {
    let dphi = a.phi.iter().zip(&b.phi).map(|(x, y)| norm_h(&x.sub(y))).fold(0.0, f64::max);
    let dmu: Vec<Field> = a.mu.iter().zip(&b.mu).map(|(x, y)| x.sub(y)).collect();
    let du: Vec<Field> = ua.iter().zip(ub).map(|(x, y)| x.sub(y)).collect();
    (dphi + series_norm(time, &dmu)) / series_norm(time, &du)
}

/// Max perturbation ratio over `pairs` random control pairs at `steps` and
/// `2·steps` time steps.
pub fn continuous_dependence_ratios(seed: u64, n: usize, steps: usize, pairs: usize) -> Result<(f64, f64)> {
    let grid = square(n);
    let spec = PotentialSpec::regular();
    let mut rng = seeded(seed);
    let phi0 = random_band_limited(&mut rng, grid, 10).scale(0.4);
    let draws: Vec<u64> = (0..pairs).map(|_| rng.gen()).collect();
    let max_ratio = |steps: usize| -> Result<f64> {
        let time = TimeGrid::new(0.5, steps)?;
        let mut worst: f64 = 0.0;
        for &d in &draws {
            let mut r = seeded(d);
            let u1 = random_smooth_series(&mut r, grid, steps + 1, 6, 0.9);
            let u2 = random_smooth_series(&mut r, grid, steps + 1, 6, 0.9);
            let a = simulate_series(&phi0, &time, &u1, &spec)?;
            let b = simulate_series(&phi0, &time, &u2, &spec)?;
            worst = worst.max(perturbation_ratio(&time, &a, &b, &u1, &u2));
        }
        Ok(worst)
    };
    Ok((max_ratio(steps)?, max_ratio(2 * steps)?))
}

fn state_continuous_dependence(seed: u64) -> Result<CheckOutcome> {
    let (coarse, fine) = continuous_dependence_ratios(seed, 8, 25, 10)?;
    let change = (coarse - fine).abs() / fine;
    let mut out = CheckOutcome::at_most(change, 0.2, format!("max ratio {coarse:.6} at tau, {fine:.6} at tau/2; relative change"));
    out.pass &= coarse.is_finite() && fine.is_finite();
    Ok(out)
}

fn galerkin_constant_mode(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = square(8);
    let system = GalerkinSystem::new(grid, 1)?;
    let time = TimeGrid::new(1.0, 20)?;
    let m = 0.8;
    let ubar: Vec<f64> = (0..=20).map(|_| rng.gen_range(-m..m)).collect();
    let u: Vec<Field> = ubar.iter().map(|&v| Field::constant(grid, v)).collect();
    let phi0 = random_band_limited(&mut rng, grid, 6).scale(0.3);
    let phi0bar = mean(&phi0);
    let traj = system.integrate(&system.project_initial(&phi0)?, &u, &PotentialSpec::regular(), &time, 200)?;
    let (lo, hi) = (phi0bar.min(-m), phi0bar.max(m));
    let mut worst: f64 = 0.0;
    let mut inside = true;
    for n in 0..=20 {
        let value = mean(&traj.phi(n));
        worst = worst.max((value - mean_closed_form(phi0bar, &ubar, time.tau(), time.time(n))).abs());
        inside &= value >= lo - 1e-12 && value <= hi + 1e-12;
    }
    let mut out = CheckOutcome::at_most(worst, 1e-8, "max deviation of the first mode from the exact mean");
    if !inside {
        out.pass = false;
        out.detail.push_str("; mean left its hull");
    }
    Ok(out)
}

fn galerkin_refinement(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = square(8);
    let spec = PotentialSpec::regular();
    let broad = random_band_limited(&mut rng, grid, 40).scale(0.05);
    let time = TimeGrid::new(0.05, 40)?;
    let zero = vec![Field::zeros(grid); 41];
    let pde = simulate_series(&broad, &time, &zero, &spec)?;
    let by_modes: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| -> Result<f64> {
            let s = GalerkinSystem::new(grid, n)?;
            let o = s.integrate(&s.project_initial(&broad)?, &zero, &spec, &time, 2)?;
            Ok(compare_to_pde(&o, &pde)?.max_phi_error)
        })
        .collect::<Result<_>>()?;
    let narrow = random_band_limited(&mut rng, grid, 6).scale(0.05);
    let s = GalerkinSystem::new(grid, 16)?;
    let by_tau: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&steps| -> Result<f64> {
            let t = TimeGrid::new(0.2, steps)?;
            let u = vec![Field::zeros(grid); steps + 1];
            let p = simulate_series(&narrow, &t, &u, &spec)?;
            let o = s.integrate(&s.project_initial(&narrow)?, &u, &spec, &t, 80 / steps)?;
            Ok(compare_to_pde(&o, &p)?.max_phi_error)
        })
        .collect::<Result<_>>()?;
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    Ok(CheckOutcome {
        pass: decreasing(&by_modes) && decreasing(&by_tau),
        value: by_tau[2],
        threshold: by_tau[0],
        detail: format!("errors by modes 4/8/16: {by_modes:.3e}; by steps 10/20/40: {by_tau:.3e}", by_modes = Sci(&by_modes), by_tau = Sci(&by_tau)),
    })
}

struct SensitivitySetup {
    time: TimeGrid,
    phi0: Field,
    u: Vec<Field>,
    spec: PotentialSpec,
}

fn sensitivity_setup(rng: &mut SimRng, n: usize, steps: usize) -> Result<SensitivitySetup> {
    let grid = square(n);
    Ok(SensitivitySetup {
        time: TimeGrid::new(0.5, steps)?,
        phi0: random_band_limited(rng, grid, 10).scale(0.5),
        u: random_smooth_series(rng, grid, steps + 1, 6, 0.5),
        spec: PotentialSpec::regular(),
    })
}

/// Random tracking cost with all four weights positive.
pub fn random_cost(rng: &mut SimRng, grid: Grid, time: &TimeGrid) -> Result<CostSpec> {
    let n = time.steps() + 1;
    let alpha = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.05..0.5), rng.gen_range(0.01..0.5)];
    CostSpec::new(
        alpha,
        random_smooth_series(rng, grid, n, 6, 0.5),
        random_band_limited(rng, grid, 6).scale(0.3),
        random_smooth_series(rng, grid, n, 6, 0.5),
    )
}

fn sensitivity_adjoint_exactness(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let s = sensitivity_setup(&mut rng, 12, 30)?;
    let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let cost = random_cost(&mut rng, *s.phi0.grid(), &s.time)?;
        let h = random_smooth_series(&mut rng, *s.phi0.grid(), s.time.steps() + 1, 6, 1.0);
        let t = solve_linearized(&base, &h, &s.spec)?;
        let adj = solve_adjoint(&base, &cost, &s.spec)?;
        worst = worst.max(adjoint_identity_residual(&base, &t, &adj, &h, &cost)?.relative());
    }
    Ok(CheckOutcome::at_most(worst, 1e-10, "max relative adjoint identity residual over 5 draws"))
}

fn sensitivity_tangent_linearity(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let s = sensitivity_setup(&mut rng, 12, 30)?;
    let grid = *s.phi0.grid();
    let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec)?;
    let h1 = random_smooth_series(&mut rng, grid, s.time.steps() + 1, 6, 1.0);
    let h2 = random_smooth_series(&mut rng, grid, s.time.steps() + 1, 6, 1.0);
    let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let combo: Vec<Field> = h1.iter().zip(&h2).map(|(x, y)| x.scale(a).axpy(b, y)).collect();
    let t1 = solve_linearized(&base, &h1, &s.spec)?;
    let t2 = solve_linearized(&base, &h2, &s.spec)?;
    let tc = solve_linearized(&base, &combo, &s.spec)?;
    let mut worst: f64 = 0.0;
    for n in 0..=s.time.steps() {
        let e = t1.xi[n].scale(a).axpy(b, &t2.xi[n]);
        worst = worst.max(tc.xi[n].sub(&e).max_abs() / (1.0 + e.max_abs()));
        let e = t1.eta[n].scale(a).axpy(b, &t2.eta[n]);
        worst = worst.max(tc.eta[n].sub(&e).max_abs() / (1.0 + e.max_abs()));
    }
    Ok(CheckOutcome::at_most(worst, 1e-12, "max superposition defect"))
}

/// Observed orders `log₂(R(λ)/R(λ/2))` of the Taylor remainder
/// `R(λ) = max_n ‖φ(u+λh) − φ(u) − λξ‖_H` for λ = 0.1, 0.05, 0.025.
pub fn taylor_orders(seed: u64, n: usize, steps: usize) -> Result<Vec<f64>> {
    let mut rng = seeded(seed);
    let s = sensitivity_setup(&mut rng, n, steps)?;
    let grid = *s.phi0.grid();
    let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec)?;
    let h = random_smooth_series(&mut rng, grid, s.time.steps() + 1, 6, 1.0);
    let t = solve_linearized(&base, &h, &s.spec)?;
    let remainders: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&l| -> Result<f64> {
            let u: Vec<Field> = s.u.iter().zip(&h).map(|(a, b)| a.axpy(l, b)).collect();
            let p = simulate_series(&s.phi0, &s.time, &u, &s.spec)?;
            Ok((0..=s.time.steps())
                .map(|n| norm_h(&p.phi[n].sub(&base.phi[n]).axpy(-l, &t.xi[n])))
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(remainders.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

fn sensitivity_frechet_order(seed: u64) -> Result<CheckOutcome> {
    let orders = taylor_orders(seed, 12, 30)?;
    let worst = orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max);
    Ok(CheckOutcome::at_most(worst, 0.2, format!("observed orders {orders:.4?}; max distance from 2")))
}

fn sensitivity_tangent_continuity(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = square(8);
    let spec = PotentialSpec::regular();
    let phi0 = random_band_limited(&mut rng, grid, 10).scale(0.5);
    let draws: Vec<u64> = (0..6).map(|_| rng.gen()).collect();
    let max_ratio = |steps: usize| -> Result<f64> {
        let time = TimeGrid::new(0.5, steps)?;
        let mut worst: f64 = 0.0;
        for &d in &draws {
            let mut r = seeded(d);
            let u = random_smooth_series(&mut r, grid, steps + 1, 6, 0.5);
            let h = random_smooth_series(&mut r, grid, steps + 1, 6, 1.0);
            let base = simulate_series(&phi0, &time, &u, &spec)?;
            let t = solve_linearized(&base, &h, &spec)?;
            let xi = t.xi.iter().map(norm_h).fold(0.0, f64::max);
            worst = worst.max((xi + series_norm(&time, &t.eta)) / series_norm(&time, &h));
        }
        Ok(worst)
    };
    let (coarse, fine) = (max_ratio(25)?, max_ratio(50)?);
    let change = (coarse - fine).abs() / fine;
    let mut out = CheckOutcome::at_most(change, 0.2, format!("max ratio {coarse:.6} at tau, {fine:.6} at tau/2; relative change"));
    out.pass &= coarse.is_finite() && fine.is_finite();
    Ok(out)
}

/// Best relative error, over steps 10⁻³..10⁻⁶, between central differences of
/// the discrete cost and the adjoint gradient, maximized over `directions`.
pub fn gradient_fd_error(seed: u64, n: usize, steps: usize, directions: usize) -> Result<f64> {
    let mut rng = seeded(seed);
    let s = sensitivity_setup(&mut rng, n, steps)?;
    let grid = *s.phi0.grid();
    let cost = random_cost(&mut rng, grid, &s.time)?;
    let base = simulate_series(&s.phi0, &s.time, &s.u, &s.spec)?;
    let adj = solve_adjoint(&base, &cost, &s.spec)?;
    let g = reduced_gradient(&s.time, &adj, &s.u, &cost)?;
    let j = |u: &[Field]| -> Result<f64> { cost_j(&simulate_series(&s.phi0, &s.time, u, &s.spec)?, u, &cost) };
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let h = random_smooth_series(&mut rng, grid, s.time.steps() + 1, 6, 1.0);
        let exact = series_inner(&s.time, &g, &h);
        let mut best = f64::INFINITY;
        for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
            let plus: Vec<Field> = s.u.iter().zip(&h).map(|(a, b)| a.axpy(eps, b)).collect();
            let minus: Vec<Field> = s.u.iter().zip(&h).map(|(a, b)| a.axpy(-eps, b)).collect();
            let fd = (j(&plus)? - j(&minus)?) / (2.0 * eps);
            best = best.min((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

fn sensitivity_gradient_fd(seed: u64) -> Result<CheckOutcome> {
    let err = gradient_fd_error(seed, 16, 50, 5)?;
    Ok(CheckOutcome::at_most(err, 1e-6, "max relative finite-difference error over 5 directions"))
}

fn control_cost_nonnegative(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let s = sensitivity_setup(&mut rng, 8, 20)?;
    let grid = *s.phi0.grid();
    let mut min_j = f64::INFINITY;
    for _ in 0..10 {
        let cost = random_cost(&mut rng, grid, &s.time)?;
        let u = random_smooth_series(&mut rng, grid, s.time.steps() + 1, 6, 1.0);
        let traj = simulate_series(&s.phi0, &s.time, &u, &s.spec)?;
        min_j = min_j.min(cost_j(&traj, &u, &cost)?);
    }
    let traj = simulate_series(&s.phi0, &s.time, &s.u, &s.spec)?;
    let perfect = CostSpec::from_trajectory([1.0, 1.0, 1.0, 0.0], &traj)?;
    let zero = cost_j(&traj, &s.u, &perfect)?;
    Ok(CheckOutcome {
        pass: min_j >= 0.0 && zero == 0.0,
        value: min_j,
        threshold: 0.0,
        detail: format!("min J over 10 random costs; J for perfect tracking = {zero:e}"),
    })
}

fn control_projection(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded(seed);
    let grid = square(6);
    let time = TimeGrid::new(1.0, 12)?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = rng.gen_range(0.1..1.0);
        let mprime = rng.gen_range(0.0..3.0);
        let a = random_smooth_series(&mut rng, grid, 13, 6, 2.0);
        let b = random_smooth_series(&mut rng, grid, 13, 6, 2.0);
        let pa = project_uad(&a, &time, m, mprime, 500)?;
        let pb = project_uad(&b, &time, m, mprime, 500)?;
        let infeasible = (pa.linf() - m).max(pa.dt_norm() - mprime).max(0.0);
        let again = project_uad(pa.slices(), &time, m, mprime, 500)?;
        let diff = |x: &[Field], y: &[Field]| series_norm(&time, &x.iter().zip(y).map(|(p, q)| p.sub(q)).collect::<Vec<_>>());
        let idem = diff(again.slices(), pa.slices());
        let expansion = (diff(pa.slices(), pb.slices()) - diff(&a, &b)).max(0.0) / diff(&a, &b);
        worst = worst.max(infeasible).max(idem).max(expansion * 1e-4);
    }
    Ok(CheckOutcome::at_most(worst, 1e-9, "max of infeasibility, idempotency defect and 1e-4 x relative expansion"))
}

/// Small inverse-crime problem: targets from a forward run with a known
/// admissible control.
pub fn inverse_crime_problem(seed: u64, n: usize, steps: usize) -> Result<(ControlProblem<PotentialSpec>, Vec<Field>, f64, f64)> {
    let mut rng = seeded(seed);
    let grid = square(n);
    let time = TimeGrid::new(0.5, steps)?;
    let spec = PotentialSpec::regular();
    let (m, mprime) = (0.5, 2.0);
    let phi0 = random_band_limited(&mut rng, grid, 10).scale(0.3);
    let u_true = project_uad(&random_smooth_series(&mut rng, grid, steps + 1, 6, 0.6), &time, m, mprime, 200)?;
    let target = simulate_series(&phi0, &time, u_true.slices(), &spec)?;
    let cost = CostSpec::from_trajectory([1.0, 1.0, 0.1, 1e-2], &target)?;
    let problem = ControlProblem::new(phi0, spec, time, cost)?;
    Ok((problem, u_true.into_slices(), m, mprime))
}

fn small_optimization(seed: u64) -> Result<(ControlProblem<PotentialSpec>, crate::control::OptimizeResult, f64)> {
    let (problem, _, m, mprime) = inverse_crime_problem(seed, 8, 20)?;
    let grid = *problem.phi0.grid();
    let u0 = vec![Field::constant(grid, 0.8); problem.time.steps() + 1];
    let j0 = problem.cost(&crate::control::project_uad(&u0, &problem.time, m, mprime, 50)?.into_slices())?;
    let config = OptimizerConfig {
        max_iters: 60,
        stationarity_tol: 1e-9,
        ..Default::default()
    };
    Ok((problem.clone(), optimize(&u0, &problem, m, mprime, &config)?, j0))
}

fn control_monotone_descent(seed: u64) -> Result<CheckOutcome> {
    let (_, out, _) = small_optimization(seed)?;
    let worst = out.history.windows(2).map(|w| w[1].j - w[0].j).fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckOutcome::at_most(worst.max(0.0), 0.0, format!("max increase of J over {} iterations", out.history.len() - 1)))
}

fn control_existence_sanity(seed: u64) -> Result<CheckOutcome> {
    let (_, out, j0) = small_optimization(seed)?;
    let u = &out.u_star;
    let feasible = u.linf() <= u.m_bound() + 1e-9 && u.dt_norm() <= u.mprime_bound() + 1e-9;
    Ok(CheckOutcome {
        pass: feasible && out.evaluation.j <= j0,
        value: out.evaluation.j,
        threshold: j0,
        detail: format!("J(u*) against J(P(u0)); feasible = {feasible}"),
    })
}

fn control_variational_inequality(seed: u64) -> Result<CheckOutcome> {
    let (_, out, _) = small_optimization(seed)?;
    let report = optimality_residual(&out.u_star, &out.evaluation.gradient, 50, seed, 200)?;
    Ok(CheckOutcome::at_least(
        report.relative(),
        -1e-6,
        format!("min <g, v - u*> / scale over {} probes (status {})", report.probes, out.status.as_str()),
    ))
}
