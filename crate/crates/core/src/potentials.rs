//! Double-well potentials `f = β̂ + π̂`, their regularizations and the scalar
//! inequalities used by the separation estimates.
//!
//! Splits used for the three variants:
//!
//! | variant          | β̂(r)                                  | π̂(r)          | D(β)      |
//! |------------------|----------------------------------------|---------------|-----------|
//! | regular          | r⁴/4                                   | (1 − 2r²)/4   | ℝ         |
//! | logarithmic(c₁)  | (1+r)ln(1+r) + (1−r)ln(1−r)            | −c₁r²         | (−1, 1)   |
//! | obstacle(c₂)     | indicator of [−1, 1]                   | −c₂r²         | [−1, 1]   |
//!
//! π = π̂′ is linear in every case, so `f″ = β′_reg + π′` and `f‴ = β″_reg`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Regular,
    Logarithmic { c1: f64 },
    DoubleObstacle { c2: f64 },
}

/// Which single-valued approximation of β the solvers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularization {
    /// β itself; only meaningful where β is single-valued on its domain.
    Exact,
    /// Moreau–Yosida approximation βε(r) = (r − Jε r)/ε.
    Yosida,
    /// C¹ odd continuation of the logarithmic β by its tangent at 1 − ε.
    PiecewiseLog,
}

/// Scalar nonlinearity of the state equation, as seen by the solvers.
///
/// Evaluations outside the effective domain return non-finite values; the
/// time steppers turn those into [`Error::NonFinite`].
pub trait Potential {
    /// f(r)
    fn f(&self, r: f64) -> f64;
    /// f′(r) = β(r) + π(r)
    fn df(&self, r: f64) -> f64;
    /// f″(r)
    fn d2f(&self, r: f64) -> f64;
    /// The (regularized) monotone part β.
    fn beta(&self, r: f64) -> f64;
    /// The Lipschitz perturbation π.
    fn pi(&self, r: f64) -> f64;
    /// Splitting constant S of the stabilized scheme.
    fn stabilization(&self) -> f64;
    /// Open interval containing the interior of D(β).
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub variant: Variant,
    pub eps: f64,
    pub regularization: Regularization,
    pub stabilization: f64,
}

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITERS: usize = 200;

impl PotentialSpec {
    /// Validated constructor. Pass `None` for the stabilization to use
    /// [`default_stabilization`](Self::default_stabilization).
    pub fn new(variant: Variant, eps: f64, regularization: Regularization, stabilization: Option<f64>) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Validation(format!("eps = {eps} must lie in (0,1)")));
        }
        match variant {
            Variant::Regular => {}
            Variant::Logarithmic { c1 } => {
                if !(c1 > 1.0 && c1.is_finite()) {
                    return Err(Error::Validation(format!("c1 = {c1} must exceed 1")));
                }
            }
            Variant::DoubleObstacle { c2 } => {
                if !(c2 > 0.0 && c2.is_finite()) {
                    return Err(Error::Validation(format!("c2 = {c2} must be positive")));
                }
                if regularization != Regularization::Yosida {
                    return Err(Error::Validation(
                        "the double obstacle potential is only available through its Yosida regularization".into(),
                    ));
                }
            }
        }
        if regularization == Regularization::PiecewiseLog && !matches!(variant, Variant::Logarithmic { .. }) {
            return Err(Error::Validation(
                "the piecewise regularization applies to the logarithmic potential only".into(),
            ));
        }
        let mut spec = Self {
            variant,
            eps,
            regularization,
            stabilization: 0.0,
        };
        spec.stabilization = match stabilization {
            Some(s) if s >= 0.0 && s.is_finite() => s,
            Some(s) => return Err(Error::Validation(format!("stabilization S = {s} must be nonnegative"))),
            None => spec.default_stabilization(),
        };
        Ok(spec)
    }

    pub fn regular() -> Self {
        Self::new(Variant::Regular, 0.1, Regularization::Exact, None).expect("valid regular potential")
    }

    pub fn logarithmic(c1: f64, eps: f64, regularization: Regularization) -> Result<Self> {
        Self::new(Variant::Logarithmic { c1 }, eps, regularization, None)
    }

    pub fn double_obstacle(c2: f64, eps: f64) -> Result<Self> {
        Self::new(Variant::DoubleObstacle { c2 }, eps, Regularization::Yosida, None)
    }

    pub fn with_stabilization(mut self, s: f64) -> Self {
        self.stabilization = s;
        self
    }

    /// sup |f″| over the working interval: [−1.2, 1.2] for the regular
    /// potential, the interval between the two wells for the logarithmic
    /// one, and [−1, 1] for the obstacle.
    pub fn default_stabilization(&self) -> f64 {
        match self.variant {
            Variant::Regular => 3.0 * 1.2 * 1.2 - 1.0,
            Variant::Logarithmic { c1 } => {
                let r_eq = log_well_position(c1);
                let at_well = self.beta_reg_d1(r_eq).unwrap_or(f64::INFINITY) - 2.0 * c1;
                at_well.abs().max((2.0 - 2.0 * c1).abs())
            }
            Variant::DoubleObstacle { c2 } => 2.0 * c2,
        }
    }

    /// Interior of D(β).
    pub fn beta_domain(&self) -> (f64, f64) {
        match self.variant {
            Variant::Regular => (f64::NEG_INFINITY, f64::INFINITY),
            Variant::Logarithmic { .. } | Variant::DoubleObstacle { .. } => (-1.0, 1.0),
        }
    }

    /// Minimal section β°(r) of the unregularized subdifferential.
    pub fn beta_min_section(&self, r: f64) -> Result<f64> {
        match self.variant {
            Variant::Regular => Ok(r * r * r),
            Variant::Logarithmic { .. } => log_beta(r),
            Variant::DoubleObstacle { .. } => {
                if r.abs() <= 1.0 {
                    Ok(0.0)
                } else {
                    Err(Error::DomainViolation { r })
                }
            }
        }
    }

    fn beta_exact_d1(&self, r: f64) -> Result<f64> {
        match self.variant {
            Variant::Regular => Ok(3.0 * r * r),
            Variant::Logarithmic { .. } => {
                if r.abs() < 1.0 {
                    Ok(2.0 / ((1.0 - r) * (1.0 + r)))
                } else {
                    Err(Error::DomainViolation { r })
                }
            }
            Variant::DoubleObstacle { .. } => {
                if r.abs() < 1.0 {
                    Ok(0.0)
                } else {
                    Err(Error::DomainViolation { r })
                }
            }
        }
    }

    fn beta_exact_d2(&self, r: f64) -> Result<f64> {
        match self.variant {
            Variant::Regular => Ok(6.0 * r),
            Variant::Logarithmic { .. } => {
                if r.abs() < 1.0 {
                    let d = (1.0 - r) * (1.0 + r);
                    Ok(4.0 * r / (d * d))
                } else {
                    Err(Error::DomainViolation { r })
                }
            }
            Variant::DoubleObstacle { .. } => {
                if r.abs() < 1.0 {
                    Ok(0.0)
                } else {
                    Err(Error::DomainViolation { r })
                }
            }
        }
    }

    /// β̂ with β̂(0) = 0; `+∞` outside the closed domain.
    pub fn betahat_exact(&self, r: f64) -> f64 {
        match self.variant {
            Variant::Regular => 0.25 * r.powi(4),
            Variant::Logarithmic { .. } => {
                if r.abs() > 1.0 {
                    f64::INFINITY
                } else {
                    xlogx(1.0 + r) + xlogx(1.0 - r)
                }
            }
            Variant::DoubleObstacle { .. } => {
                if r.abs() > 1.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Resolvent Jε r = (I + εβ)⁻¹ r together with β′(Jε r), which is
    /// `+∞` where the resolvent sits on the boundary of D(β).
    fn resolvent(&self, r: f64) -> Result<(f64, f64)> {
        let eps = self.eps;
        match self.variant {
            Variant::DoubleObstacle { .. } => {
                let y = r.clamp(-1.0, 1.0);
                Ok((y, if r.abs() <= 1.0 { 0.0 } else { f64::INFINITY }))
            }
            Variant::Regular => {
                // y + εy³ = r, root between 0 and r
                let (lo, hi) = if r >= 0.0 { (0.0, r) } else { (r, 0.0) };
                let y = monotone_root(r, lo, hi, |y| (y + eps * y * y * y - r, 1.0 + 3.0 * eps * y * y))?;
                Ok((y, 3.0 * y * y))
            }
            Variant::Logarithmic { .. } => {
                // y + ε ln((1+y)/(1−y)) = r, root in (−1, 1) between 0 and r
                let (lo, hi) = if r >= 0.0 { (0.0, r.min(1.0)) } else { (r.max(-1.0), 0.0) };
                let y = monotone_root(r, lo, hi, |y| {
                    if y.abs() >= 1.0 {
                        (y.signum() * f64::INFINITY, f64::INFINITY)
                    } else {
                        (
                            y + eps * (y.ln_1p() - (-y).ln_1p()) - r,
                            1.0 + eps * log_beta_d1(y),
                        )
                    }
                })?;
                let d1 = if y.abs() < 1.0 { log_beta_d1(y) } else { f64::INFINITY };
                Ok((y, d1))
            }
        }
    }

    /// Moreau–Yosida approximation βε(r), the unique s with s ∈ β(r − εs).
    pub fn beta_yosida(&self, r: f64) -> Result<f64> {
        let (y, _) = self.resolvent(r)?;
        Ok((r - y) / self.eps)
    }

    /// βε′(r) = β′(y)/(1 + εβ′(y)) with y = Jε r.
    pub fn beta_yosida_d1(&self, r: f64) -> Result<f64> {
        let (_, b) = self.resolvent(r)?;
        Ok(if b.is_finite() { b / (1.0 + self.eps * b) } else { 1.0 / self.eps })
    }

    /// βε″(r) = β″(Jε r)·((Jε)′(r))³.
    fn beta_yosida_d2(&self, r: f64) -> Result<f64> {
        let (y, b) = self.resolvent(r)?;
        if !b.is_finite() {
            return Ok(0.0);
        }
        let dy = 1.0 / (1.0 + self.eps * b);
        Ok(self.beta_exact_d2(y)? * dy * dy * dy)
    }

    /// Moreau envelope β̂ε(r) = β̂(Jε r) + ε βε(r)²/2, the primitive of βε.
    fn betahat_yosida(&self, r: f64) -> Result<f64> {
        let (y, _) = self.resolvent(r)?;
        let s = (r - y) / self.eps;
        Ok(self.betahat_exact(y) + 0.5 * self.eps * s * s)
    }

    fn require_log(&self) -> Result<()> {
        if matches!(self.variant, Variant::Logarithmic { .. }) {
            Ok(())
        } else {
            Err(Error::WrongVariant)
        }
    }

    /// Odd C¹ function equal to β on [0, 1 − ε] and affine beyond.
    pub fn beta_piecewise_log(&self, r: f64) -> Result<f64> {
        self.require_log()?;
        let knee = 1.0 - self.eps;
        let a = r.abs();
        let v = if a <= knee {
            log_beta(a)?
        } else {
            log_beta(knee)? + log_beta_d1(knee) * (a - knee)
        };
        Ok(r.signum() * v)
    }

    pub fn beta_piecewise_log_d1(&self, r: f64) -> Result<f64> {
        self.require_log()?;
        let knee = 1.0 - self.eps;
        Ok(log_beta_d1(r.abs().min(knee)))
    }

    fn beta_piecewise_log_d2(&self, r: f64) -> Result<f64> {
        self.require_log()?;
        let knee = 1.0 - self.eps;
        if r.abs() < knee {
            self.beta_exact_d2(r)
        } else {
            Ok(0.0)
        }
    }

    fn betahat_piecewise_log(&self, r: f64) -> Result<f64> {
        self.require_log()?;
        let knee = 1.0 - self.eps;
        let a = r.abs();
        if a <= knee {
            return Ok(self.betahat_exact(a));
        }
        let d = a - knee;
        Ok(self.betahat_exact(knee) + log_beta(knee)? * d + 0.5 * log_beta_d1(knee) * d * d)
    }

    /// The selected regularization of β.
    pub fn beta_reg(&self, r: f64) -> Result<f64> {
        match self.regularization {
            Regularization::Exact => self.beta_min_section(r),
            Regularization::Yosida => self.beta_yosida(r),
            Regularization::PiecewiseLog => self.beta_piecewise_log(r),
        }
    }

    pub fn beta_reg_d1(&self, r: f64) -> Result<f64> {
        match self.regularization {
            Regularization::Exact => self.beta_exact_d1(r),
            Regularization::Yosida => self.beta_yosida_d1(r),
            Regularization::PiecewiseLog => self.beta_piecewise_log_d1(r),
        }
    }

    fn beta_reg_d2(&self, r: f64) -> Result<f64> {
        match self.regularization {
            Regularization::Exact => self.beta_exact_d2(r),
            Regularization::Yosida => self.beta_yosida_d2(r),
            Regularization::PiecewiseLog => self.beta_piecewise_log_d2(r),
        }
    }

    /// Primitive of the selected β-regularization, vanishing at 0.
    pub fn betahat(&self, r: f64) -> Result<f64> {
        match self.regularization {
            Regularization::Exact => {
                let v = self.betahat_exact(r);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::DomainViolation { r })
                }
            }
            Regularization::Yosida => self.betahat_yosida(r),
            Regularization::PiecewiseLog => self.betahat_piecewise_log(r),
        }
    }

    pub fn pihat(&self, r: f64) -> f64 {
        match self.variant {
            Variant::Regular => 0.25 * (1.0 - 2.0 * r * r),
            Variant::Logarithmic { c1 } => -c1 * r * r,
            Variant::DoubleObstacle { c2 } => -c2 * r * r,
        }
    }

    pub fn pi(&self, r: f64) -> f64 {
        r * self.pi_d1()
    }

    /// π′, constant; its modulus is the Lipschitz constant of π.
    pub fn pi_d1(&self) -> f64 {
        match self.variant {
            Variant::Regular => -1.0,
            Variant::Logarithmic { c1 } => -2.0 * c1,
            Variant::DoubleObstacle { c2 } => -2.0 * c2,
        }
    }

    pub fn f_value(&self, r: f64) -> Result<f64> {
        Ok(self.betahat(r)? + self.pihat(r))
    }

    pub fn f_d1(&self, r: f64) -> Result<f64> {
        Ok(self.beta_reg(r)? + self.pi(r))
    }

    pub fn f_d2(&self, r: f64) -> Result<f64> {
        Ok(self.beta_reg_d1(r)? + self.pi_d1())
    }

    pub fn f_d3(&self, r: f64) -> Result<f64> {
        self.beta_reg_d2(r)
    }
}

impl Potential for PotentialSpec {
    fn f(&self, r: f64) -> f64 {
        self.f_value(r).unwrap_or(f64::NAN)
    }

    fn df(&self, r: f64) -> f64 {
        self.f_d1(r).unwrap_or(f64::NAN)
    }

    fn d2f(&self, r: f64) -> f64 {
        self.f_d2(r).unwrap_or(f64::NAN)
    }

    fn beta(&self, r: f64) -> f64 {
        self.beta_reg(r).unwrap_or(f64::NAN)
    }

    fn pi(&self, r: f64) -> f64 {
        PotentialSpec::pi(self, r)
    }

    fn stabilization(&self) -> f64 {
        self.stabilization
    }

    fn domain(&self) -> (f64, f64) {
        self.beta_domain()
    }
}

/// Quadratic potential `f(r) = κr²/2` with β = 0 and π(r) = κr. With κ = 0
/// the state equation is linear; used as a reference model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub curvature: f64,
    pub stabilization: f64,
}

impl Potential for Quadratic {
    fn f(&self, r: f64) -> f64 {
        0.5 * self.curvature * r * r
    }

    fn df(&self, r: f64) -> f64 {
        self.curvature * r
    }

    fn d2f(&self, _r: f64) -> f64 {
        self.curvature
    }

    fn beta(&self, _r: f64) -> f64 {
        0.0
    }

    fn pi(&self, r: f64) -> f64 {
        self.curvature * r
    }

    fn stabilization(&self) -> f64 {
        self.stabilization
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn log_beta(r: f64) -> Result<f64> {
    if r.abs() < 1.0 {
        Ok(r.ln_1p() - (-r).ln_1p())
    } else {
        Err(Error::DomainViolation { r })
    }
}

fn log_beta_d1(r: f64) -> f64 {
    2.0 / ((1.0 - r) * (1.0 + r))
}

/// Positive minimizer of the logarithmic double well, root of β(r) = 2c₁r.
pub fn log_well_position(c1: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12_f64, 1.0 - 1e-16);
    // g(r) = β(r) − 2c₁r is negative just right of 0 when c₁ > 1 and → +∞ at 1
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = mid.ln_1p() - (-mid).ln_1p() - 2.0 * c1 * mid;
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Safeguarded Newton iteration for the increasing function `g` on the
/// bracket `[lo, hi]` with `g(lo) ≤ 0 ≤ g(hi)`.
fn monotone_root(r: f64, mut lo: f64, mut hi: f64, g: impl Fn(f64) -> (f64, f64)) -> Result<f64> {
    if lo == hi {
        return Ok(lo);
    }
    // Near the ends of a logarithmic domain the slope reaches 1e12 and more,
    // so a tiny Newton step does not mean a small residual.
    let val_tol = ROOT_TOL * 1e-2 * r.abs().max(1.0);
    let mut y = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITERS {
        let (val, slope) = g(y);
        if val.abs() <= val_tol {
            return Ok(y);
        }
        if val > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok(y);
        }
        let newton = y - val / slope;
        y = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::ConvergenceFailure { r })
}

/// Largest violation of βε′(r) ≤ 2·exp(|βε(r)|) over the sample points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpBoundReport {
    pub samples: usize,
    pub max_violation: f64,
    pub worst_r: f64,
}

pub fn check_exp_derivative_bound(spec: &PotentialSpec, samples: &[f64]) -> Result<ExpBoundReport> {
    if spec.regularization != Regularization::PiecewiseLog {
        return Err(Error::WrongVariant);
    }
    let mut report = ExpBoundReport {
        samples: samples.len(),
        max_violation: f64::NEG_INFINITY,
        worst_r: f64::NAN,
    };
    for &r in samples {
        let lhs = spec.beta_piecewise_log_d1(r)?;
        let rhs = 2.0 * spec.beta_piecewise_log(r)?.abs().exp();
        let v = lhs - rhs;
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_r = r;
        }
    }
    Ok(report)
}

/// Constants of the exponential Young-type bound
/// `rs·e^{ps} ≤ ½s²e^{ps} + e^{κr} + κ′` for r, s ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungExpConstants {
    pub delta: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
}

/// δ solves δ(1 + p + δ) = ½; κ = 1/δ and κ′ = (p + δ)²/(4δ).
pub fn young_exp_constants(p: f64) -> Result<YoungExpConstants> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p = {p} must be at least 1")));
    }
    let b = 1.0 + p;
    let delta = 0.5 * (-b + (b * b + 2.0).sqrt());
    Ok(YoungExpConstants {
        delta,
        kappa: 1.0 / delta,
        kappa_prime: (p + delta) * (p + delta) / (4.0 * delta),
    })
}

impl YoungExpConstants {
    /// rhs − lhs of the inequality at (r, s); nonnegative when it holds.
    pub fn slack(&self, p: f64, r: f64, s: f64) -> f64 {
        let e = (p * s).exp();
        0.5 * s * s * e + (self.kappa * r).exp() + self.kappa_prime - r * s * e
    }
}
