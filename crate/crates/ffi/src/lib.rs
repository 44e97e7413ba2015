//! C ABI over `cho-core`.
//!
//! Objects are opaque handles created by `cho_*_new` (or returned through an
//! out-pointer) and released with the matching `cho_*_free`. Every fallible
//! call returns a [`ChoStatus`]; on failure the message is available from
//! [`cho_last_error_message`] on the same thread. Fields cross the boundary
//! as row-major `double` arrays of length `nx * ny` (index `iy * nx + ix`),
//! and time series as `count` such arrays laid end to end.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use cho_core::control::{ControlProblem, CostSpec};
use cho_core::potentials::{PotentialSpec, Regularization, Variant};
use cho_core::spectral::{Field, Grid};
use cho_core::state::{simulate, ControlFunction, SimulateOptions, StateTrajectory, TimeGrid};
use cho_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    DomainViolation = 4,
    Incompatible = 5,
    NonFinite = 6,
    ConvergenceFailure = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoVariant {
    Regular = 0,
    Logarithmic = 1,
    DoubleObstacle = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoRegularization {
    Exact = 0,
    Yosida = 1,
    PiecewiseLog = 2,
}

/// Opaque computational grid.
pub struct ChoGrid(Grid);

/// Opaque double-well potential.
pub struct ChoPotential(PotentialSpec);

/// Opaque state trajectory (φ and μ at every time level).
pub struct ChoTrajectory(StateTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> ChoStatus {
    match err {
        Error::ShapeMismatch(_) | Error::BadModeCount { .. } => ChoStatus::ShapeMismatch,
        Error::DomainViolation { .. } | Error::NonzeroMean { .. } | Error::WrongVariant => ChoStatus::DomainViolation,
        Error::Incompatible(_) => ChoStatus::Incompatible,
        Error::NonFinite { .. } => ChoStatus::NonFinite,
        Error::ConvergenceFailure { .. } | Error::NewtonFailure { .. } => ChoStatus::ConvergenceFailure,
        Error::Io(_) | Error::Snapshot(_) => ChoStatus::Io,
        Error::InvalidGrid(_) | Error::InvalidParameter(_) | Error::Parse { .. } | Error::Validation(_) => {
            ChoStatus::InvalidArgument
        }
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (ChoStatus, String)>) -> ChoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ChoStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ChoStatus::Panic
        }
    }
}

fn core(err: Error) -> (ChoStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (ChoStatus, String) {
    (ChoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ChoStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (ChoStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (ChoStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn series(grid: Grid, data: &[f64], count: usize) -> Result<Vec<Field>, (ChoStatus, String)> {
    data.chunks_exact(grid.len())
        .take(count)
        .map(|c| Field::from_values(grid, c.to_vec()).map_err(core))
        .collect()
}

/// Copies the message of the last failed call on this thread into `buf`
/// (NUL-terminated, truncated to `len - 1` bytes) and returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cho_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Short stable name of a status code; the string is static.
#[no_mangle]
pub extern "C" fn cho_status_name(status: ChoStatus) -> *const c_char {
    let s: &'static CStr = match status {
        ChoStatus::Ok => c"Ok",
        ChoStatus::NullPointer => c"NullPointer",
        ChoStatus::InvalidArgument => c"InvalidArgument",
        ChoStatus::ShapeMismatch => c"ShapeMismatch",
        ChoStatus::DomainViolation => c"DomainViolation",
        ChoStatus::Incompatible => c"Incompatible",
        ChoStatus::NonFinite => c"NonFinite",
        ChoStatus::ConvergenceFailure => c"ConvergenceFailure",
        ChoStatus::Io => c"Io",
        ChoStatus::Panic => c"Panic",
    };
    s.as_ptr()
}

/// Creates a cell-centred `nx × ny` grid on `[0, lx] × [0, ly]`; `ny = 1`
/// gives a one-dimensional grid.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cho_grid_new(nx: usize, ny: usize, lx: f64, ly: f64, out: *mut *mut ChoGrid) -> ChoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = Grid::new(nx, ny, lx, ly).map_err(core)?;
        *out = Box::into_raw(Box::new(ChoGrid(grid)));
        Ok(())
    })
}

/// Number of cells, `nx * ny`; zero for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle from [`cho_grid_new`].
#[no_mangle]
pub unsafe extern "C" fn cho_grid_len(grid: *const ChoGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// # Safety
/// `grid` must be null or a handle from [`cho_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cho_grid_free(grid: *mut ChoGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Creates a potential. `coupling` is c₁ for the logarithmic variant and c₂
/// for the double obstacle and is ignored for the regular one. A negative
/// `stabilization` selects the default.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cho_potential_new(
    variant: ChoVariant,
    coupling: f64,
    eps: f64,
    regularization: ChoRegularization,
    stabilization: f64,
    out: *mut *mut ChoPotential,
) -> ChoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let variant = match variant {
            ChoVariant::Regular => Variant::Regular,
            ChoVariant::Logarithmic => Variant::Logarithmic { c1: coupling },
            ChoVariant::DoubleObstacle => Variant::DoubleObstacle { c2: coupling },
        };
        let regularization = match regularization {
            ChoRegularization::Exact => Regularization::Exact,
            ChoRegularization::Yosida => Regularization::Yosida,
            ChoRegularization::PiecewiseLog => Regularization::PiecewiseLog,
        };
        let stab = (stabilization >= 0.0).then_some(stabilization);
        let spec = PotentialSpec::new(variant, eps, regularization, stab).map_err(core)?;
        *out = Box::into_raw(Box::new(ChoPotential(spec)));
        Ok(())
    })
}

/// # Safety
/// `potential` must be null or a handle from [`cho_potential_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cho_potential_free(potential: *mut ChoPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Solves the state equation with `steps` uniform steps on `[0, final_time]`.
/// `u` holds `steps + 1` control slices, which must satisfy `|u| ≤ m` and the
/// time-derivative bound `mprime` (pass `INFINITY` to disable either).
/// Incompatible data are refused unless `override_compatibility` is set.
///
/// # Safety
/// `phi0` must point to `nx*ny` doubles, `u` to `(steps+1)*nx*ny` doubles,
/// the handles must be live, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cho_simulate(
    grid: *const ChoGrid,
    potential: *const ChoPotential,
    phi0: *const f64,
    u: *const f64,
    final_time: f64,
    steps: usize,
    m: f64,
    mprime: f64,
    override_compatibility: bool,
    out: *mut *mut ChoTrajectory,
) -> ChoStatus {
    guard(|| {
        let grid = handle(grid, "grid")?.0;
        let potential = &handle(potential, "potential")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let time = TimeGrid::new(final_time, steps).map_err(core)?;
        let count = steps.checked_add(1).ok_or_else(|| core(Error::InvalidParameter("steps too large".into())))?;
        let phi0 = Field::from_values(grid, input(phi0, grid.len(), "phi0")?.to_vec()).map_err(core)?;
        let u = series(grid, input(u, count * grid.len(), "u")?, count)?;
        let control = ControlFunction::new(time, u, m, mprime).map_err(core)?;
        let options = SimulateOptions {
            override_compatibility,
            ..Default::default()
        };
        let traj = simulate(&phi0, &control, potential, &options).map_err(core)?;
        *out = Box::into_raw(Box::new(ChoTrajectory(traj)));
        Ok(())
    })
}

/// Number of stored time levels (`steps + 1`); zero for a null handle.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn cho_trajectory_len(traj: *const ChoTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.phi.len())
}

unsafe fn copy_level(traj: *const ChoTrajectory, n: usize, out: *mut f64, len: usize, mu: bool) -> ChoStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.0;
        let frames = if mu { &t.mu } else { &t.phi };
        let f = frames.get(n).ok_or_else(|| {
            core(Error::InvalidParameter(format!("time level {n} out of range 0..{}", frames.len())))
        })?;
        if len != f.values().len() {
            return Err(core(Error::ShapeMismatch(format!("buffer holds {len}, field has {}", f.values().len()))));
        }
        output(out, len, "out")?.copy_from_slice(f.values());
        Ok(())
    })
}

/// Copies φ at time level `n` into `out` (exactly `len = nx*ny` doubles).
///
/// # Safety
/// `traj` must be live and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cho_trajectory_phi(traj: *const ChoTrajectory, n: usize, out: *mut f64, len: usize) -> ChoStatus {
    copy_level(traj, n, out, len, false)
}

/// Copies μ at time level `n` into `out` (exactly `len = nx*ny` doubles).
///
/// # Safety
/// `traj` must be live and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cho_trajectory_mu(traj: *const ChoTrajectory, n: usize, out: *mut f64, len: usize) -> ChoStatus {
    copy_level(traj, n, out, len, true)
}

/// # Safety
/// `traj` must be null or a trajectory handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cho_trajectory_free(traj: *mut ChoTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Evaluates the tracking cost and its reduced gradient at control `u`.
///
/// `alpha` holds the four weights; `phi_q` and `mu_q` are `(steps+1)`-slice
/// targets and `phi_omega` a single final-time target. The gradient is
/// written to `grad_out` with the layout of `u`.
///
/// # Safety
/// All array pointers must cover the lengths described above, the handles
/// must be live, and `j_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cho_gradient(
    grid: *const ChoGrid,
    potential: *const ChoPotential,
    phi0: *const f64,
    u: *const f64,
    final_time: f64,
    steps: usize,
    alpha: *const f64,
    phi_q: *const f64,
    phi_omega: *const f64,
    mu_q: *const f64,
    j_out: *mut f64,
    grad_out: *mut f64,
) -> ChoStatus {
    guard(|| {
        let grid = handle(grid, "grid")?.0;
        let potential = handle(potential, "potential")?.0.clone();
        if j_out.is_null() {
            return Err(null("j_out"));
        }
        let time = TimeGrid::new(final_time, steps).map_err(core)?;
        let count = steps.checked_add(1).ok_or_else(|| core(Error::InvalidParameter("steps too large".into())))?;
        let total = count * grid.len();
        let phi0 = Field::from_values(grid, input(phi0, grid.len(), "phi0")?.to_vec()).map_err(core)?;
        let u = series(grid, input(u, total, "u")?, count)?;
        let a = input(alpha, 4, "alpha")?;
        let cost = CostSpec::new(
            [a[0], a[1], a[2], a[3]],
            series(grid, input(phi_q, total, "phi_q")?, count)?,
            Field::from_values(grid, input(phi_omega, grid.len(), "phi_omega")?.to_vec()).map_err(core)?,
            series(grid, input(mu_q, total, "mu_q")?, count)?,
        )
        .map_err(core)?;
        let problem = ControlProblem::new(phi0, potential, time, cost).map_err(core)?;
        let eval = problem.evaluate(&u).map_err(core)?;
        let grad = output(grad_out, total, "grad_out")?;
        for (dst, g) in grad.chunks_exact_mut(grid.len()).zip(&eval.gradient) {
            dst.copy_from_slice(g.values());
        }
        *j_out = eval.j;
        Ok(())
    })
}
