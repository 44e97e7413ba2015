use std::ffi::CStr;
use std::f64::consts::TAU;
use std::ptr;

use cho_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { cho_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

struct Handles {
    grid: *mut ChoGrid,
    potential: *mut ChoPotential,
}

impl Handles {
    fn regular(n: usize) -> Self {
        let mut grid = ptr::null_mut();
        let mut potential = ptr::null_mut();
        unsafe {
            assert_eq!(cho_grid_new(n, n, TAU, TAU, &mut grid), ChoStatus::Ok);
            assert_eq!(
                cho_potential_new(ChoVariant::Regular, 0.0, 0.1, ChoRegularization::Exact, -1.0, &mut potential),
                ChoStatus::Ok
            );
        }
        Self { grid, potential }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            cho_grid_free(self.grid);
            cho_potential_free(self.potential);
        }
    }
}

#[test]
fn simulate_reports_the_mean_law() {
    let h = Handles::regular(8);
    let len = unsafe { cho_grid_len(h.grid) };
    assert_eq!(len, 64);
    let steps = 20;
    let phi0 = vec![0.0; len];
    let u = vec![2.0; len * (steps + 1)];
    let mut traj = ptr::null_mut();
    let status = unsafe {
        cho_simulate(h.grid, h.potential, phi0.as_ptr(), u.as_ptr(), 1.0, steps, 2.0, f64::INFINITY, false, &mut traj)
    };
    assert_eq!(status, ChoStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { cho_trajectory_len(traj) }, steps + 1);
    let mut phi = vec![0.0; len];
    assert_eq!(unsafe { cho_trajectory_phi(traj, steps, phi.as_mut_ptr(), len) }, ChoStatus::Ok);
    let mut expect = 0.0;
    for _ in 0..steps {
        expect = (expect + 0.05 * 2.0) / 1.05;
    }
    let mean = phi.iter().sum::<f64>() / len as f64;
    assert!((mean - expect).abs() < 1e-12, "{mean} vs {expect}");
    let mut mu = vec![0.0; len];
    assert_eq!(unsafe { cho_trajectory_mu(traj, 0, mu.as_mut_ptr(), len) }, ChoStatus::Ok);
    unsafe { cho_trajectory_free(traj) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut grid = ptr::null_mut();
    assert_eq!(unsafe { cho_grid_new(0, 4, 1.0, 1.0, &mut grid) }, ChoStatus::InvalidArgument);
    assert!(grid.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { cho_grid_new(4, 4, 1.0, 1.0, ptr::null_mut()) }, ChoStatus::NullPointer);
    assert_eq!(last_error(), "out is null");

    let h = Handles::regular(4);
    let mut traj = ptr::null_mut();
    let u = vec![3.0; 16 * 3];
    let phi0 = vec![0.0; 16];
    let status = unsafe {
        cho_simulate(h.grid, h.potential, phi0.as_ptr(), u.as_ptr(), 1.0, 2, 1.0, f64::INFINITY, false, &mut traj)
    };
    assert_eq!(status, ChoStatus::InvalidArgument, "|u| > m must be rejected: {}", last_error());
    let name = unsafe { CStr::from_ptr(cho_status_name(ChoStatus::NonFinite)) };
    assert_eq!(name.to_str().unwrap(), "NonFinite");
}

#[test]
fn incompatible_logarithmic_data_are_refused() {
    let mut grid = ptr::null_mut();
    let mut potential = ptr::null_mut();
    unsafe {
        cho_grid_new(4, 4, 1.0, 1.0, &mut grid);
        cho_potential_new(ChoVariant::Logarithmic, 2.0, 0.1, ChoRegularization::Exact, -1.0, &mut potential);
    }
    let phi0 = vec![0.95; 16];
    let u = vec![0.0; 16 * 3];
    let mut traj = ptr::null_mut();
    let status = unsafe { cho_simulate(grid, potential, phi0.as_ptr(), u.as_ptr(), 0.1, 2, 0.5, f64::INFINITY, false, &mut traj) };
    assert_eq!(status, ChoStatus::Incompatible, "{}", last_error());
    assert!(traj.is_null());
    unsafe {
        cho_grid_free(grid);
        cho_potential_free(potential);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let h = Handles::regular(6);
    let len = 36;
    let steps = 10;
    let total = len * (steps + 1);
    let phi0: Vec<f64> = (0..len).map(|i| 0.3 * ((i as f64) * 0.7).sin()).collect();
    let u: Vec<f64> = (0..total).map(|i| 0.2 * ((i as f64) * 0.13).cos()).collect();
    let dir: Vec<f64> = (0..total).map(|i| ((i as f64) * 0.37).sin()).collect();
    let alpha = [1.0, 0.5, 0.2, 0.1];
    let phi_q = vec![0.1; total];
    let mu_q = vec![-0.1; total];
    let phi_omega = vec![0.2; len];
    let eval = |u: &[f64], grad: &mut [f64]| -> f64 {
        let mut j = 0.0;
        let status = unsafe {
            cho_gradient(
                h.grid,
                h.potential,
                phi0.as_ptr(),
                u.as_ptr(),
                0.5,
                steps,
                alpha.as_ptr(),
                phi_q.as_ptr(),
                phi_omega.as_ptr(),
                mu_q.as_ptr(),
                &mut j,
                grad.as_mut_ptr(),
            )
        };
        assert_eq!(status, ChoStatus::Ok, "{}", last_error());
        j
    };
    let mut grad = vec![0.0; total];
    eval(&u, &mut grad);
    // Trapezoid weights in time, cell measure in space.
    let tau = 0.5 / steps as f64;
    let cell = (TAU / 6.0).powi(2);
    let dot: f64 = (0..=steps)
        .map(|n| {
            let w = if n == 0 || n == steps { tau / 2.0 } else { tau };
            let s: f64 = (0..len).map(|i| grad[n * len + i] * dir[n * len + i]).sum();
            w * cell * s
        })
        .sum();
    let eps = 1e-5;
    let mut scratch = vec![0.0; total];
    let plus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
    let minus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
    let fd = (eval(&plus, &mut scratch) - eval(&minus, &mut scratch)) / (2.0 * eps);
    assert!((fd - dot).abs() <= 1e-6 * dot.abs(), "fd {fd} vs adjoint {dot}");
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cho.h")).unwrap();
    for symbol in ["cho_simulate", "cho_gradient", "cho_last_error_message", "CHO_STATUS_OK", "typedef struct ChoGrid ChoGrid"] {
        assert!(header.contains(symbol), "missing {symbol}");
    }
}
