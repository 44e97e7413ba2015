//! Seeded random data used by the harness, the verification registry and tests.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{modes_by_eigenvalue, CosineTransform, Field, Grid, SpectralField};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent uniform values in `[-1, 1]` at every node.
pub fn random_field(rng: &mut SimRng, grid: Grid) -> Field {
    let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Field::from_raw(grid, values)
}

/// Random combination of the `modes` lowest eigenfunctions (mean mode
/// included), coefficients uniform in `[-1, 1]`.
pub fn random_band_limited(rng: &mut SimRng, grid: Grid, modes: usize) -> Field {
    let mut s = SpectralField::zeros(grid);
    for &(j, k) in modes_by_eigenvalue(&grid).iter().take(modes) {
        s.coeffs_mut()[grid.index(j, k)] = rng.gen_range(-1.0..=1.0);
    }
    CosineTransform::new(grid).from_spectral(&s)
}

/// Smooth field with values spanning exactly `[lo, hi]`: a random zero-mean
/// band-limited field mapped affinely onto the interval.
pub fn random_smooth_in_range(rng: &mut SimRng, grid: Grid, modes: usize, lo: f64, hi: f64) -> Field {
    let mut s = SpectralField::zeros(grid);
    for &(j, k) in modes_by_eigenvalue(&grid).iter().skip(1).take(modes.max(1)) {
        s.coeffs_mut()[grid.index(j, k)] = rng.gen_range(-1.0..=1.0);
    }
    let f = CosineTransform::new(grid).from_spectral(&s);
    let (fmin, fmax) = (f.min(), f.max());
    if fmax - fmin < 1e-14 {
        return Field::constant(grid, 0.5 * (lo + hi));
    }
    f.map(|v| lo + (hi - lo) * (v - fmin) / (fmax - fmin))
}

/// Space–time series of `count` smooth slices: a band-limited spatial field
/// modulated by random low-frequency time profiles.
pub fn random_smooth_series(rng: &mut SimRng, grid: Grid, count: usize, modes: usize, amplitude: f64) -> Vec<Field> {
    let a = random_band_limited(rng, grid, modes);
    let b = random_band_limited(rng, grid, modes);
    let (wa, wb): (f64, f64) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    let (pa, pb): (f64, f64) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
    let scale = amplitude / (a.max_abs() + b.max_abs()).max(1e-14);
    (0..count)
        .map(|n| {
            let s = if count > 1 { n as f64 / (count - 1) as f64 } else { 0.0 };
            let ca = (wa * s * 3.0 + pa).cos();
            let cb = (wb * s * 3.0 + pb).sin();
            a.scale(scale * ca).axpy(scale * cb, &b)
        })
        .collect()
}
