//! Convolution operators on the periodic grid and the band-equivalence
//! checker.
//!
//! A multiplier `M` acts as `f -> inverse_fft(M * forward_fft(f))`. The same
//! operator written as a quadrature-weighted circular convolution uses the
//! kernel `K = inverse_fft(M) * (n/L)^2`, see [`Multiplier::kernel`].

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{random_band_field, BandMask, Multiplier, RandomFieldSpec};
use crate::error::{Error, Result};
use crate::rng::sub_seed;
use crate::spectral::{forward_fft, inverse_fft, l2_norm, linf_norm, RealField, SpectralField};

/// Symbol agreement threshold for "equal on the band" in double precision.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

/// Largest grid [`direct_convolve`] accepts.
pub const DIRECT_CONVOLVE_MAX_N: usize = 32;

pub fn apply_multiplier(m: &Multiplier, f: &RealField) -> Result<RealField> {
    m.grid().ensure_same(f.grid())?;
    let spec = m.apply_spectral(&forward_fft(f))?;
    inverse_fft(&spec)
}

/// Brute-force circular convolution
/// `out(r) = sum_r' kernel(r - r') f(r') (L/n)^2`.
///
/// O(n^4); only meant as an oracle for small grids.
pub fn direct_convolve(kernel: &RealField, f: &RealField) -> Result<RealField> {
    let grid = *f.grid();
    kernel.grid().ensure_same(&grid)?;
    let n = grid.n();
    if n > DIRECT_CONVOLVE_MAX_N {
        return Err(Error::config(format!(
            "direct_convolve is an oracle for n <= {DIRECT_CONVOLVE_MAX_N}, got n={n}"
        )));
    }
    let k = kernel.values();
    let v = f.values();
    let w = grid.cell_area();
    let out = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut acc = 0.0;
        for p in 0..n {
            for q in 0..n {
                acc += k[[(i + n - p) % n, (j + n - q) % n]] * v[[p, q]];
            }
        }
        acc * w
    });
    RealField::new(grid, out)
}

/// Outcome of comparing two multipliers on a band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceVerdict {
    pub band: BandMask,
    pub tolerance: f64,
    /// `max |M1 - M2|` over band lattice points.
    pub max_symbol_diff_on_band: f64,
    /// Band mode where the symbol difference peaks.
    pub worst_mode: Option<(i64, i64)>,
    pub trials: usize,
    pub max_output_diff_linf: f64,
    pub max_output_diff_l2: f64,
    /// Worst trial of `|T1 w - T2 w|_inf / |w|_inf`.
    pub max_relative_diff_linf: f64,
    /// Worst trial of `|T1 w - T2 w|_2 / |w|_2`.
    pub max_relative_diff_l2: f64,
    /// Quadrature L2 norm of the kernel difference `K1 - K2`.
    pub kernel_diff_l2: f64,
    /// Spectral response of the single-mode probe at `worst_mode`.
    pub probe_response: f64,
    pub equivalent_on_band: bool,
}

#[derive(Debug, Clone, Copy)]
struct TrialDiff {
    linf: f64,
    l2: f64,
    rel_linf: f64,
    rel_l2: f64,
}

fn trial_diff(m1: &Multiplier, m2: &Multiplier, band: BandMask, seed: u64) -> Result<TrialDiff> {
    let grid = *m1.grid();
    let (omega, _) = random_band_field(&RandomFieldSpec::unit_phase(band, seed), &grid)?;
    let diff = apply_multiplier(m1, &omega)?.sub(&apply_multiplier(m2, &omega)?)?;
    let (linf, l2) = (linf_norm(&diff), l2_norm(&diff));
    Ok(TrialDiff {
        linf,
        l2,
        rel_linf: linf / linf_norm(&omega),
        rel_l2: l2 / l2_norm(&omega),
    })
}

/// Spectral magnitude at `(kx, ky)` of `T1 w - T2 w` for the probe whose
/// spectrum is 1 at `k` and `-k` and zero elsewhere.
pub fn single_mode_probe(m1: &Multiplier, m2: &Multiplier, kx: i64, ky: i64) -> Result<f64> {
    let grid = *m1.grid();
    grid.ensure_same(m2.grid())?;
    let mut probe = SpectralField::zeros(grid);
    probe.set_hermitian(kx, ky, Complex64::new(1.0, 0.0));
    let omega = inverse_fft(&probe)?;
    let diff = apply_multiplier(m1, &omega)?.sub(&apply_multiplier(m2, &omega)?)?;
    Ok(forward_fft(&diff).get(kx, ky).norm())
}

pub fn check_band_equivalence(
    m1: &Multiplier,
    m2: &Multiplier,
    band: BandMask,
    trials: usize,
    seed: u64,
) -> Result<EquivalenceVerdict> {
    check_band_equivalence_with_tolerance(m1, m2, band, trials, seed, EQUIVALENCE_TOLERANCE)
}

/// Decides equivalence on `band` from the symbols and corroborates it with
/// `trials` random unit-phase band fields (trial `t` uses
/// `sub_seed(seed, t)`).
pub fn check_band_equivalence_with_tolerance(
    m1: &Multiplier,
    m2: &Multiplier,
    band: BandMask,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<EquivalenceVerdict> {
    let grid = *m1.grid();
    grid.ensure_same(m2.grid())?;
    if trials == 0 {
        return Err(Error::config("equivalence check needs at least one trial"));
    }
    band.check_fits(&grid)?;

    let mut max_symbol = 0.0_f64;
    let mut worst_mode = None;
    for m in band.modes(&grid) {
        let d = (m1.values()[[m.ix, m.iy]] - m2.values()[[m.ix, m.iy]]).norm();
        if worst_mode.is_none() || d > max_symbol {
            max_symbol = d;
            worst_mode = Some((m.kx, m.ky));
        }
    }
    let Some((wx, wy)) = worst_mode else {
        return Err(Error::config("band contains no lattice modes on this grid"));
    };

    let diffs = (0..trials)
        .into_par_iter()
        .map(|t| trial_diff(m1, m2, band, sub_seed(seed, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    let worst = |f: fn(&TrialDiff) -> f64| diffs.iter().map(f).fold(0.0, f64::max);

    let kernel_diff_l2 = l2_norm(&m1.sub(m2)?.kernel()?);
    let probe_response = single_mode_probe(m1, m2, wx, wy)?;

    Ok(EquivalenceVerdict {
        band,
        tolerance,
        max_symbol_diff_on_band: max_symbol,
        worst_mode,
        trials,
        max_output_diff_linf: worst(|d| d.linf),
        max_output_diff_l2: worst(|d| d.l2),
        max_relative_diff_linf: worst(|d| d.rel_linf),
        max_relative_diff_l2: worst(|d| d.rel_l2),
        kernel_diff_l2,
        probe_response,
        equivalent_on_band: max_symbol <= tolerance,
    })
}
