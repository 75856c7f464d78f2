//! Periodic square grids, real and spectral field containers, and the
//! discrete Fourier transform contract used throughout the crate.
//!
//! Transform convention:
//!
//! ```text
//! forward:  F[k] = sum_r f[r] exp(-i k.r)            (scale 1)
//! inverse:  f[r] = (1/n^2) sum_k F[k] exp(+i k.r)    (scale 1/n^2)
//! ```
//!
//! With this choice a convolution operator is a pointwise product of
//! spectra, and the discrete Plancherel identity reads
//! `sum |f|^2 = (1/n^2) sum |F|^2`.
//!
//! Arrays are indexed `[[ix, iy]]` where axis 0 runs along `x` and axis 1
//! along `y`. Spectral arrays use the fftfreq layout (non-negative
//! wavenumbers first, then negative ones); the public accessors take
//! signed wavenumbers so callers never deal with the layout.

use std::cell::RefCell;
use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale applied by [`forward_fft`].
pub const FORWARD_SCALE: f64 = 1.0;

/// Maximum conjugate-symmetry defect accepted by [`inverse_fft`].
pub const INVERSE_SYMMETRY_THRESHOLD: f64 = 1e-10;

/// Periodic square `[0, L)^2` sampled on `n x n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

/// One point of the wavenumber lattice together with its array position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub ix: usize,
    pub iy: usize,
    pub kx: i64,
    pub ky: i64,
}

impl Mode {
    /// Radius on the integer lattice, `sqrt(kx^2 + ky^2)`.
    pub fn radius(&self) -> f64 {
        ((self.kx * self.kx + self.ky * self.ky) as f64).sqrt()
    }

    /// Upper half-plane: `ky > 0`, or `ky == 0` and `kx > 0`.
    pub fn is_upper_half(&self) -> bool {
        self.ky > 0 || (self.ky == 0 && self.kx > 0)
    }
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::config(format!(
                "grid size must be even and at least 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::config(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    /// Grid on `[0, 2*pi)^2`, where lattice and physical wavenumbers coincide.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight `(L/n)^2` of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Scale applied by [`inverse_fft`], `1/n^2`.
    pub fn inverse_scale(&self) -> f64 {
        1.0 / (self.n * self.n) as f64
    }

    pub fn nyquist(&self) -> i64 {
        (self.n / 2) as i64
    }

    /// Physical wavenumber of one lattice step, `2*pi/L`.
    pub fn wavenumber_unit(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Array index of signed wavenumber `k`.
    pub fn index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Signed wavenumber at array index `idx`, in `[-n/2, n/2)`.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        let n = self.n as i64;
        let i = idx as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Index of the wavenumber `-k` when `idx` holds `k`.
    pub fn mirror_index(&self, idx: usize) -> usize {
        (self.n - idx) % self.n
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// All lattice modes in array order.
    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        let n = self.n;
        (0..n).flat_map(move |ix| {
            (0..n).map(move |iy| Mode {
                ix,
                iy,
                kx: self.wavenumber(ix),
                ky: self.wavenumber(iy),
            })
        })
    }

    fn check_shape<T>(&self, a: &Array2<T>) -> Result<()> {
        if a.dim() != (self.n, self.n) {
            return Err(Error::Dimension(format!(
                "expected {n}x{n} array, got {:?}",
                a.dim(),
                n = self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::Dimension(format!(
                "grid mismatch: n={} L={} vs n={} L={}",
                self.n, self.length, other.n, other.length
            )));
        }
        Ok(())
    }
}

/// Physical-space samples `values[[i, j]] = f(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Array2<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        grid.check_shape(&values)?;
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite sample {v} at ({i}, {j})"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n, grid.n)),
        }
    }

    /// Samples `f(x, y)` at the grid points.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| {
            f(grid.coordinate(i), grid.coordinate(j))
        });
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &RealField, b: f64) -> Result<RealField> {
        self.grid.ensure_same(&other.grid)?;
        let values = &self.values * a + &other.values * b;
        RealField::new(self.grid, values)
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scaled(&self, a: f64) -> RealField {
        RealField {
            grid: self.grid,
            values: &self.values * a,
        }
    }
}

/// Fourier coefficients on the wavenumber lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Array2<Complex64>) -> Result<Self> {
        grid.check_shape(&coeffs)?;
        if coeffs
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::InvalidField(
                "non-finite spectral coefficient".into(),
            ));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    pub fn get(&self, kx: i64, ky: i64) -> Complex64 {
        self.coeffs[[self.grid.index(kx), self.grid.index(ky)]]
    }

    pub fn set(&mut self, kx: i64, ky: i64, value: Complex64) {
        let idx = [self.grid.index(kx), self.grid.index(ky)];
        self.coeffs[idx] = value;
    }

    /// Sets `value` at `k` and its conjugate at `-k`.
    pub fn set_hermitian(&mut self, kx: i64, ky: i64, value: Complex64) {
        self.set(-kx, -ky, value.conj());
        self.set(kx, ky, value);
    }

    /// `max_k |c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.grid, &self.coeffs)
    }

    /// Pointwise product with another coefficient array of the same grid.
    pub fn multiplied(&self, symbol: &Array2<Complex64>) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: &self.coeffs * symbol,
        }
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.mapv(|c| c * a),
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.ensure_same(&other.grid)?;
        Ok(SpectralField {
            grid: self.grid,
            coeffs: &self.coeffs - &other.coeffs,
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.ensure_same(&other.grid)?;
        Ok(SpectralField {
            grid: self.grid,
            coeffs: &self.coeffs + &other.coeffs,
        })
    }
}

pub(crate) fn hermitian_defect(grid: &Grid, coeffs: &Array2<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for ((ix, iy), c) in coeffs.indexed_iter() {
        let m = coeffs[[grid.mirror_index(ix), grid.mirror_index(iy)]];
        worst = worst.max((m - c.conj()).norm());
    }
    worst
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unscaled 2D transform along both axes, in place.
fn fft2_in_place(data: &mut Array2<Complex64>, direction: FftDirection) {
    let n = data.nrows();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let mut transform_rows = |a: &mut Array2<Complex64>| {
        let slice = a.as_slice_mut().expect("standard layout");
        fft.process_with_scratch(slice, &mut scratch);
    };
    transform_rows(data);
    let mut transposed = data.t().as_standard_layout().into_owned();
    transform_rows(&mut transposed);
    *data = transposed.t().as_standard_layout().into_owned();
}

/// Forward transform with unit scale.
///
/// The input is real, so the exact transform is conjugate symmetric. The
/// result is projected onto that subspace, which only removes round-off
/// and leaves self-conjugate modes with an exactly zero imaginary part.
pub fn forward_fft(f: &RealField) -> SpectralField {
    let grid = f.grid;
    let mut data = f.values.mapv(|v| Complex64::new(v, 0.0));
    fft2_in_place(&mut data, FftDirection::Forward);
    let symmetric = Array2::from_shape_fn(data.dim(), |(ix, iy)| {
        let m = data[[grid.mirror_index(ix), grid.mirror_index(iy)]];
        (data[[ix, iy]] + m.conj()) * 0.5
    });
    SpectralField {
        grid,
        coeffs: symmetric,
    }
}

/// Inverse transform with scale `1/n^2`.
///
/// Fails with [`Error::Asymmetry`] when the coefficients are not the
/// spectrum of a real field to within [`INVERSE_SYMMETRY_THRESHOLD`]; the
/// remaining imaginary round-off of the output is discarded.
pub fn inverse_fft(spec: &SpectralField) -> Result<RealField> {
    let defect = spec.hermitian_defect();
    if !(defect <= INVERSE_SYMMETRY_THRESHOLD) {
        return Err(Error::Asymmetry {
            defect,
            threshold: INVERSE_SYMMETRY_THRESHOLD,
        });
    }
    let grid = spec.grid;
    let mut data = spec.coeffs.clone();
    fft2_in_place(&mut data, FftDirection::Inverse);
    let scale = grid.inverse_scale();
    RealField::new(grid, data.mapv(|c| c.re * scale))
}

/// Quadrature L2 norm, `sqrt(sum f^2 (L/n)^2)`.
pub fn l2_norm(f: &RealField) -> f64 {
    (f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.cell_area()).sqrt()
}

pub fn linf_norm(f: &RealField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// L2 norm of the field whose spectrum is `spec`, so that
/// `spectral_l2(&forward_fft(f)) == l2_norm(f)` up to round-off.
pub fn spectral_l2(spec: &SpectralField) -> f64 {
    let grid = spec.grid;
    let sum: f64 = spec.coeffs.iter().map(|c| c.norm_sqr()).sum();
    (sum * grid.cell_area() * grid.inverse_scale()).sqrt()
}

/// Quadrature inner product `sum f g (L/n)^2`.
pub fn inner_product(f: &RealField, g: &RealField) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    let s: f64 = f
        .values
        .iter()
        .zip(g.values.iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(s * f.grid.cell_area())
}
