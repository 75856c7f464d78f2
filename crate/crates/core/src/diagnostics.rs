//! Shell-averaged gain and coherence, the zero-intercept real-space fit,
//! curl operators with the direct/feedback decomposition, and closure
//! estimates for the proportionality constant `zeta`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::bands::{BandMask, Multiplier};
use crate::error::{Error, Result};
use crate::spectral::{Grid, RealField, SpectralField};

/// Half-open radial bins `[k_min + j w, k_min + (j + 1) w)`; the last bin
/// is closed on the right so that `|k| = k_max` is always binned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellBinning {
    pub k_min: f64,
    pub k_max: f64,
    pub width: f64,
    pub count: usize,
}

impl ShellBinning {
    pub fn new(k_min: f64, k_max: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::config(format!(
                "bin width must be positive, got {width}"
            )));
        }
        if !(k_min.is_finite() && k_max.is_finite() && 0.0 <= k_min && k_min < k_max) {
            return Err(Error::config(format!(
                "shell range needs 0 <= k_min < k_max, got [{k_min}, {k_max}]"
            )));
        }
        let count = (((k_max - k_min) / width) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            k_min,
            k_max,
            width,
            count,
        })
    }

    /// Bins of `width` centred on multiples of `width` that cover `band`.
    /// With `width = 1` the shells are centred on the integer radii.
    pub fn around_band(band: &BandMask, width: f64) -> Result<Self> {
        let lo = (band.inner_radius() - 0.5 * width).max(0.0);
        Self::new(lo, band.outer_radius() + 0.5 * width, width)
    }

    pub fn bin_of(&self, r: f64) -> Option<usize> {
        if r < self.k_min || r > self.k_max {
            return None;
        }
        let j = ((r - self.k_min) / self.width).floor() as usize;
        Some(j.min(self.count - 1))
    }

    pub fn center(&self, j: usize) -> f64 {
        self.k_min + (j as f64 + 0.5) * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.center(j)).collect()
    }
}

/// Per-shell cross-spectral aggregates of a pair `(S, omega)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellSpectrum {
    pub shell_centers: Vec<f64>,
    pub mode_count: Vec<usize>,
    /// `<S conj(omega)>` over member modes.
    pub cross_power: Vec<Complex64>,
    /// `<|omega|^2>`
    pub omega_power: Vec<f64>,
    /// `<|S|^2>`
    pub s_power: Vec<f64>,
    /// `H(k) = <S conj(omega)> / <|omega|^2>`, absent when `omega_power == 0`.
    pub gain: Vec<Option<Complex64>>,
    /// `|<S conj(omega)>|^2 / (<|S|^2> <|omega|^2>)`, absent when
    /// `omega_power == 0`, and 0 when `S` vanishes on the shell.
    pub coherence: Vec<Option<f64>>,
}

impl ShellSpectrum {
    pub fn len(&self) -> usize {
        self.shell_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shell_centers.is_empty()
    }

    /// Indices of shells with at least one member mode.
    pub fn populated(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.mode_count[j] > 0)
    }
}

pub fn shell_statistics(
    s_hat: &SpectralField,
    omega_hat: &SpectralField,
    k_min: f64,
    k_max: f64,
    bin_width: f64,
) -> Result<ShellSpectrum> {
    let bins = ShellBinning::new(k_min, k_max, bin_width)?;
    shell_statistics_binned(s_hat, omega_hat, &bins)
}

/// Shell averages are unweighted means over member modes, accumulated in
/// array order.
pub fn shell_statistics_binned(
    s_hat: &SpectralField,
    omega_hat: &SpectralField,
    bins: &ShellBinning,
) -> Result<ShellSpectrum> {
    let grid = *s_hat.grid();
    grid.ensure_same(omega_hat.grid())?;
    if bins.k_max >= grid.nyquist() as f64 {
        return Err(Error::config(format!(
            "shell range must stay below the Nyquist radius {}, got k_max = {}",
            grid.nyquist(),
            bins.k_max
        )));
    }
    let nb = bins.count;
    let mut count = vec![0usize; nb];
    let mut cross = vec![Complex64::new(0.0, 0.0); nb];
    let mut wp = vec![0.0; nb];
    let mut sp = vec![0.0; nb];
    for m in grid.modes() {
        let Some(j) = bins.bin_of(m.radius()) else {
            continue;
        };
        let s = s_hat.coeffs()[[m.ix, m.iy]];
        let w = omega_hat.coeffs()[[m.ix, m.iy]];
        count[j] += 1;
        cross[j] += s * w.conj();
        wp[j] += w.norm_sqr();
        sp[j] += s.norm_sqr();
    }
    if count.iter().all(|&c| c == 0) {
        return Err(Error::config("shell range contains no lattice modes"));
    }

    let mut gain = Vec::with_capacity(nb);
    let mut coherence = Vec::with_capacity(nb);
    for j in 0..nb {
        if count[j] > 0 {
            let c = count[j] as f64;
            cross[j] /= c;
            wp[j] /= c;
            sp[j] /= c;
        }
        if wp[j] > 0.0 {
            gain.push(Some(cross[j] / wp[j]));
            coherence.push(Some(if sp[j] > 0.0 {
                cross[j].norm_sqr() / (sp[j] * wp[j])
            } else {
                0.0
            }));
        } else {
            gain.push(None);
            coherence.push(None);
        }
    }

    Ok(ShellSpectrum {
        shell_centers: bins.centers(),
        mode_count: count,
        cross_power: cross,
        omega_power: wp,
        s_power: sp,
        gain,
        coherence,
    })
}

/// Least-squares line through the origin of the `(omega, S)` scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealSpaceFit {
    pub slope: f64,
    /// Uncentred `1 - sum (S - slope omega)^2 / sum S^2`; 1 when `S` is
    /// identically zero.
    pub r_squared: f64,
    pub sample_count: usize,
}

pub fn real_space_fit(s: &RealField, omega: &RealField) -> Result<RealSpaceFit> {
    s.grid().ensure_same(omega.grid())?;
    let (mut sw, mut ww, mut ss) = (0.0, 0.0, 0.0);
    for (a, b) in s.values().iter().zip(omega.values().iter()) {
        sw += a * b;
        ww += b * b;
        ss += a * a;
    }
    if ww == 0.0 {
        return Err(Error::DegenerateFit("omega is identically zero".into()));
    }
    let slope = sw / ww;
    let rss: f64 = s
        .values()
        .iter()
        .zip(omega.values().iter())
        .map(|(a, b)| {
            let r = a - slope * b;
            r * r
        })
        .sum();
    let r_squared = if ss > 0.0 { 1.0 - rss / ss } else { 1.0 };
    Ok(RealSpaceFit {
        slope,
        r_squared,
        sample_count: s.values().len(),
    })
}

/// In-plane vector field in spectral space (the `z` component of a curl of
/// `phi e_z` vanishes identically).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSpectrum {
    pub grid: Grid,
    pub x: Array2<Complex64>,
    pub y: Array2<Complex64>,
}

impl VectorSpectrum {
    pub fn magnitude(&self, kx: i64, ky: i64) -> f64 {
        let idx = [self.grid.index(kx), self.grid.index(ky)];
        (self.x[idx].norm_sqr() + self.y[idx].norm_sqr()).sqrt()
    }
}

type Vec3 = [Complex64; 3];

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `i k x (s e_z)` for physical wavenumber `(kx, ky)`.
fn i_k_cross_ez(kx: f64, ky: f64, s: Complex64) -> Vec3 {
    let ik = [I * kx, I * ky, ZERO];
    cross(&ik, &[ZERO, ZERO, s])
}

fn physical_k(grid: &Grid, kx: i64, ky: i64) -> (f64, f64) {
    let unit = grid.wavenumber_unit();
    (kx as f64 * unit, ky as f64 * unit)
}

/// Spectral curl `i k x (omega e_z)` of a scalar field embedded along `e_z`,
/// using physical wavenumbers. Per mode its magnitude is `|k| |omega|`.
pub fn curl(omega_hat: &SpectralField) -> VectorSpectrum {
    let grid = *omega_hat.grid();
    let mut x = Array2::zeros((grid.n(), grid.n()));
    let mut y = Array2::zeros((grid.n(), grid.n()));
    for m in grid.modes() {
        let (kx, ky) = physical_k(&grid, m.kx, m.ky);
        let v = i_k_cross_ez(kx, ky, omega_hat.coeffs()[[m.ix, m.iy]]);
        x[[m.ix, m.iy]] = v[0];
        y[[m.ix, m.iy]] = v[1];
    }
    VectorSpectrum { grid, x, y }
}

/// Projects a vector onto the basis `{e_z, u(k) = i k x e_z}` at a nonzero
/// wavenumber: returns `(e_z . v, conj(u) . v / |k|^2)`.
pub fn project_curl_terms(kx: f64, ky: f64, v: &Vec3) -> (Complex64, Complex64) {
    let u = i_k_cross_ez(kx, ky, Complex64::new(1.0, 0.0));
    let k2 = kx * kx + ky * ky;
    let direct = v[2];
    let feedback = (u[0].conj() * v[0] + u[1].conj() * v[1] + u[2].conj() * v[2]) / k2;
    (direct, feedback)
}

/// Direct and feedback multipliers of the recursive curl relation
/// `i k x omega_bar = H omega + F (i k x omega)` for `omega_bar = zeta G omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurlDecomposition {
    pub h_hat: Multiplier,
    pub f_hat: Multiplier,
    /// Max over `k != 0` of the relation's residual on the probe field.
    pub residual_linf: f64,
}

/// Decomposes `zeta * i k x (G e_z)` on the basis `{e_z, u(k)}` mode by
/// mode. Both multipliers are 0 at `k = 0`, where `u` vanishes. The
/// residual of the recursive relation is evaluated on `probe`.
pub fn curl_decompose(
    g_hat: &Multiplier,
    zeta: f64,
    probe: &SpectralField,
) -> Result<CurlDecomposition> {
    let grid = *g_hat.grid();
    grid.ensure_same(probe.grid())?;
    if !zeta.is_finite() {
        return Err(Error::config("zeta must be finite"));
    }
    let mut h = Array2::zeros((grid.n(), grid.n()));
    let mut f = Array2::zeros((grid.n(), grid.n()));
    let mut residual = 0.0_f64;
    for m in grid.modes() {
        if m.kx == 0 && m.ky == 0 {
            continue;
        }
        let (kx, ky) = physical_k(&grid, m.kx, m.ky);
        let g = g_hat.values()[[m.ix, m.iy]];
        let v = i_k_cross_ez(kx, ky, g * zeta);
        let (hd, fb) = project_curl_terms(kx, ky, &v);
        h[[m.ix, m.iy]] = hd;
        f[[m.ix, m.iy]] = fb;

        let w = probe.coeffs()[[m.ix, m.iy]];
        let lhs = i_k_cross_ez(kx, ky, g * zeta * w);
        let curl_w = i_k_cross_ez(kx, ky, w);
        let rhs = [fb * curl_w[0], fb * curl_w[1], hd * w + fb * curl_w[2]];
        let d = (0..3)
            .map(|c| (lhs[c] - rhs[c]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residual = residual.max(d);
    }
    Ok(CurlDecomposition {
        h_hat: Multiplier::new(grid, h)?,
        f_hat: Multiplier::new(grid, f)?,
        residual_linf: residual,
    })
}

/// `zeta ~ nu_t k_star^2` for an eddy-viscosity closure on a narrow band.
pub fn zeta_from_eddy_viscosity(nu_t: f64, k_star: f64) -> Result<f64> {
    if !(nu_t.is_finite() && nu_t >= 0.0) {
        return Err(Error::config(format!(
            "eddy viscosity must be >= 0, got {nu_t}"
        )));
    }
    if !(k_star.is_finite() && k_star > 0.0) {
        return Err(Error::config(format!(
            "k_star must be positive, got {k_star}"
        )));
    }
    Ok(nu_t * k_star * k_star)
}

/// Eddy viscosity matching a decorrelation time at `k_star`,
/// `nu_t = 1 / (k_star^2 tau)`.
pub fn eddy_viscosity_from_tau(tau: f64, k_star: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0 && k_star.is_finite() && k_star > 0.0) {
        return Err(Error::config("tau and k_star must be positive"));
    }
    Ok(1.0 / (k_star * k_star * tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureEstimate {
    pub zeta_from_nu_t: f64,
    pub zeta_from_tau: f64,
    pub nu_t: f64,
    pub k_star: f64,
    pub tau: f64,
}

impl ClosureEstimate {
    pub fn new(nu_t: f64, k_star: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::config(format!("tau must be positive, got {tau}")));
        }
        Ok(Self {
            zeta_from_nu_t: zeta_from_eddy_viscosity(nu_t, k_star)?,
            zeta_from_tau: 1.0 / tau,
            nu_t,
            k_star,
            tau,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandConstancy {
    /// Mean of `|M|` over band modes.
    pub mean: f64,
    /// `max | |M| - mean | / mean` over band modes (0 when the mean is 0).
    pub max_relative_deviation: f64,
}

/// How close `|M|` is to a constant on `band`.
pub fn band_constancy_check(m: &Multiplier, band: &BandMask) -> Result<BandConstancy> {
    let grid = *m.grid();
    let mags: Vec<f64> = band
        .modes(&grid)
        .map(|md| m.values()[[md.ix, md.iy]].norm())
        .collect();
    if mags.is_empty() {
        return Err(Error::config("band contains no lattice modes on this grid"));
    }
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    let dev = if mean > 0.0 {
        mags.iter()
            .map(|v| (v - mean).abs() / mean)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(BandConstancy {
        mean,
        max_relative_deviation: dev,
    })
}
