//! Band masks, Fourier multipliers and seeded band-limited random fields.
//!
//! Masks and multiplier profiles are functions of the integer-lattice
//! radius `|k| = sqrt(kx^2 + ky^2)`. Bands must stay strictly below the
//! Nyquist radius `n/2`, so the self-conjugate Nyquist row and column
//! never belong to a band.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::spectral::{hermitian_defect, inverse_fft, Grid, Mode, RealField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandMask {
    /// `|k| <= k_c`
    Disk { k_c: f64 },
    /// `k_lo <= |k| <= k_hi`
    Annulus { k_lo: f64, k_hi: f64 },
}

impl BandMask {
    pub fn disk(k_c: f64) -> Result<Self> {
        if !(k_c.is_finite() && k_c >= 0.0) {
            return Err(Error::config(format!(
                "disk radius must be >= 0, got {k_c}"
            )));
        }
        Ok(BandMask::Disk { k_c })
    }

    pub fn annulus(k_lo: f64, k_hi: f64) -> Result<Self> {
        if !(k_lo.is_finite() && k_hi.is_finite() && 0.0 <= k_lo && k_lo < k_hi) {
            return Err(Error::config(format!(
                "annulus needs 0 <= k_lo < k_hi, got [{k_lo}, {k_hi}]"
            )));
        }
        Ok(BandMask::Annulus { k_lo, k_hi })
    }

    pub fn contains_radius(&self, r: f64) -> bool {
        match *self {
            BandMask::Disk { k_c } => r <= k_c,
            BandMask::Annulus { k_lo, k_hi } => k_lo <= r && r <= k_hi,
        }
    }

    pub fn contains(&self, kx: i64, ky: i64) -> bool {
        self.contains_radius(((kx * kx + ky * ky) as f64).sqrt())
    }

    pub fn inner_radius(&self) -> f64 {
        match *self {
            BandMask::Disk { .. } => 0.0,
            BandMask::Annulus { k_lo, .. } => k_lo,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match *self {
            BandMask::Disk { k_c } => k_c,
            BandMask::Annulus { k_hi, .. } => k_hi,
        }
    }

    /// Rejects bands that reach the Nyquist radius of `grid`.
    pub fn check_fits(&self, grid: &Grid) -> Result<()> {
        if self.outer_radius() >= grid.nyquist() as f64 {
            return Err(Error::config(format!(
                "band outer radius {} must stay below the Nyquist radius {}",
                self.outer_radius(),
                grid.nyquist()
            )));
        }
        Ok(())
    }

    /// Lattice modes of `grid` inside the band, in array order.
    pub fn modes<'a>(&'a self, grid: &'a Grid) -> impl Iterator<Item = Mode> + 'a {
        grid.modes()
            .filter(move |m| self.contains_radius(m.radius()))
    }

    pub fn mode_count(&self, grid: &Grid) -> usize {
        self.modes(grid).count()
    }
}

/// Transfer function `k -> M(k)` on the lattice of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    grid: Grid,
    values: Array2<Complex64>,
}

impl Multiplier {
    pub fn new(grid: Grid, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (grid.n(), grid.n()) {
            return Err(Error::Dimension(format!(
                "multiplier shape {:?} does not match grid n={}",
                values.dim(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&Mode) -> Complex64) -> Self {
        let mut values = Array2::zeros((grid.n(), grid.n()));
        for m in grid.modes() {
            values[[m.ix, m.iy]] = f(&m);
        }
        Self { grid, values }
    }

    /// Real radial profile `h(|k|)`.
    pub fn radial(grid: Grid, h: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |m| Complex64::new(h(m.radius()), 0.0))
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self::radial(grid, |_| value)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn get(&self, kx: i64, ky: i64) -> Complex64 {
        self.values[[self.grid.index(kx), self.grid.index(ky)]]
    }

    pub fn set(&mut self, kx: i64, ky: i64, value: Complex64) {
        let idx = [self.grid.index(kx), self.grid.index(ky)];
        self.values[idx] = value;
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.grid, &self.values)
    }

    pub fn add(&self, other: &Multiplier) -> Result<Multiplier> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Multiplier {
            grid: self.grid,
            values: &self.values + &other.values,
        })
    }

    pub fn sub(&self, other: &Multiplier) -> Result<Multiplier> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Multiplier {
            grid: self.grid,
            values: &self.values - &other.values,
        })
    }

    pub fn product(&self, other: &Multiplier) -> Result<Multiplier> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Multiplier {
            grid: self.grid,
            values: &self.values * &other.values,
        })
    }

    pub fn scaled(&self, a: f64) -> Multiplier {
        Multiplier {
            grid: self.grid,
            values: self.values.mapv(|v| v * a),
        }
    }

    /// Applies the symbol to a spectrum.
    pub fn apply_spectral(&self, spec: &SpectralField) -> Result<SpectralField> {
        self.grid.ensure_same(spec.grid())?;
        Ok(spec.multiplied(&self.values))
    }

    /// Physical-space kernel `K` whose quadrature-weighted circular
    /// convolution reproduces this multiplier:
    /// `K = inverse_fft(M) * (n/L)^2`.
    pub fn kernel(&self) -> Result<RealField> {
        let spec = SpectralField::new(self.grid, self.values.clone())?;
        Ok(inverse_fft(&spec)?.scaled(1.0 / self.grid.cell_area()))
    }
}

fn check_radius_range(grid: &Grid, name: &str, lo: f64, hi: f64) -> Result<()> {
    let nyq = grid.nyquist() as f64;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi && hi < nyq) {
        return Err(Error::config(format!(
            "{name}: need 0 < {lo} < {hi} < n/2 = {nyq}"
        )));
    }
    Ok(())
}

/// Ideal low-pass symbol: 1 for `|k| <= k_c`, 0 elsewhere.
pub fn make_lowpass(grid: Grid, k_c: f64) -> Result<Multiplier> {
    let nyq = grid.nyquist() as f64;
    if !(k_c.is_finite() && 0.0 < k_c && k_c < nyq) {
        return Err(Error::config(format!(
            "low-pass cutoff must satisfy 0 < k_c < n/2 = {nyq}, got {k_c}"
        )));
    }
    Ok(Multiplier::radial(
        grid,
        |r| if r <= k_c { 1.0 } else { 0.0 },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpProfile {
    /// Flat `height` on the open annulus.
    Constant,
    /// `height * sin^2(pi (|k| - k_lo) / (k_hi - k_lo))`, continuous at both edges.
    CosineTaper,
}

impl std::str::FromStr for BumpProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(BumpProfile::Constant),
            "cosine-taper" | "cosine_taper" => Ok(BumpProfile::CosineTaper),
            other => Err(Error::config(format!("unknown bump profile '{other}'"))),
        }
    }
}

/// Real bump supported on the open annulus `k_lo < |k| < k_hi`.
pub fn make_annulus_bump(
    grid: Grid,
    k_lo: f64,
    k_hi: f64,
    height: f64,
    profile: BumpProfile,
) -> Result<Multiplier> {
    check_radius_range(&grid, "annulus bump", k_lo, k_hi)?;
    if !height.is_finite() {
        return Err(Error::config(format!(
            "bump height must be finite, got {height}"
        )));
    }
    let width = k_hi - k_lo;
    Ok(Multiplier::radial(grid, |r| {
        if !(k_lo < r && r < k_hi) {
            return 0.0;
        }
        match profile {
            BumpProfile::Constant => height,
            BumpProfile::CosineTaper => {
                let s = (PI * (r - k_lo) / width).sin();
                height * s * s
            }
        }
    }))
}

/// Teacher symbol on an annulus `[k1, k2]`, zero elsewhere:
///
/// `zeta * (1 + nonlocal_gain * (|k| - k_mid) / (k2 - k1)) * exp(+-i phase_offset)`
///
/// with `k_mid = (k1 + k2) / 2`. The phase is `+phase_offset` on the upper
/// half-plane and `-phase_offset` on its mirror, so the symbol stays
/// conjugate symmetric and maps real fields to real fields.
pub fn make_teacher_gain(
    grid: Grid,
    band: BandMask,
    zeta: f64,
    nonlocal_gain: f64,
    phase_offset: f64,
) -> Result<Multiplier> {
    let (k1, k2) = match band {
        BandMask::Annulus { k_lo, k_hi } => (k_lo, k_hi),
        BandMask::Disk { .. } => {
            return Err(Error::config("teacher gain needs an annulus band [k1, k2]"))
        }
    };
    if !(k2 > k1) {
        return Err(Error::config(format!(
            "degenerate teacher band [{k1}, {k2}]"
        )));
    }
    band.check_fits(&grid)?;
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::config(format!("zeta must be positive, got {zeta}")));
    }
    if !(nonlocal_gain.is_finite() && nonlocal_gain >= 0.0) {
        return Err(Error::config(format!(
            "nonlocal_gain must be >= 0, got {nonlocal_gain}"
        )));
    }
    if !phase_offset.is_finite() {
        return Err(Error::config("phase_offset must be finite"));
    }
    let mid = 0.5 * (k1 + k2);
    let width = k2 - k1;
    let upper = Complex64::from_polar(1.0, phase_offset);
    Ok(Multiplier::from_fn(grid, |m| {
        let r = m.radius();
        if !band.contains_radius(r) {
            return Complex64::new(0.0, 0.0);
        }
        let magnitude = zeta * (1.0 + nonlocal_gain * (r - mid) / width);
        if phase_offset == 0.0 {
            Complex64::new(magnitude, 0.0)
        } else if m.is_upper_half() {
            upper * magnitude
        } else {
            upper.conj() * magnitude
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeRule {
    /// `exp(i phi)` with `phi ~ Unif(0, 2 pi)`.
    UnitPhase,
    /// `(a + i b) / sqrt(2)` with `a, b ~ N(0, 1)`, so `E|c|^2 = 1`.
    ComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub band: BandMask,
    pub seed: u64,
    pub amplitude: AmplitudeRule,
}

impl RandomFieldSpec {
    pub fn unit_phase(band: BandMask, seed: u64) -> Self {
        Self {
            band,
            seed,
            amplitude: AmplitudeRule::UnitPhase,
        }
    }
}

/// Generates the spectrum of a real band-limited field.
///
/// Draw order is fixed: `ky` ascending from 0, then `kx` ascending, over
/// the upper half-plane modes inside the band; each draw is mirrored onto
/// `-k` by conjugation. Self-conjugate band modes (only DC, since bands stay
/// below Nyquist) get the real value 1 for unit phases and a real `N(0, 1)`
/// draw for Gaussian amplitudes. Everything outside the band is exactly 0.
pub fn random_band_spectrum(spec: &RandomFieldSpec, grid: &Grid) -> Result<SpectralField> {
    spec.band.check_fits(grid)?;
    if spec.band.mode_count(grid) == 0 {
        return Err(Error::config("band contains no lattice modes on this grid"));
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut out = SpectralField::zeros(*grid);
    let reach = spec.band.outer_radius().floor() as i64;

    if spec.band.contains(0, 0) {
        let dc = match spec.amplitude {
            AmplitudeRule::UnitPhase => 1.0,
            AmplitudeRule::ComplexGaussian => rng.sample::<f64, _>(StandardNormal),
        };
        out.set(0, 0, Complex64::new(dc, 0.0));
    }
    for ky in 0..=reach {
        for kx in -reach..=reach {
            if ky == 0 && kx <= 0 {
                continue;
            }
            if !spec.band.contains(kx, ky) {
                continue;
            }
            let value = match spec.amplitude {
                AmplitudeRule::UnitPhase => {
                    let phi = 2.0 * PI * rng.random::<f64>();
                    Complex64::from_polar(1.0, phi)
                }
                AmplitudeRule::ComplexGaussian => {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
                }
            };
            out.set_hermitian(kx, ky, value);
        }
    }
    Ok(out)
}

/// Band-limited real field and its spectrum; the field is the inverse
/// transform of the returned spectrum.
pub fn random_band_field(
    spec: &RandomFieldSpec,
    grid: &Grid,
) -> Result<(RealField, SpectralField)> {
    let spectrum = random_band_spectrum(spec, grid)?;
    let field = inverse_fft(&spectrum)?;
    Ok((field, spectrum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_fft;
    use approx::assert_abs_diff_eq;

    fn g256() -> Grid {
        Grid::periodic(256).unwrap()
    }

    #[test]
    fn band_membership() {
        let disk = BandMask::disk(20.0).unwrap();
        assert!(disk.contains(20, 0));
        assert!(!disk.contains(21, 0));
        assert!(disk.contains(12, 16)); // radius exactly 20
        let ann = BandMask::annulus(8.0, 12.0).unwrap();
        assert!(ann.contains(0, 8) && ann.contains(-12, 0) && !ann.contains(7, 0));
        assert!(BandMask::annulus(3.0, 3.0).is_err());
        for (kx, ky) in [(3, 4), (-7, 9), (0, 12), (11, -2)] {
            assert_eq!(ann.contains(kx, ky), ann.contains(-kx, -ky));
        }
    }

    #[test]
    fn lowpass_values_and_range() {
        let g = g256();
        assert!(make_lowpass(g, 256.0).is_err());
        assert!(make_lowpass(g, 128.0).is_err());
        assert!(make_lowpass(g, 0.0).is_err());
        let f = make_lowpass(g, 20.0).unwrap();
        assert_eq!(f.get(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(f.get(20, 0), Complex64::new(1.0, 0.0));
        assert_eq!(f.get(21, 0), Complex64::new(0.0, 0.0));
        assert_eq!(f.hermitian_defect(), 0.0);
    }

    #[test]
    fn lowpass_is_identity_on_its_disk() {
        let g = Grid::periodic(64).unwrap();
        let band = BandMask::disk(10.0).unwrap();
        let (_, spec) = random_band_field(&RandomFieldSpec::unit_phase(band, 4), &g).unwrap();
        let lp = make_lowpass(g, 10.0).unwrap();
        assert_eq!(lp.apply_spectral(&spec).unwrap(), spec);
    }

    #[test]
    fn annulus_bump_edges_are_open() {
        let g = g256();
        let q = make_annulus_bump(g, 40.0, 60.0, 0.5, BumpProfile::Constant).unwrap();
        assert_eq!(q.get(50, 0).re, 0.5);
        assert_eq!(q.get(30, 40).re, 0.5); // |k| = 50
        assert_eq!(q.get(40, 0).re, 0.0);
        assert_eq!(q.get(36, 48).re, 0.0); // |k| = 60
        assert_eq!(q.get(60, 0).re, 0.0);
        assert!(make_annulus_bump(g, 60.0, 40.0, 0.5, BumpProfile::Constant).is_err());
        assert!(make_annulus_bump(g, 40.0, 128.0, 0.5, BumpProfile::Constant).is_err());
    }

    #[test]
    fn zero_height_bump_vanishes() {
        let g = Grid::periodic(64).unwrap();
        for profile in [BumpProfile::Constant, BumpProfile::CosineTaper] {
            let q = make_annulus_bump(g, 5.0, 20.0, 0.0, profile).unwrap();
            assert!(q.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn cosine_taper_is_continuous() {
        let g = g256();
        let q = make_annulus_bump(g, 40.0, 60.0, 2.0, BumpProfile::CosineTaper).unwrap();
        assert_abs_diff_eq!(q.get(50, 0).re, 2.0, epsilon = 1e-12);
        assert!(q.get(41, 0).re < 0.1);
        assert!(q.get(59, 0).re < 0.1);
        assert_eq!(q.get(40, 0).re, 0.0);
    }

    #[test]
    fn lowpass_and_disjoint_bump_have_disjoint_support() {
        let g = g256();
        let lp = make_lowpass(g, 20.0).unwrap();
        let q = make_annulus_bump(g, 40.0, 60.0, 3.0, BumpProfile::Constant).unwrap();
        // exhaustive lattice scan
        let overlap = g
            .modes()
            .filter(|m| lp.get(m.kx, m.ky).norm() > 0.0 && q.get(m.kx, m.ky).norm() > 0.0)
            .count();
        assert_eq!(overlap, 0);
        assert!(lp
            .product(&q)
            .unwrap()
            .values()
            .iter()
            .all(|v| v.norm() == 0.0));
        assert_eq!(lp.product(&lp.add(&q).unwrap()).unwrap(), lp);
    }

    #[test]
    fn teacher_gain_shapes() {
        let g = g256();
        let band = BandMask::annulus(8.0, 12.0).unwrap();
        let flat = make_teacher_gain(g, band, 0.75, 0.0, 0.0).unwrap();
        for m in band.modes(&g) {
            assert_eq!(flat.get(m.kx, m.ky), Complex64::new(0.75, 0.0));
        }
        assert_eq!(flat.get(7, 0).norm(), 0.0);
        assert_eq!(flat.get(13, 0).norm(), 0.0);

        let ramp = make_teacher_gain(g, band, 0.75, 0.6, 0.0).unwrap();
        assert_abs_diff_eq!(ramp.get(8, 0).re, 0.525, epsilon = 1e-15);
        assert_abs_diff_eq!(ramp.get(0, 12).re, 0.975, epsilon = 1e-15);
        assert_eq!(ramp.hermitian_defect(), 0.0);

        let phased = make_teacher_gain(g, band, 0.75, 0.0, 0.3).unwrap();
        assert!(phased.hermitian_defect() < 1e-15);
        assert_abs_diff_eq!(phased.get(10, 0).arg(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(phased.get(-10, 0).arg(), -0.3, epsilon = 1e-15);

        let degenerate = BandMask::Annulus {
            k_lo: 9.0,
            k_hi: 9.0,
        };
        assert!(make_teacher_gain(g, degenerate, 0.75, 0.0, 0.0).is_err());
        assert!(make_teacher_gain(g, BandMask::disk(5.0).unwrap(), 0.75, 0.0, 0.0).is_err());
    }

    #[test]
    fn dc_only_band_gives_constant_field() {
        let g = Grid::periodic(16).unwrap();
        let band = BandMask::disk(0.5).unwrap();
        let (f, spec) = random_band_field(&RandomFieldSpec::unit_phase(band, 9), &g).unwrap();
        assert_eq!(spec.get(0, 0), Complex64::new(1.0, 0.0));
        let first = f.values()[[0, 0]];
        assert!(f.values().iter().all(|v| (v - first).abs() < 1e-16));
        assert_abs_diff_eq!(first, 1.0 / 256.0, epsilon = 1e-16);
    }

    #[test]
    fn empty_band_is_an_error() {
        let g = Grid::periodic(16).unwrap();
        let band = BandMask::annulus(1.1, 1.3).unwrap();
        assert!(random_band_field(&RandomFieldSpec::unit_phase(band, 1), &g).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let g = Grid::periodic(64).unwrap();
        for amplitude in [AmplitudeRule::UnitPhase, AmplitudeRule::ComplexGaussian] {
            let spec = RandomFieldSpec {
                band: BandMask::annulus(3.0, 9.0).unwrap(),
                seed: 42,
                amplitude,
            };
            let (a, sa) = random_band_field(&spec, &g).unwrap();
            let (b, sb) = random_band_field(&spec, &g).unwrap();
            assert_eq!(a, b);
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn spectral_support_stays_in_band() {
        let g = Grid::periodic(64).unwrap();
        let band = BandMask::disk(12.0).unwrap();
        let (f, spec) = random_band_field(&RandomFieldSpec::unit_phase(band, 11), &g).unwrap();
        assert_eq!(spec.hermitian_defect(), 0.0);
        let back = forward_fft(&f);
        for m in g.modes() {
            let c = back.coeffs()[[m.ix, m.iy]];
            if band.contains_radius(m.radius()) {
                assert_abs_diff_eq!(c.norm(), 1.0, epsilon = 1e-12);
            } else {
                assert_eq!(spec.coeffs()[[m.ix, m.iy]].norm(), 0.0);
                assert!(c.norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn kernel_reproduces_multiplier() {
        let g = Grid::new(8, 3.0).unwrap();
        let lp = make_lowpass(g, 2.0).unwrap();
        let k = lp.kernel().unwrap();
        let back = forward_fft(&k).scaled(g.cell_area());
        for m in g.modes() {
            assert!((back.coeffs()[[m.ix, m.iy]] - lp.values()[[m.ix, m.iy]]).norm() < 1e-13);
        }
    }
}
