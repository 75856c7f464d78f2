//! Ornstein-Uhlenbeck trajectories and Green-Kubo decorrelation times.
//!
//! The relaxation model is `dx/dt = -zeta x + xi(t)`. Its autocorrelation
//! decays as `exp(-t / tau)` with `tau = 1 / zeta`, so the integrated
//! autocorrelation time of observed data estimates `zeta`.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bands::BandMask;
use crate::diagnostics::ShellBinning;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sub_seed};
use crate::spectral::{Grid, SpectralField};

/// Minimum number of updates accepted by the simulators.
pub const MIN_STEPS: usize = 1000;
/// Upper bound on `zeta * dt`.
pub const MAX_ZETA_DT: f64 = 0.1;
/// Minimum number of snapshots for per-shell estimates.
pub const MIN_SNAPSHOTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl Trajectory {
    pub fn new(dt: f64, values: Vec<f64>, seed: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::config("trajectory needs at least two samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField(
                "trajectory has non-finite samples".into(),
            ));
        }
        Ok(Self { dt, values, seed })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// `x_0 ~ N(0, noise_amplitude^2 / (2 zeta))`.
    Stationary,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinParams {
    pub zeta: f64,
    pub noise_amplitude: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial: InitialState,
}

impl LangevinParams {
    fn validate(&self) -> Result<()> {
        let LangevinParams {
            zeta,
            noise_amplitude,
            dt,
            steps,
            ..
        } = *self;
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(Error::config(format!("zeta must be positive, got {zeta}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {dt}")));
        }
        if !(zeta * dt < MAX_ZETA_DT) {
            return Err(Error::config(format!(
                "zeta*dt = {} must stay below {MAX_ZETA_DT}",
                zeta * dt
            )));
        }
        if !(noise_amplitude.is_finite() && noise_amplitude >= 0.0) {
            return Err(Error::config("noise amplitude must be >= 0"));
        }
        if steps < MIN_STEPS {
            return Err(Error::config(format!(
                "need at least {MIN_STEPS} steps, got {steps}"
            )));
        }
        Ok(())
    }

    pub fn stationary_variance(&self) -> f64 {
        self.noise_amplitude * self.noise_amplitude / (2.0 * self.zeta)
    }
}

/// Exact discretisation of the OU process: `steps` updates
/// `x <- x exp(-zeta dt) + sd * N(0,1)` with
/// `sd^2 = noise^2 (1 - exp(-2 zeta dt)) / (2 zeta)`, so the returned
/// trajectory holds `steps + 1` samples.
pub fn simulate_langevin_with(params: &LangevinParams, seed: u64) -> Result<Trajectory> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let decay = (-params.zeta * params.dt).exp();
    let sd = params.noise_amplitude
        * (-(-2.0 * params.zeta * params.dt).exp_m1() / (2.0 * params.zeta)).sqrt();
    let mut x = match params.initial {
        InitialState::Stationary => {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * params.stationary_variance().sqrt()
        }
        InitialState::Fixed(x0) => x0,
    };
    let mut values = Vec::with_capacity(params.steps + 1);
    values.push(x);
    for _ in 0..params.steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        x = x * decay + sd * z;
        values.push(x);
    }
    Trajectory::new(params.dt, values, seed)
}

/// Stationary-start OU trajectory.
pub fn simulate_langevin(
    zeta: f64,
    noise_amplitude: f64,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_langevin_with(
        &LangevinParams {
            zeta,
            noise_amplitude,
            dt,
            steps,
            initial: InitialState::Stationary,
        },
        seed,
    )
}

/// Complex OU series whose real and imaginary parts are independent OU
/// processes drawn from `sub_seed(seed, 0)` and `sub_seed(seed, 1)`.
pub fn simulate_complex_langevin(
    zeta: f64,
    noise_amplitude: f64,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let re = simulate_langevin(zeta, noise_amplitude, dt, steps, sub_seed(seed, 0))?;
    let im = simulate_langevin(zeta, noise_amplitude, dt, steps, sub_seed(seed, 1))?;
    Ok(re
        .values
        .iter()
        .zip(im.values.iter())
        .map(|(a, b)| Complex64::new(*a, *b))
        .collect())
}

/// How the Green-Kubo integral is cut off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Stop where the autocovariance first reaches zero, integrating the
    /// linear interpolant up to the crossing point.
    #[default]
    FirstZero,
    /// Integrate over all lags `0..=max_lag`.
    MaxLag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub c0: f64,
    pub integral_truncation_lag: usize,
    pub zeta_implied: f64,
}

/// Mean-subtracted autocovariance `C(l) = (1/N) sum_t x_{t+l} conj(x_t)`
/// (real part) for lags `0..=max_lag`, computed by zero-padded FFT.
/// A constant series yields exact zeros.
pub fn autocovariance(series: &[Complex64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    if series.iter().all(|x| *x == series[0]) {
        return vec![0.0; max_lag + 1];
    }
    let mean = series.iter().sum::<Complex64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (b, x) in buf.iter_mut().zip(series) {
        *b = x - mean;
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for b in buf.iter_mut() {
        *b = Complex64::new(b.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / (m as f64 * n as f64);
    buf.iter().take(max_lag + 1).map(|c| c.re * scale).collect()
}

pub fn autocovariance_real(values: &[f64], max_lag: usize) -> Vec<f64> {
    let series: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    autocovariance(&series, max_lag)
}

/// Green-Kubo time `tau = (1/C(0)) int_0^T C(t) dt` by the trapezoid rule
/// on the lag grid `l * dt`.
pub fn green_kubo(acov: &[f64], dt: f64, truncation: Truncation) -> Result<TauEstimate> {
    let c0 = acov.first().copied().unwrap_or(0.0);
    if !(c0 > 0.0) {
        return Err(Error::DegenerateTrajectory(format!(
            "zero-lag autocovariance is {c0:e}"
        )));
    }
    let max_lag = acov.len() - 1;
    let crossing = match truncation {
        Truncation::FirstZero => (1..=max_lag).find(|&l| acov[l] <= 0.0),
        Truncation::MaxLag => None,
    };
    let (integral, lag) = match crossing {
        Some(m) => {
            let last = acov[m - 1];
            let frac = last / (last - acov[m]);
            (trapezoid(&acov[..m]) + 0.5 * frac * last, m)
        }
        None => (trapezoid(acov), max_lag),
    };
    let tau = integral * dt / c0;
    if !(tau > 0.0) {
        return Err(Error::DegenerateTrajectory(format!(
            "integrated autocovariance is not positive ({tau:e})"
        )));
    }
    Ok(TauEstimate {
        tau,
        c0,
        integral_truncation_lag: lag,
        zeta_implied: 1.0 / tau,
    })
}

/// Unit-spacing trapezoid sum of `y`.
fn trapezoid(y: &[f64]) -> f64 {
    match y {
        [] | [_] => 0.0,
        [first, inner @ .., last] => 0.5 * (first + last) + inner.iter().sum::<f64>(),
    }
}

fn check_max_lag(max_lag: usize, len: usize) -> Result<()> {
    if max_lag == 0 || 5 * max_lag >= len {
        return Err(Error::config(format!(
            "max_lag must satisfy 1 <= max_lag < len/5 (len = {len}), got {max_lag}"
        )));
    }
    Ok(())
}

pub fn estimate_tau(traj: &Trajectory, max_lag: usize) -> Result<TauEstimate> {
    estimate_tau_with(traj, max_lag, Truncation::FirstZero)
}

pub fn estimate_tau_with(
    traj: &Trajectory,
    max_lag: usize,
    truncation: Truncation,
) -> Result<TauEstimate> {
    check_max_lag(max_lag, traj.len())?;
    green_kubo(
        &autocovariance_real(&traj.values, max_lag),
        traj.dt,
        truncation,
    )
}

#[derive(Debug)]
pub struct ShellTau {
    pub shell_center: f64,
    pub mode_count: usize,
    pub estimate: Result<TauEstimate>,
}

/// Shell-wise sum of per-mode autocovariances.
#[derive(Debug, Clone)]
pub struct ShellAutocovariance {
    bins: ShellBinning,
    max_lag: usize,
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl ShellAutocovariance {
    pub fn new(bins: ShellBinning, max_lag: usize) -> Self {
        Self {
            bins,
            max_lag,
            sums: vec![vec![0.0; max_lag + 1]; bins.count],
            counts: vec![0; bins.count],
        }
    }

    /// Adds one mode's autocovariance with the given multiplicity (2 for a
    /// mode standing in for its conjugate mirror as well).
    pub fn add(&mut self, radius: f64, acov: &[f64], multiplicity: usize) {
        let Some(j) = self.bins.bin_of(radius) else {
            return;
        };
        for (s, c) in self.sums[j].iter_mut().zip(acov) {
            *s += c * multiplicity as f64;
        }
        self.counts[j] += multiplicity;
    }

    pub fn finish(self, dt: f64, truncation: Truncation) -> Vec<ShellTau> {
        let bins = self.bins;
        self.sums
            .into_iter()
            .zip(self.counts)
            .enumerate()
            .filter(|(_, (_, c))| *c > 0)
            .map(|(j, (sum, count))| {
                let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
                ShellTau {
                    shell_center: bins.center(j),
                    mode_count: count,
                    estimate: green_kubo(&mean, dt, truncation),
                }
            })
            .collect()
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }
}

/// Shell-resolved Green-Kubo times from a time series of spectra. Each band
/// mode contributes the real part of its temporal autocovariance; shells
/// are unit-width bins centred on integer radii.
pub fn estimate_tau_per_shell(
    snapshots: &[SpectralField],
    band: &BandMask,
    dt: f64,
    max_lag: usize,
) -> Result<Vec<ShellTau>> {
    if snapshots.len() < MIN_SNAPSHOTS {
        return Err(Error::config(format!(
            "need at least {MIN_SNAPSHOTS} snapshots, got {}",
            snapshots.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    check_max_lag(max_lag, snapshots.len())?;
    let grid = *snapshots[0].grid();
    for s in &snapshots[1..] {
        grid.ensure_same(s.grid())?;
    }
    band.check_fits(&grid)?;
    let bins = ShellBinning::around_band(band, 1.0)?;
    let modes: Vec<_> = band.modes(&grid).collect();
    if modes.is_empty() {
        return Err(Error::config("band contains no lattice modes on this grid"));
    }
    let acovs: Vec<Vec<f64>> = modes
        .par_iter()
        .map(|m| {
            let series: Vec<Complex64> =
                snapshots.iter().map(|s| s.coeffs()[[m.ix, m.iy]]).collect();
            autocovariance(&series, max_lag)
        })
        .collect();
    let mut acc = ShellAutocovariance::new(bins, max_lag);
    for (m, a) in modes.iter().zip(&acovs) {
        acc.add(m.radius(), a, 1);
    }
    Ok(acc.finish(dt, Truncation::FirstZero))
}

/// Synthetic band dynamics: every upper-half-plane band mode follows an
/// independent complex OU process with rate `zeta_of(|k|)` (mode number
/// `i` in draw order uses `sub_seed(seed, i)`); mirrors are conjugates and
/// a DC mode, if present, follows a real OU process.
pub struct ModeDynamics<'a> {
    pub grid: Grid,
    pub band: BandMask,
    pub zeta_of: &'a (dyn Fn(f64) -> f64 + Sync),
    pub noise_amplitude: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

impl ModeDynamics<'_> {
    fn upper_modes(&self) -> Result<Vec<crate::spectral::Mode>> {
        self.band.check_fits(&self.grid)?;
        let mut modes: Vec<_> = self
            .band
            .modes(&self.grid)
            .filter(|m| m.is_upper_half() || (m.kx == 0 && m.ky == 0))
            .collect();
        if modes.is_empty() {
            return Err(Error::config("band contains no lattice modes on this grid"));
        }
        modes.sort_by_key(|m| (m.ky, m.kx));
        Ok(modes)
    }

    fn series(&self, m: &crate::spectral::Mode, ordinal: usize) -> Result<Vec<Complex64>> {
        let zeta = (self.zeta_of)(m.radius());
        let seed = sub_seed(self.seed, ordinal as u64);
        if m.kx == 0 && m.ky == 0 {
            let t = simulate_langevin(zeta, self.noise_amplitude, self.dt, self.steps, seed)?;
            Ok(t.values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
        } else {
            simulate_complex_langevin(zeta, self.noise_amplitude, self.dt, self.steps, seed)
        }
    }

    /// Materialises the `steps + 1` spectra. Memory grows as
    /// `n^2 * steps`, so keep grids small.
    pub fn snapshots(&self) -> Result<Vec<SpectralField>> {
        let modes = self.upper_modes()?;
        let series = modes
            .par_iter()
            .enumerate()
            .map(|(i, m)| self.series(m, i))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![SpectralField::zeros(self.grid); self.steps + 1];
        for (m, s) in modes.iter().zip(&series) {
            for (field, v) in out.iter_mut().zip(s) {
                field.set_hermitian(m.kx, m.ky, *v);
            }
        }
        Ok(out)
    }

    /// Per-shell estimates without storing the spectra: each mode's series
    /// is reduced to its autocovariance as soon as it is generated.
    pub fn shell_tau(&self, max_lag: usize) -> Result<Vec<ShellTau>> {
        check_max_lag(max_lag, self.steps + 1)?;
        let modes = self.upper_modes()?;
        let acovs = modes
            .par_iter()
            .enumerate()
            .map(|(i, m)| Ok(autocovariance(&self.series(m, i)?, max_lag)))
            .collect::<Result<Vec<_>>>()?;
        let mut acc =
            ShellAutocovariance::new(ShellBinning::around_band(&self.band, 1.0)?, max_lag);
        for (m, a) in modes.iter().zip(&acovs) {
            let multiplicity = if m.kx == 0 && m.ky == 0 { 1 } else { 2 };
            acc.add(m.radius(), a, multiplicity);
        }
        Ok(acc.finish(self.dt, Truncation::FirstZero))
    }
}
