//! Seeded experiment runners and their file exports.
//!
//! Every runner is a pure function of its [`ExperimentConfig`]: trials run
//! in parallel but are collected and reduced in trial order, so the numeric
//! content of a report does not depend on the thread count.

mod config;
mod output;
mod selftest;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{
    make_annulus_bump, make_lowpass, make_teacher_gain, random_band_spectrum, AmplitudeRule,
    BandMask, BumpProfile, Multiplier, RandomFieldSpec,
};
use crate::diagnostics::{
    curl_decompose, eddy_viscosity_from_tau, real_space_fit, shell_statistics_binned,
    ClosureEstimate, RealSpaceFit, ShellBinning, ShellSpectrum,
};
use crate::error::{Error, Result};
use crate::langevin::{estimate_tau, simulate_langevin, ModeDynamics, TauEstimate};
use crate::operators::{apply_multiplier, check_band_equivalence, EquivalenceVerdict};
use crate::rng::{rng_from_seed, streams, sub_seed, PRNG_NAME};
use crate::spectral::{inverse_fft, l2_norm, linf_norm, Grid, RealField, SpectralField};

pub use config::{ExperimentConfig, ExperimentKind, Scenario};
pub use output::{
    histogram, histogram_edges, multiplier_table, Cell, ShellRow, Table, HIST_BINS_PER_DECADE,
    HIST_MAX_EXP, HIST_MIN_EXP,
};
pub use selftest::{selftest, SelfCheck};

/// Upper bound on exported scatter pairs.
pub const SCATTER_MAX_POINTS: usize = 5000;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub version: &'static str,
    pub prng: &'static str,
    pub wall_time_s: f64,
    #[serde(flatten)]
    pub details: Details,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Details {
    Counterexample(CounterexampleSummary),
    TeacherStudent(TeacherStudentSummary),
    TauDemo(TauSummary),
    CurlDemo(CurlSummary),
}

impl ExperimentReport {
    fn new(cfg: &ExperimentConfig, details: Details, tables: Vec<Table>) -> Self {
        Self {
            experiment: cfg.experiment,
            config: cfg.clone(),
            version: crate::VERSION,
            prng: PRNG_NAME,
            wall_time_s: 0.0,
            details,
            tables,
        }
    }

    pub fn table(&self, file_name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file_name == file_name)
    }

    /// Writes `report.json` and every table into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        std::fs::write(dir.join("report.json"), json)?;
        for t in &self.tables {
            t.write_to(dir)?;
        }
        Ok(())
    }
}

/// Runs the experiment named by `cfg.experiment` (and `cfg.scenario`).
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match cfg.experiment {
        ExperimentKind::Counterexample => run_counterexample(cfg),
        ExperimentKind::TeacherStudent => run_teacher_student(cfg, cfg.scenario),
        ExperimentKind::TauDemo => run_tau_demo(cfg),
        ExperimentKind::CurlDemo => run_curl_demo(cfg),
    }?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn check_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::config(format!(
            "config is for '{}', not '{}'",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleSummary {
    pub band: BandMask,
    pub q_lo: f64,
    pub q_hi: f64,
    pub q_height: f64,
    pub q_profile: BumpProfile,
    pub verdict: EquivalenceVerdict,
    /// Norms of the first trial field, whose output differences fill the histogram.
    pub omega_linf: f64,
    pub omega_l2: f64,
    pub output_diff_linf: f64,
    pub output_diff_l2: f64,
    /// `max |F - zeta G|` over the whole grid.
    pub symbol_diff_max: f64,
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Ideal low-pass `F` against `zeta G = F + Q` with `Q` an annulus bump
/// outside the low-pass band.
pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::Counterexample)?;
    let grid = cfg.grid()?;
    let nyq = grid.nyquist() as f64;
    if !(cfg.kc > 0.0 && 3.0 * cfg.kc < nyq) {
        return Err(Error::config(format!(
            "counterexample needs 0 < kc and 3*kc < n/2 = {nyq}, got kc = {}",
            cfg.kc
        )));
    }
    let trials = cfg.check_trials()?;
    let (q_lo, q_hi) = cfg.q_range();
    let f_hat = make_lowpass(grid, cfg.kc)?;
    let q = make_annulus_bump(grid, q_lo, q_hi, cfg.q_height, cfg.q_profile)?;
    let g_hat = f_hat.add(&q)?;
    let band = BandMask::disk(cfg.kc)?;

    let verdict = check_band_equivalence(&f_hat, &g_hat, band, trials, cfg.seed)?;

    let spec = RandomFieldSpec::unit_phase(band, sub_seed(cfg.seed, 0));
    let omega = inverse_fft(&random_band_spectrum(&spec, &grid)?)?;
    let diff = apply_multiplier(&f_hat, &omega)?.sub(&apply_multiplier(&g_hat, &omega)?)?;
    let hist = histogram(diff.values().iter().map(|v| v.abs()));
    let symbol_diff_max = f_hat
        .sub(&g_hat)?
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);

    let tables = vec![
        output::multiplier_table("multiplier_F.csv", &f_hat),
        output::multiplier_table("multiplier_G.csv", &g_hat),
        output::histogram_table(&hist),
    ];
    let summary = CounterexampleSummary {
        band,
        q_lo,
        q_hi,
        q_height: cfg.q_height,
        q_profile: cfg.q_profile,
        verdict,
        omega_linf: linf_norm(&omega),
        omega_l2: l2_norm(&omega),
        output_diff_linf: linf_norm(&diff),
        output_diff_l2: l2_norm(&diff),
        symbol_diff_max,
        histogram: hist,
    };
    Ok(ExperimentReport::new(
        cfg,
        Details::Counterexample(summary),
        tables,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct TeacherStudentSummary {
    pub scenario: Scenario,
    pub band: BandMask,
    pub trials: usize,
    pub field_seeds: Vec<u64>,
    pub shells: Vec<ShellRow>,
    /// Shell mean of `|H_true|` over the band modes of each shell.
    pub true_gain_shell_mean: Vec<Option<f64>>,
    /// Fit of the first trial, the one exported as scatter.
    pub fit: RealSpaceFit,
    pub fits: Vec<RealSpaceFit>,
    pub mean_slope: f64,
    pub mean_r_squared: f64,
    pub scatter_points: usize,
}

struct TeacherTrial {
    spectrum: ShellSpectrum,
    fit: RealSpaceFit,
    fields: Option<(RealField, RealField)>,
}

/// Teacher symbol of a scenario; the noise scenario shares the clean one.
pub fn teacher_symbol(
    cfg: &ExperimentConfig,
    grid: Grid,
    scenario: Scenario,
) -> Result<Multiplier> {
    let band = cfg.band()?;
    match scenario {
        Scenario::Clean | Scenario::Noise => make_teacher_gain(grid, band, cfg.zeta, 0.0, 0.0),
        Scenario::Nonlocal => {
            make_teacher_gain(grid, band, cfg.zeta, cfg.nonlocal_gain, cfg.phase_offset)
        }
    }
}

fn teacher_trial(
    cfg: &ExperimentConfig,
    grid: Grid,
    h_true: &Multiplier,
    scenario: Scenario,
    bins: &ShellBinning,
    t: usize,
) -> Result<TeacherTrial> {
    let band = cfg.band()?;
    let omega_hat = random_band_spectrum(
        &RandomFieldSpec::unit_phase(band, sub_seed(cfg.seed, t as u64)),
        &grid,
    )?;
    let mut s_hat = h_true.apply_spectral(&omega_hat)?;
    if scenario == Scenario::Noise {
        let noise = random_band_spectrum(
            &RandomFieldSpec {
                band,
                seed: sub_seed(sub_seed(cfg.seed, streams::NOISE), t as u64),
                amplitude: AmplitudeRule::ComplexGaussian,
            },
            &grid,
        )?;
        s_hat = s_hat.add(&noise.scaled(cfg.noise_std))?;
    }
    let omega = inverse_fft(&omega_hat)?;
    let s = inverse_fft(&s_hat)?;
    Ok(TeacherTrial {
        spectrum: shell_statistics_binned(&s_hat, &omega_hat, bins)?,
        fit: real_space_fit(&s, &omega)?,
        fields: (t == 0).then_some((omega, s)),
    })
}

/// Teacher field `omega` with unit-modulus random-phase coefficients on the
/// band, student target `S_hat = H_true omega_hat` (+ band-limited complex
/// Gaussian noise of standard deviation `noise_std` per mode for the noise
/// scenario). Trial `t` draws its field from `sub_seed(seed, t)`.
pub fn run_teacher_student(cfg: &ExperimentConfig, scenario: Scenario) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::TeacherStudent)?;
    let grid = cfg.grid()?;
    let band = cfg.check_band_below_nyquist()?;
    if !(cfg.zeta.is_finite() && cfg.zeta > 0.0) {
        return Err(Error::config(format!(
            "zeta must be positive, got {}",
            cfg.zeta
        )));
    }
    if !(cfg.noise_std.is_finite() && cfg.noise_std >= 0.0) {
        return Err(Error::config(format!(
            "noise_std must be >= 0, got {}",
            cfg.noise_std
        )));
    }
    let trials = cfg.check_trials()?;
    let bins = ShellBinning::around_band(&band, cfg.bin_width)?;
    let h_true = teacher_symbol(cfg, grid, scenario)?;

    let mut results = (0..trials)
        .into_par_iter()
        .map(|t| teacher_trial(cfg, grid, &h_true, scenario, &bins, t))
        .collect::<Result<Vec<_>>>()?;

    let (omega, s) = results[0]
        .fields
        .take()
        .expect("first trial keeps its fields");
    let scatter = scatter_table(&omega, &s, sub_seed(cfg.seed, streams::SCATTER));
    let spectra: Vec<ShellSpectrum> = results.iter().map(|r| r.spectrum.clone()).collect();
    let fits: Vec<RealSpaceFit> = results.iter().map(|r| r.fit).collect();
    let shells = output::shell_rows(&spectra);

    let summary = TeacherStudentSummary {
        scenario,
        band,
        trials,
        field_seeds: (0..trials).map(|t| sub_seed(cfg.seed, t as u64)).collect(),
        true_gain_shell_mean: true_gain_shell_mean(&h_true, &band, &bins),
        fit: fits[0],
        mean_slope: fits.iter().map(|f| f.slope).sum::<f64>() / trials as f64,
        mean_r_squared: fits.iter().map(|f| f.r_squared).sum::<f64>() / trials as f64,
        fits,
        scatter_points: scatter.rows.len(),
        shells: shells.clone(),
    };
    let tables = vec![output::shells_table(&shells), scatter];
    Ok(ExperimentReport::new(
        cfg,
        Details::TeacherStudent(summary),
        tables,
    ))
}

fn true_gain_shell_mean(h: &Multiplier, band: &BandMask, bins: &ShellBinning) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; bins.count];
    let mut count = vec![0usize; bins.count];
    for m in band.modes(h.grid()) {
        if let Some(j) = bins.bin_of(m.radius()) {
            sum[j] += h.values()[[m.ix, m.iy]].norm();
            count[j] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// `(omega, S)` pairs at a seeded uniform subsample of grid points, kept
/// in array order.
fn scatter_table(omega: &RealField, s: &RealField, seed: u64) -> Table {
    let w: Vec<f64> = omega.values().iter().copied().collect();
    let v: Vec<f64> = s.values().iter().copied().collect();
    let picks: Vec<usize> = if w.len() <= SCATTER_MAX_POINTS {
        (0..w.len()).collect()
    } else {
        let mut rng = rng_from_seed(seed);
        let mut idx = rand::seq::index::sample(&mut rng, w.len(), SCATTER_MAX_POINTS).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut t = Table::new("scatter.csv", &["omega", "s"]);
    for i in picks {
        t.push(vec![Cell::Real(w[i]), Cell::Real(v[i])]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct TauRow {
    pub trial: usize,
    pub seed: u64,
    pub estimate: TauEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellTauRow {
    pub shell_center: f64,
    pub mode_count: usize,
    pub estimate: Option<TauEstimate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauSummary {
    pub zeta: f64,
    pub dt: f64,
    pub steps: usize,
    pub max_lag: usize,
    pub trajectories: Vec<TauRow>,
    pub median_tau: f64,
    pub median_zeta_implied: f64,
    pub band: BandMask,
    pub shell_steps: usize,
    pub shell_max_lag: usize,
    pub shells: Vec<ShellTauRow>,
    /// Closure constants at the band centre from the shell-mean `tau`.
    pub closure: Option<ClosureEstimate>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// OU trajectories with rate `zeta` (unit stationary variance), one per
/// trial seed `sub_seed(seed, t)`, plus synthetic per-mode dynamics on the
/// `[k1, k2]` band for shell-resolved estimates.
pub fn run_tau_demo(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::TauDemo)?;
    let trials = cfg.check_trials()?;
    let grid = cfg.grid()?;
    let band = cfg.check_band_below_nyquist()?;
    if !(cfg.zeta.is_finite() && cfg.zeta > 0.0) {
        return Err(Error::config(format!(
            "zeta must be positive, got {}",
            cfg.zeta
        )));
    }
    let amplitude = (2.0 * cfg.zeta).sqrt();

    let trajectories = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = sub_seed(cfg.seed, t as u64);
            let traj = simulate_langevin(cfg.zeta, amplitude, cfg.dt, cfg.steps, seed)?;
            Ok(TauRow {
                trial: t,
                seed,
                estimate: estimate_tau(&traj, cfg.max_lag)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let median_tau = median(
        &mut trajectories
            .iter()
            .map(|r| r.estimate.tau)
            .collect::<Vec<_>>(),
    );
    let median_zeta_implied = median(
        &mut trajectories
            .iter()
            .map(|r| r.estimate.zeta_implied)
            .collect::<Vec<_>>(),
    );

    let zeta = cfg.zeta;
    let rate = move |_r: f64| zeta;
    let dynamics = ModeDynamics {
        grid,
        band,
        zeta_of: &rate,
        noise_amplitude: amplitude,
        dt: cfg.dt,
        steps: cfg.shell_steps,
        seed: sub_seed(cfg.seed, streams::MODES),
    };
    let shells: Vec<ShellTauRow> = dynamics
        .shell_tau(cfg.shell_max_lag)?
        .into_iter()
        .map(|s| {
            let (estimate, error) = match s.estimate {
                Ok(e) => (Some(e), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ShellTauRow {
                shell_center: s.shell_center,
                mode_count: s.mode_count,
                estimate,
                error,
            }
        })
        .collect();
    let shell_taus: Vec<f64> = shells
        .iter()
        .filter_map(|s| s.estimate.map(|e| e.tau))
        .collect();
    let closure = if shell_taus.is_empty() {
        None
    } else {
        let tau = shell_taus.iter().sum::<f64>() / shell_taus.len() as f64;
        let k_star = 0.5 * (cfg.k1 + cfg.k2) * grid.wavenumber_unit();
        Some(ClosureEstimate::new(
            eddy_viscosity_from_tau(tau, k_star)?,
            k_star,
            tau,
        )?)
    };

    let mut tau_table = Table::new(
        "tau.csv",
        &[
            "trial",
            "tau",
            "c0",
            "integral_truncation_lag",
            "zeta_implied",
        ],
    );
    for r in &trajectories {
        let e = r.estimate;
        tau_table.push(vec![
            Cell::Int(r.trial as i64),
            Cell::Real(e.tau),
            Cell::Real(e.c0),
            Cell::Int(e.integral_truncation_lag as i64),
            Cell::Real(e.zeta_implied),
        ]);
    }
    let mut shell_table = Table::new(
        "tau_shells.csv",
        &[
            "shell_center",
            "mode_count",
            "tau",
            "c0",
            "integral_truncation_lag",
            "zeta_implied",
        ],
    );
    for s in &shells {
        let e = s.estimate;
        shell_table.push(vec![
            Cell::Real(s.shell_center),
            Cell::Int(s.mode_count as i64),
            Cell::opt(e.map(|e| e.tau)),
            Cell::opt(e.map(|e| e.c0)),
            e.map_or(Cell::Empty, |e| Cell::Int(e.integral_truncation_lag as i64)),
            Cell::opt(e.map(|e| e.zeta_implied)),
        ]);
    }

    let summary = TauSummary {
        zeta: cfg.zeta,
        dt: cfg.dt,
        steps: cfg.steps,
        max_lag: cfg.max_lag,
        trajectories,
        median_tau,
        median_zeta_implied,
        band,
        shell_steps: cfg.shell_steps,
        shell_max_lag: cfg.shell_max_lag,
        shells,
        closure,
    };
    Ok(ExperimentReport::new(
        cfg,
        Details::TauDemo(summary),
        vec![tau_table, shell_table],
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct CurlSummary {
    pub zeta: f64,
    pub kc: f64,
    pub trials: usize,
    /// `max |H_hat|` over the grid.
    pub max_abs_h: f64,
    /// `max |F_hat - zeta G_hat|` over `k != 0`.
    pub max_f_deviation: f64,
    /// Worst residual of the recursive relation over all probes.
    pub residual_linf: f64,
}

/// Curl decomposition of a scalar filter `G_hat = lowpass(kc)` scaled by
/// `zeta`, with the relation's residual checked on `trials` random probes
/// (probe `t` draws from `sub_seed(sub_seed(seed, PROBE), t)`).
pub fn run_curl_demo(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::CurlDemo)?;
    let grid = cfg.grid()?;
    let trials = cfg.check_trials()?;
    if !cfg.zeta.is_finite() {
        return Err(Error::config("zeta must be finite"));
    }
    let g_hat = make_lowpass(grid, cfg.kc)?;
    let band = BandMask::disk(cfg.kc)?;
    let probe_seed = sub_seed(cfg.seed, streams::PROBE);

    let probes: Vec<SpectralField> = (0..trials)
        .into_par_iter()
        .map(|t| {
            random_band_spectrum(
                &RandomFieldSpec {
                    band,
                    seed: sub_seed(probe_seed, t as u64),
                    amplitude: AmplitudeRule::ComplexGaussian,
                },
                &grid,
            )
        })
        .collect::<Result<_>>()?;
    let decomps = probes
        .par_iter()
        .map(|p| curl_decompose(&g_hat, cfg.zeta, p))
        .collect::<Result<Vec<_>>>()?;
    let residual_linf = decomps.iter().map(|d| d.residual_linf).fold(0.0, f64::max);
    let first = decomps.into_iter().next().expect("at least one trial");

    let max_abs_h = first
        .h_hat
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let mut max_f_deviation = 0.0_f64;
    for m in grid.modes() {
        if m.kx == 0 && m.ky == 0 {
            continue;
        }
        let target = g_hat.values()[[m.ix, m.iy]] * cfg.zeta;
        max_f_deviation = max_f_deviation.max((first.f_hat.values()[[m.ix, m.iy]] - target).norm());
    }

    let tables = vec![
        output::multiplier_table("multiplier_H.csv", &first.h_hat),
        output::multiplier_table("multiplier_F.csv", &first.f_hat),
    ];
    let summary = CurlSummary {
        zeta: cfg.zeta,
        kc: cfg.kc,
        trials,
        max_abs_h,
        max_f_deviation,
        residual_linf,
    };
    Ok(ExperimentReport::new(
        cfg,
        Details::CurlDemo(summary),
        tables,
    ))
}
