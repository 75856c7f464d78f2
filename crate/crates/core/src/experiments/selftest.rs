use ndarray::Array2;
use rand::Rng as _;
use serde::Serialize;

use super::{run, Details, ExperimentConfig, ExperimentKind};
use crate::bands::{make_lowpass, Multiplier};
use crate::diagnostics::{curl_decompose, zeta_from_eddy_viscosity};
use crate::error::Result;
use crate::operators::{apply_multiplier, direct_convolve, single_mode_probe};
use crate::rng::rng_from_seed;
use crate::spectral::{forward_fft, inverse_fft, l2_norm, linf_norm, spectral_l2, Grid, RealField};

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_field(grid: Grid, seed: u64) -> Result<RealField> {
    let mut rng = rng_from_seed(seed);
    let v = Array2::from_shape_fn((grid.n(), grid.n()), |_| rng.random_range(-1.0..1.0));
    RealField::new(grid, v)
}

fn plancherel() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for n in [8, 64, 256] {
        let grid = Grid::new(n, 2.0 * std::f64::consts::PI)?;
        let f = random_field(grid, n as u64)?;
        let spec = forward_fft(&f);
        let norm = l2_norm(&f);
        worst = worst.max((spectral_l2(&spec) - norm).abs() / norm);
        let back = inverse_fft(&spec)?;
        worst = worst.max(linf_norm(&back.sub(&f)?) / linf_norm(&f));
    }
    Ok((worst <= 1e-12, format!("max relative error {worst:.3e}")))
}

fn oracle_equivalence() -> Result<(bool, String)> {
    let grid = Grid::periodic(8)?;
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let m = Multiplier::new(
            grid,
            forward_fft(&random_field(grid, 100 + seed)?).into_coeffs(),
        )?;
        let f = random_field(grid, 200 + seed)?;
        let fast = apply_multiplier(&m, &f)?;
        let slow = direct_convolve(&m.kernel()?, &f)?;
        worst = worst.max(linf_norm(&fast.sub(&slow)?));
    }
    Ok((worst <= 1e-10, format!("max |FFT - direct| {worst:.3e}")))
}

fn counterexample() -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        trials: Some(2),
        ..ExperimentConfig::for_experiment(ExperimentKind::Counterexample)
    };
    let Details::Counterexample(s) = run(&cfg)?.details else {
        unreachable!("counterexample run returns counterexample details")
    };
    let v = &s.verdict;
    let ok = v.equivalent_on_band && v.max_relative_diff_linf <= 1e-12 && v.kernel_diff_l2 >= 0.01;
    Ok((
        ok,
        format!(
            "equivalent={} rel_linf={:.3e} kernel_diff_l2={:.3e}",
            v.equivalent_on_band, v.max_relative_diff_linf, v.kernel_diff_l2
        ),
    ))
}

fn converse_probe() -> Result<(bool, String)> {
    let grid = Grid::periodic(16)?;
    let m1 = make_lowpass(grid, 4.0)?;
    let mut m2 = m1.clone();
    let bumped = m2.get(2, 1) + 1e-3;
    m2.set(2, 1, bumped);
    m2.set(-2, -1, bumped.conj());
    let r = single_mode_probe(&m1, &m2, 2, 1)?;
    Ok((r >= 5e-4, format!("probe response {r:.3e}")))
}

fn curl_scalar() -> Result<(bool, String)> {
    let grid = Grid::periodic(32)?;
    let g = make_lowpass(grid, 6.0)?;
    let probe = forward_fft(&random_field(grid, 9)?);
    let d = curl_decompose(&g, 0.75, &probe)?;
    let h_max = d
        .h_hat
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    Ok((
        h_max == 0.0 && d.residual_linf <= 1e-12,
        format!("max|H|={h_max:.3e} residual={:.3e}", d.residual_linf),
    ))
}

fn eddy_identity() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(17);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let k: f64 = rng.random_range(0.5..50.0);
        let tau: f64 = rng.random_range(0.01..100.0);
        worst = worst.max((zeta_from_eddy_viscosity(1.0 / (k * k * tau), k)? * tau - 1.0).abs());
    }
    Ok((worst <= 1e-14, format!("max |zeta tau - 1| {worst:.3e}")))
}

/// Small invariant suite shipped with the binary. Each check reports its
/// own pass/fail; a check that errors counts as failed.
pub fn selftest() -> Vec<SelfCheck> {
    let checks: [(&'static str, fn() -> Result<(bool, String)>); 6] = [
        ("plancherel_round_trip", plancherel),
        ("oracle_equivalence_n8", oracle_equivalence),
        ("counterexample_verdict", counterexample),
        ("converse_single_mode_probe", converse_probe),
        ("curl_scalar_filter", curl_scalar),
        ("eddy_viscosity_identity", eddy_identity),
    ];
    checks
        .into_iter()
        .map(|(name, check)| match check() {
            Ok((passed, detail)) => SelfCheck {
                name,
                passed,
                detail,
            },
            Err(e) => SelfCheck {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}
