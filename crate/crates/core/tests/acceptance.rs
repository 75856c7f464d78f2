//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Oracles here are computed independently of the library routes they
//! check (naive DFT sums, lattice-point counts, closed-form shell means).

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use bandeq::bands::{make_annulus_bump, make_lowpass, BandMask, BumpProfile, Multiplier};
use bandeq::diagnostics::zeta_from_eddy_viscosity;
use bandeq::experiments::{run, Details, ExperimentConfig, ExperimentKind, Scenario};
use bandeq::operators::{
    apply_multiplier, check_band_equivalence, direct_convolve, single_mode_probe,
};
use bandeq::rng::rng_from_seed;
use bandeq::spectral::{
    forward_fft, inverse_fft, l2_norm, linf_norm, spectral_l2, Grid, RealField,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64())
    })
}

fn cfg(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::for_experiment(kind)
}

fn random_field(grid: Grid, rng: &mut impl Rng) -> RealField {
    let v = Array2::from_shape_fn((grid.n(), grid.n()), |_| rng.random_range(-1.0..1.0));
    RealField::new(grid, v).unwrap()
}

fn wavenumber(n: usize, i: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// `K(x) = L^-2 sum_k M(k) exp(i 2 pi k.x / L)` by direct summation.
fn naive_kernel(m: &Multiplier) -> RealField {
    let grid = *m.grid();
    let n = grid.n();
    let l = grid.length();
    let h = l / n as f64;
    let v = Array2::from_shape_fn((n, n), |(ix, iy)| {
        let (x, y) = (ix as f64 * h, iy as f64 * h);
        let mut acc = Complex64::new(0.0, 0.0);
        for jx in 0..n {
            for jy in 0..n {
                let phase =
                    2.0 * PI * (wavenumber(n, jx) as f64 * x + wavenumber(n, jy) as f64 * y) / l;
                acc += m.values()[[jx, jy]] * Complex64::from_polar(1.0, phase);
            }
        }
        acc.re / (l * l)
    });
    RealField::new(grid, v).unwrap()
}

fn counterexample() -> Outcome {
    let start = Instant::now();
    let report = run(&cfg(ExperimentKind::Counterexample)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let Details::Counterexample(s) = &report.details else {
        unreachable!()
    };
    let v = &s.verdict;

    // ||K_Q||_2 = sqrt(sum |Q|^2) / L, Q = 0.5 on lattice points with 40 < |k| < 60.
    let lattice = (-64i64..64)
        .flat_map(|a| (-64i64..64).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            let r = ((a * a + b * b) as f64).sqrt();
            40.0 < r && r < 60.0
        })
        .count();
    let kernel_oracle = 0.5 * (lattice as f64).sqrt() / (2.0 * PI);

    ensure(v.equivalent_on_band, || "verdict not equivalent".into())?;
    ensure(v.max_relative_diff_linf <= 1e-12, || {
        format!("relative Linf diff {:.3e}", v.max_relative_diff_linf)
    })?;
    ensure(v.max_relative_diff_l2 <= 1e-12, || {
        format!("relative L2 diff {:.3e}", v.max_relative_diff_l2)
    })?;
    ensure(v.kernel_diff_l2 >= 0.01, || {
        format!("kernel diff {:.3e}", v.kernel_diff_l2)
    })?;
    ensure(
        (v.kernel_diff_l2 - kernel_oracle).abs() <= 1e-9 * kernel_oracle,
        || {
            format!(
                "kernel diff {} vs lattice oracle {}",
                v.kernel_diff_l2, kernel_oracle
            )
        },
    )?;
    within(elapsed, 5.0)?;
    Ok(format!(
        "rel_linf={:.2e} rel_l2={:.2e} kernel_diff_l2={:.4} ({:.2}s)",
        v.max_relative_diff_linf,
        v.max_relative_diff_l2,
        v.kernel_diff_l2,
        elapsed.as_secs_f64()
    ))
}

fn theorem_suite() -> Outcome {
    let start = Instant::now();
    let grid = Grid::periodic(256).unwrap();
    let mut rng = rng_from_seed(2024);
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let kc = rng.random_range(2.0..42.0_f64).floor();
        let height = rng.random_range(0.0..10.0);
        let f = make_lowpass(grid, kc).unwrap();
        let g = f
            .add(
                &make_annulus_bump(grid, 2.0 * kc, 3.0 * kc, height, BumpProfile::Constant)
                    .unwrap(),
            )
            .unwrap();
        let v = check_band_equivalence(&f, &g, BandMask::disk(kc).unwrap(), 5, i).unwrap();
        ensure(v.equivalent_on_band, || {
            format!("kc={kc} height={height}: not equivalent")
        })?;
        worst = worst
            .max(v.max_output_diff_linf)
            .max(v.max_relative_diff_linf);
    }
    ensure(worst <= 1e-11, || format!("output diff {worst:.3e}"))?;

    let f = make_lowpass(grid, 20.0).unwrap();
    let mut probe_min = f64::INFINITY;
    for _ in 0..5 {
        let (kx, ky) = loop {
            let (a, b) = (rng.random_range(-20i64..=20), rng.random_range(1i64..=20));
            if a * a + b * b <= 400 {
                break (a, b);
            }
        };
        let mut g = f.clone();
        g.set(kx, ky, g.get(kx, ky) + 1e-3);
        g.set(-kx, -ky, g.get(-kx, -ky) + 1e-3);
        let r = single_mode_probe(&f, &g, kx, ky).unwrap();
        let v = check_band_equivalence(&f, &g, BandMask::disk(20.0).unwrap(), 1, 0).unwrap();
        ensure(!v.equivalent_on_band, || {
            format!("({kx},{ky}) perturbation missed")
        })?;
        probe_min = probe_min.min(r);
    }
    ensure(probe_min >= 5e-4, || {
        format!("probe response {probe_min:.3e}")
    })?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "forward max diff {worst:.2e}; converse min probe {probe_min:.3e} ({:.2}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn teacher(
    scenario: Scenario,
    trials: usize,
) -> Result<bandeq::experiments::TeacherStudentSummary, String> {
    let mut c = cfg(ExperimentKind::TeacherStudent);
    c.scenario = scenario;
    c.trials = Some(trials);
    match run(&c).map_err(|e| e.to_string())?.details {
        Details::TeacherStudent(s) => Ok(s),
        _ => unreachable!(),
    }
}

fn clean_teacher() -> Outcome {
    let s = teacher(Scenario::Clean, 5)?;
    for row in &s.shells {
        let g = row.gain_abs.ok_or("empty shell")?;
        ensure((g - 0.75).abs() <= 1e-10, || {
            format!("shell {} gain {g}", row.shell_center)
        })?;
        let c = row.coherence_min.ok_or("empty shell")?;
        ensure(c >= 1.0 - 1e-10, || {
            format!("shell {} coherence {c}", row.shell_center)
        })?;
    }
    for f in &s.fits {
        ensure((f.slope - 0.75).abs() <= 1e-10, || {
            format!("slope {}", f.slope)
        })?;
        ensure(f.r_squared >= 1.0 - 1e-10, || format!("R2 {}", f.r_squared))?;
    }
    Ok(format!(
        "{} shells, slope {:.15}, R2 {:.15}",
        s.shells.len(),
        s.mean_slope,
        s.mean_r_squared
    ))
}

fn noise_teacher() -> Outcome {
    let s = teacher(Scenario::Noise, 50)?;
    let clean = teacher(Scenario::Clean, 50)?;
    let mut inside = 0;
    let mut report = Vec::new();
    for row in &s.shells {
        let (g, se) = (
            row.gain_abs.ok_or("empty shell")?,
            row.gain_abs_stderr.ok_or("no stderr")?,
        );
        let z = (g - 0.75) / se;
        report.push(format!("{:.0}:{z:+.2}", row.shell_center));
        if z.abs() < 2.0 {
            inside += 1;
        }
        let c = row.coherence_max.ok_or("empty shell")?;
        ensure(c < 1.0, || {
            format!("shell {} coherence {c}", row.shell_center)
        })?;
    }
    let frac = inside as f64 / s.shells.len() as f64;
    ensure(frac >= 0.9, || {
        format!(
            "only {inside}/{} shells within 2 SE (z = {})",
            s.shells.len(),
            report.join(" ")
        )
    })?;
    ensure(s.mean_r_squared < clean.mean_r_squared, || {
        format!(
            "R2 noise {} vs clean {}",
            s.mean_r_squared, clean.mean_r_squared
        )
    })?;
    Ok(format!(
        "{inside}/{} shells within 2 SE (z = {}); mean R2 {:.6}",
        s.shells.len(),
        report.join(" "),
        s.mean_r_squared
    ))
}

fn nonlocal_teacher() -> Outcome {
    let s = teacher(Scenario::Nonlocal, 5)?;
    let clean = teacher(Scenario::Clean, 5)?;
    let mut gains = Vec::new();
    for row in &s.shells {
        let c = row.shell_center;
        // shell mean of 0.75 (1 + 0.6 (|k| - 10) / 4) over lattice points in [c - 1/2, c + 1/2) and [8, 12]
        let mut sum = 0.0;
        let mut count = 0;
        for a in -13i64..=13 {
            for b in -13i64..=13 {
                let r = ((a * a + b * b) as f64).sqrt();
                let last = c == 12.0;
                let in_bin = r >= c - 0.5 && (r < c + 0.5 || (last && r <= c + 0.5));
                if in_bin && (8.0..=12.0).contains(&r) {
                    sum += 0.75 * (1.0 + 0.6 * (r - 10.0) / 4.0);
                    count += 1;
                }
            }
        }
        let oracle = sum / count as f64;
        let g = row.gain_abs.ok_or("empty shell")?;
        ensure((g - oracle).abs() <= 0.02, || {
            format!("shell {c}: gain {g} vs oracle {oracle}")
        })?;
        gains.push(g);
    }
    ensure(gains.windows(2).all(|w| w[1] > w[0]), || {
        format!("not monotone: {gains:?}")
    })?;
    let edge = gains.last().unwrap() - gains.first().unwrap();
    ensure(edge >= 0.3, || format!("edge difference {edge}"))?;
    ensure(s.mean_r_squared < clean.mean_r_squared, || {
        format!(
            "R2 nonlocal {} vs clean {}",
            s.mean_r_squared, clean.mean_r_squared
        )
    })?;
    Ok(format!(
        "edge difference {edge:.4}; mean R2 {:.6}",
        s.mean_r_squared
    ))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(77);
    let mut worst = 0.0_f64;
    for n in [4, 8, 16] {
        let grid = Grid::new(n, 3.0).unwrap();
        for _ in 0..50 {
            let m = Multiplier::new(
                grid,
                forward_fft(&random_field(grid, &mut rng)).into_coeffs(),
            )
            .unwrap();
            let f = random_field(grid, &mut rng);
            let fast = apply_multiplier(&m, &f).unwrap();
            let slow = direct_convolve(&naive_kernel(&m), &f).unwrap();
            worst = worst.max(linf_norm(&fast.sub(&slow).unwrap()));
        }
    }
    ensure(worst <= 1e-10, || format!("max abs diff {worst:.3e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "150 pairs, max abs diff {worst:.2e} ({:.2}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn plancherel() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut worst = 0.0_f64;
    for n in [8, 64, 256] {
        let grid = Grid::new(n, 2.0 * PI).unwrap();
        let f = random_field(grid, &mut rng);
        let spec = forward_fft(&f);
        let h2 = grid.spacing() * grid.spacing();
        let phys = (f.values().iter().map(|v| v * v).sum::<f64>() * h2).sqrt();
        let freq =
            (spec.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * h2 / (n * n) as f64).sqrt();
        worst = worst.max((freq - phys).abs() / phys);
        worst = worst.max((spectral_l2(&spec) - l2_norm(&f)).abs() / l2_norm(&f));
        let back = inverse_fft(&spec).unwrap();
        worst = worst.max(linf_norm(&back.sub(&f).unwrap()) / linf_norm(&f));
    }
    ensure(worst <= 1e-12, || format!("relative error {worst:.3e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn green_kubo() -> Outcome {
    let start = Instant::now();
    let mut c = cfg(ExperimentKind::TauDemo);
    c.zeta = 0.5;
    c.trials = Some(20);
    let Details::TauDemo(s) = run(&c).map_err(|e| e.to_string())?.details else {
        unreachable!()
    };
    let m = s.median_zeta_implied;
    ensure(s.trajectories.len() == 20, || "expected 20 seeds".into())?;
    ensure((0.45..=0.55).contains(&m), || {
        format!("median zeta_implied {m}")
    })?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "median zeta_implied {m:.4} over 20 seeds ({:.2}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn curl() -> Outcome {
    let mut c = cfg(ExperimentKind::CurlDemo);
    c.trials = Some(20);
    let report = run(&c).map_err(|e| e.to_string())?;
    let Details::CurlDemo(s) = &report.details else {
        unreachable!()
    };
    ensure(s.max_abs_h == 0.0, || format!("max |H| {:e}", s.max_abs_h))?;
    ensure(s.max_f_deviation == 0.0, || {
        format!("max |F - zeta G| {:e}", s.max_f_deviation)
    })?;
    ensure(s.residual_linf <= 1e-12, || {
        format!("residual {:e}", s.residual_linf)
    })?;
    Ok(format!(
        "H == 0, F == zeta G off k=0, residual {:.2e} over 20 probes",
        s.residual_linf
    ))
}

fn eddy_identity() -> Outcome {
    let mut rng = rng_from_seed(99);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let k: f64 = rng.random_range(0.1..100.0);
        let tau: f64 = rng.random_range(1e-3..1e3);
        let zeta = zeta_from_eddy_viscosity(1.0 / (k * k * tau), k).map_err(|e| e.to_string())?;
        worst = worst.max((zeta * tau - 1.0).abs());
    }
    ensure(worst <= 1e-14, || format!("max |zeta tau - 1| {worst:e}"))?;
    Ok(format!("max |zeta tau - 1| {worst:.2e}"))
}

fn cli_run(args: &[&str], out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_bandeq"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&status.stderr).trim()
        )
    })
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn bit_stable() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 6] = [
        &["counterexample"],
        &["teacher-student", "--scenario", "clean"],
        &["teacher-student", "--scenario", "noise"],
        &["teacher-student", "--scenario", "nonlocal"],
        &["tau"],
        &["curl"],
    ];
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        let dirs: Vec<_> = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|&(threads, tag)| {
                let d = root.path().join(format!("{i}{tag}"));
                cli_run(args, &d, threads).map(|_| csv_files(&d))
            })
            .collect::<Result<_, _>>()?;
        ensure(!dirs[0].is_empty(), || format!("{args:?} wrote no CSV"))?;
        for other in &dirs[1..] {
            ensure(&dirs[0] == other, || {
                format!("{args:?} CSV output differs between runs")
            })?;
        }
        compared += dirs[0].len();
    }
    Ok(format!(
        "{compared} CSV files identical across reruns and --threads 1/4"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("counterexample", counterexample),
        ("equivalence theorem suite", theorem_suite),
        ("clean teacher-student", clean_teacher),
        ("noise teacher-student", noise_teacher),
        ("nonlocal teacher-student", nonlocal_teacher),
        ("fft vs direct convolution", oracle_equivalence),
        ("plancherel and round trip", plancherel),
        ("green-kubo estimator", green_kubo),
        ("curl decomposition", curl),
        ("eddy-viscosity identity", eddy_identity),
        ("bit-stable reproducibility", bit_stable),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
