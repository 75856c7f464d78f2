use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bandeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandeq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flag_beats_file_beats_default() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.toml");
    std::fs::write(&cfg_path, "kc = 12.0\nseed = 5\n").unwrap();
    let cfg = cfg_path.to_str().unwrap();

    // (use file, flag value) -> expected (kc, seed)
    let cases: [(bool, Option<&str>, f64, u64); 4] = [
        (false, None, 20.0, 1),
        (true, None, 12.0, 5),
        (false, Some("15"), 15.0, 1),
        (true, Some("15"), 15.0, 5),
    ];
    for (i, (use_file, flag, kc, seed)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let mut args = vec![
            "counterexample",
            "--trials",
            "1",
            "--out",
            out.to_str().unwrap(),
        ];
        if use_file {
            args.extend(["--config", cfg]);
        }
        if let Some(v) = flag {
            args.extend(["--kc", v]);
        }
        let o = bandeq(&args);
        assert!(o.status.success(), "case {i}: {}", stderr(&o));
        let r = report(&out);
        assert_eq!(r["config"]["kc"].as_f64().unwrap(), kc, "case {i}");
        assert_eq!(r["config"]["seed"].as_u64().unwrap(), seed, "case {i}");
    }
}

#[test]
fn file_output_dir_and_alias() {
    let tmp = tempfile::tempdir().unwrap();
    let from_file = tmp.path().join("from_file");
    let cfg_path = tmp.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "output_dir = {:?}\ntrials = 1\n",
            from_file.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = bandeq(&["curl", "--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_file.join("multiplier_H.csv").exists());

    let alias = tmp.path().join("alias");
    let o = bandeq(&[
        "curl",
        "--config",
        cfg_path.to_str().unwrap(),
        "--output-dir",
        alias.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(alias.join("report.json").exists());
}

#[test]
fn teacher_student_writes_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("clean");
    let o = bandeq(&[
        "teacher-student",
        "--scenario",
        "clean",
        "--n",
        "256",
        "--k1",
        "8",
        "--k2",
        "12",
        "--zeta",
        "0.75",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.json", "shells.csv", "scatter.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = report(&out);
    assert_eq!(r["experiment"], "teacher_student");
    assert_eq!(r["teacher_student"]["scenario"], "clean");
}

#[test]
fn counterexample_writes_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ce");
    let o = bandeq(&[
        "counterexample",
        "--q-profile",
        "cosine-taper",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "report.json",
        "multiplier_F.csv",
        "multiplier_G.csv",
        "hist.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(report(&out)["config"]["q_profile"], "cosine-taper");
}

#[test]
fn configuration_errors_exit_one_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = tmp.path().join("bad.toml");
    std::fs::write(&bad_key, "k_c = 3.0\n").unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["counterexample", "--kc", "200", "--n", "256", "--out", out],
        vec!["counterexample", "--bogus-flag", "1"],
        vec![
            "counterexample",
            "--config",
            bad_key.to_str().unwrap(),
            "--out",
            out,
        ],
        vec![
            "counterexample",
            "--config",
            "/nonexistent/run.toml",
            "--out",
            out,
        ],
        vec!["teacher-student", "--scenario", "loud", "--out", out],
        vec!["teacher-student", "--noise-std", "-0.1", "--out", out],
        vec!["tau", "--dt", "1.0", "--out", out],
        vec!["counterexample", "--threads", "0", "--out", out],
        vec!["frobnicate"],
        vec![],
    ];
    for args in cases {
        let o = bandeq(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        let err = stderr(&o);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err:?}");
    }
}

#[test]
fn version_names_prng() {
    let o = bandeq(&["--version"]);
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(
        s.contains(bandeq::VERSION) && s.contains(bandeq::rng::PRNG_NAME),
        "{s}"
    );
}

#[test]
fn selftest_reports_every_check() {
    let o = bandeq(&["selftest"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let s = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<_> = s.lines().collect();
    assert!(lines.len() >= 5);
    assert!(lines.iter().all(|l| l.starts_with("PASS ")), "{s}");
}

#[test]
fn seed_determines_output() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, tag: &str| {
        let out = tmp.path().join(tag);
        let o = bandeq(&[
            "teacher-student",
            "--scenario",
            "noise",
            "--trials",
            "2",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(out.join("scatter.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "c"), run("4", "d"));
}
