use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandeq::bands::BumpProfile;
use bandeq::experiments::{self, ExperimentConfig, ExperimentKind, Scenario};
use bandeq::rng::PRNG_NAME;
use bandeq::{Error, VERSION};

#[derive(Parser, Debug)]
#[command(
    name = "bandeq",
    about = "Band-limited operator equivalence experiments",
    disable_version_flag = true,
    allow_negative_numbers = true
)]
struct Cli {
    /// Print the library version and PRNG identifier.
    #[arg(long, short = 'V')]
    version: bool,

    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Low-pass filter against a filter with an out-of-band bump.
    Counterexample(RunArgs),
    /// Shell gain and coherence recovery for a known teacher symbol.
    TeacherStudent(RunArgs),
    /// Green-Kubo decorrelation times of Langevin trajectories.
    Tau(RunArgs),
    /// Direct/feedback decomposition of the curl of a filtered field.
    Curl(RunArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

/// Each override mirrors a config key (`--noise-std` sets `noise_std`).
#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with flat config keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, visible_alias = "output-dir")]
    out: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    kc: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    nonlocal_gain: Option<f64>,
    #[arg(long)]
    phase_offset: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    q_height: Option<f64>,
    #[arg(long)]
    q_profile: Option<BumpProfile>,
    #[arg(long)]
    q_lo: Option<f64>,
    #[arg(long)]
    q_hi: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    max_lag: Option<usize>,
    #[arg(long)]
    shell_steps: Option<usize>,
    #[arg(long)]
    shell_max_lag: Option<usize>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($field:ident),* ; $($opt:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
        $(if let Some(v) = $args.$opt { $cfg.$opt = Some(v); })*
    };
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    fn resolve(self, kind: ExperimentKind) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = kind;
        let args = self;
        overlay!(cfg, args;
            scenario, n, length, kc, k1, k2, zeta, noise_std, nonlocal_gain, phase_offset,
            seed, bin_width, q_height, q_profile, dt, steps, max_lag, shell_steps, shell_max_lag;
            trials, q_lo, q_hi
        );
        if let Some(dir) = args.out {
            cfg.output_dir = Some(dir);
        }
        Ok(cfg)
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    let line = msg.to_string();
    let line = line
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("error");
    eprintln!("bandeq: {line}");
    ExitCode::from(code)
}

fn exit_for(e: &Error) -> ExitCode {
    fail(if e.is_configuration() { 1 } else { 2 }, e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => fail(1, e.render().to_string().trim_start_matches("error: ")),
            };
        }
    };
    if cli.version {
        println!("bandeq {VERSION} (prng {PRNG_NAME})");
        return ExitCode::SUCCESS;
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return fail(1, "--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            return fail(2, e);
        }
    }
    let (kind, args) = match cli.command {
        None => return fail(1, "missing subcommand (try --help)"),
        Some(Command::Selftest) => return selftest(),
        Some(Command::Counterexample(a)) => (ExperimentKind::Counterexample, a),
        Some(Command::TeacherStudent(a)) => (ExperimentKind::TeacherStudent, a),
        Some(Command::Tau(a)) => (ExperimentKind::TauDemo, a),
        Some(Command::Curl(a)) => (ExperimentKind::CurlDemo, a),
    };
    let cfg = match args.resolve(kind) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    match experiments::run(&cfg).and_then(|r| r.write(&dir)) {
        Ok(()) => {
            println!("{}: wrote {}", kind.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => exit_for(&e),
    }
}

fn selftest() -> ExitCode {
    let checks = experiments::selftest();
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
