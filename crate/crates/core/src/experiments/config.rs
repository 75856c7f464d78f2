use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bands::{BandMask, BumpProfile};
use crate::error::{Error, Result};
use crate::spectral::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Counterexample,
    TeacherStudent,
    TauDemo,
    CurlDemo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::TeacherStudent => "teacher_student",
            ExperimentKind::TauDemo => "tau_demo",
            ExperimentKind::CurlDemo => "curl_demo",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            ExperimentKind::Counterexample | ExperimentKind::TeacherStudent => 5,
            ExperimentKind::TauDemo | ExperimentKind::CurlDemo => 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Clean,
    Noise,
    Nonlocal,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Scenario::Clean),
            "noise" => Ok(Scenario::Noise),
            "nonlocal" => Ok(Scenario::Nonlocal),
            other => Err(Error::config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Flat run configuration. Every field has a default, so a config file
/// only lists what it changes; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scenario: Scenario,
    pub n: usize,
    pub length: f64,
    /// Low-pass cutoff of the counterexample (and the curl-demo filter).
    pub kc: f64,
    pub k1: f64,
    pub k2: f64,
    pub zeta: f64,
    pub noise_std: f64,
    pub nonlocal_gain: f64,
    pub phase_offset: f64,
    pub seed: u64,
    /// Random fields, seeds or probes per run; `None` picks a per-experiment default.
    pub trials: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub bin_width: f64,
    pub q_height: f64,
    pub q_profile: BumpProfile,
    /// Inner radius of the counterexample bump; `None` means `2 kc`.
    pub q_lo: Option<f64>,
    /// Outer radius of the counterexample bump; `None` means `3 kc`.
    pub q_hi: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub max_lag: usize,
    pub shell_steps: usize,
    pub shell_max_lag: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Counterexample,
            scenario: Scenario::Clean,
            n: 256,
            length: 2.0 * std::f64::consts::PI,
            kc: 20.0,
            k1: 8.0,
            k2: 12.0,
            zeta: 0.75,
            noise_std: 0.02,
            nonlocal_gain: 0.6,
            phase_offset: 0.0,
            seed: 1,
            trials: None,
            output_dir: None,
            bin_width: 1.0,
            q_height: 0.5,
            q_profile: BumpProfile::Constant,
            q_lo: None,
            q_hi: None,
            dt: 0.01,
            steps: 1_000_000,
            max_lag: 20_000,
            shell_steps: 100_000,
            shell_max_lag: 5_000,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length)
    }

    pub fn trials(&self) -> usize {
        self.trials
            .unwrap_or_else(|| self.experiment.default_trials())
    }

    /// `[k1, k2]` annulus of the teacher and tau experiments.
    pub fn band(&self) -> Result<BandMask> {
        BandMask::annulus(self.k1, self.k2)
    }

    pub fn q_range(&self) -> (f64, f64) {
        (
            self.q_lo.unwrap_or(2.0 * self.kc),
            self.q_hi.unwrap_or(3.0 * self.kc),
        )
    }

    pub(crate) fn check_trials(&self) -> Result<usize> {
        match self.trials() {
            0 => Err(Error::config("trials must be at least 1")),
            t => Ok(t),
        }
    }

    pub(crate) fn check_band_below_nyquist(&self) -> Result<BandMask> {
        let grid = self.grid()?;
        let band = self.band()?;
        if !(self.k1 > 0.0) {
            return Err(Error::config(format!(
                "k1 must be positive, got {}",
                self.k1
            )));
        }
        band.check_fits(&grid)?;
        Ok(band)
    }
}
