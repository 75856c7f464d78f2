use std::path::Path;

use serde::Serialize;

use crate::bands::Multiplier;
use crate::diagnostics::ShellSpectrum;
use crate::error::Result;

/// One CSV cell. Reals are written with 17 significant digits; absent
/// values become empty cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Empty,
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Empty => String::new(),
        }
    }

    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file_name: &str, header: &[&'static str]) -> Self {
        Self {
            file_name: file_name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render()))?;
        }
        w.into_inner()
            .map_err(|e| crate::Error::Serialization(e.to_string()))
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(&self.file_name), self.to_csv_bytes()?)?;
        Ok(())
    }
}

/// Multiplier values on the half-plane `ky >= 0`, rows ordered by `ky`
/// then `kx`.
pub fn multiplier_table(file_name: &str, m: &Multiplier) -> Table {
    let grid = *m.grid();
    let nyq = grid.nyquist();
    let mut t = Table::new(file_name, &["k_x", "k_y", "value_re", "value_im"]);
    for ky in 0..nyq {
        for kx in -nyq..nyq {
            let v = m.get(kx, ky);
            t.push(vec![
                Cell::Int(kx),
                Cell::Int(ky),
                Cell::Real(v.re),
                Cell::Real(v.im),
            ]);
        }
    }
    t
}

/// Trial-averaged shell table. `gain_re`/`gain_im`/`gain_arg` describe the
/// mean complex gain, `gain_abs` is the mean of the per-trial magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellRow {
    pub shell_center: f64,
    pub mode_count: usize,
    pub gain_re: Option<f64>,
    pub gain_im: Option<f64>,
    pub gain_abs: Option<f64>,
    pub gain_arg: Option<f64>,
    /// Standard error of `gain_abs` across trials (needs two trials).
    pub gain_abs_stderr: Option<f64>,
    pub coherence: Option<f64>,
    pub coherence_min: Option<f64>,
    pub coherence_max: Option<f64>,
}

pub fn shell_rows(spectra: &[ShellSpectrum]) -> Vec<ShellRow> {
    let first = &spectra[0];
    (0..first.len())
        .map(|j| {
            let gains: Vec<_> = spectra.iter().filter_map(|s| s.gain[j]).collect();
            let cohs: Vec<f64> = spectra.iter().filter_map(|s| s.coherence[j]).collect();
            let mut row = ShellRow {
                shell_center: first.shell_centers[j],
                mode_count: first.mode_count[j],
                gain_re: None,
                gain_im: None,
                gain_abs: None,
                gain_arg: None,
                gain_abs_stderr: None,
                coherence: None,
                coherence_min: None,
                coherence_max: None,
            };
            if gains.len() == spectra.len() && !gains.is_empty() {
                let k = gains.len() as f64;
                let mean = gains.iter().sum::<num_complex::Complex64>() / k;
                let mags: Vec<f64> = gains.iter().map(|g| g.norm()).collect();
                let mean_abs = mags.iter().sum::<f64>() / k;
                row.gain_re = Some(mean.re);
                row.gain_im = Some(mean.im);
                row.gain_abs = Some(mean_abs);
                row.gain_arg = Some(mean.arg());
                if gains.len() >= 2 {
                    let var = mags.iter().map(|m| (m - mean_abs).powi(2)).sum::<f64>() / (k - 1.0);
                    row.gain_abs_stderr = Some((var / k).sqrt());
                }
                row.coherence = Some(cohs.iter().sum::<f64>() / k);
                row.coherence_min = Some(cohs.iter().cloned().fold(f64::INFINITY, f64::min));
                row.coherence_max = Some(cohs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            }
            row
        })
        .collect()
}

pub fn shells_table(rows: &[ShellRow]) -> Table {
    let mut t = Table::new(
        "shells.csv",
        &[
            "shell_center",
            "mode_count",
            "gain_re",
            "gain_im",
            "gain_abs",
            "gain_arg",
            "coherence",
        ],
    );
    for r in rows {
        t.push(vec![
            Cell::Real(r.shell_center),
            Cell::Int(r.mode_count as i64),
            Cell::opt(r.gain_re),
            Cell::opt(r.gain_im),
            Cell::opt(r.gain_abs),
            Cell::opt(r.gain_arg),
            Cell::opt(r.coherence),
        ]);
    }
    t
}

/// Decades covered by the difference histogram and bins per decade.
pub const HIST_MIN_EXP: i32 = -18;
pub const HIST_MAX_EXP: i32 = -8;
pub const HIST_BINS_PER_DECADE: usize = 4;

/// Bin edges: `0`, the log-spaced edges from `1e-18` to `1e-8`, and `+inf`,
/// so that exact zeros and large differences are both counted.
pub fn histogram_edges() -> Vec<f64> {
    let steps = (HIST_MAX_EXP - HIST_MIN_EXP) as usize * HIST_BINS_PER_DECADE;
    let mut edges = vec![0.0];
    edges.extend((0..=steps).map(|j| {
        let decade = HIST_MIN_EXP + (j / HIST_BINS_PER_DECADE) as i32;
        let sub = (j % HIST_BINS_PER_DECADE) as f64 / HIST_BINS_PER_DECADE as f64;
        // decade edges are the correctly rounded powers of ten
        format!("1e{decade}").parse::<f64>().unwrap() * 10f64.powf(sub)
    }));
    edges.push(f64::INFINITY);
    edges
}

/// Counts of `values` in `[edges[j], edges[j+1])`; every finite
/// non-negative value lands in exactly one bin.
pub fn histogram(values: impl Iterator<Item = f64>) -> Vec<(f64, f64, usize)> {
    let edges = histogram_edges();
    let last = edges.len() - 2;
    let mut counts = vec![0usize; last + 1];
    for v in values {
        let j = edges.partition_point(|e| *e <= v).saturating_sub(1);
        counts[j.min(last)] += 1;
    }
    edges
        .windows(2)
        .zip(counts)
        .map(|(w, c)| (w[0], w[1], c))
        .collect()
}

pub fn histogram_table(bins: &[(f64, f64, usize)]) -> Table {
    let mut t = Table::new("hist.csv", &["bin_lo", "bin_hi", "count"]);
    for &(lo, hi, c) in bins {
        t.push(vec![Cell::Real(lo), Cell::Real(hi), Cell::Int(c as i64)]);
    }
    t
}
