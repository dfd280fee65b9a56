//! Stability regions over two fixed dwell times.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{SwitchedLinearSystem, ValidationErrors};
use crate::stability::{check_with, StabilityOptions};

/// Default `|normalized margin|` below which a cell is flagged marginal.
pub const DEFAULT_MARGINAL_BAND: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("axis {axis}: need 0 <= lo <= hi and step > 0 (got {lo}:{hi}:{step})")]
    BadAxis { axis: usize, lo: f64, hi: f64, step: f64 },
    #[error("axis mode {0} out of range")]
    ModeOutOfRange(usize),
    #[error("both axes select mode {0}")]
    SameMode(usize),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Invalid(#[from] ValidationErrors),
}

/// One swept dwell time: `d_mode` over the inclusive lattice
/// `lo, lo + step, …, ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub mode: usize,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(mode: usize, lo: f64, hi: f64, step: f64) -> Self {
        Self { mode, lo, hi, step }
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice values, each computed as `lo + k * step` (no accumulation).
    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Supplies the matrices, generator, and the dwell times of modes not
    /// on an axis.
    pub base: SwitchedLinearSystem,
    pub axes: [Axis; 2],
    pub threads: usize,
    pub marginal_band: f64,
    pub options: StabilityOptions,
}

impl SweepConfig {
    pub fn new(base: SwitchedLinearSystem, axes: [Axis; 2]) -> Self {
        Self { base, axes, threads: 1, marginal_band: DEFAULT_MARGINAL_BAND, options: StabilityOptions::default() }
    }

    /// The `[0, 5]²` lattice with step 0.1 over modes 0 and 1.
    pub fn default_square(base: SwitchedLinearSystem) -> Self {
        Self::new(base, [Axis::new(0, 0.0, 5.0, 0.1), Axis::new(1, 0.0, 5.0, 0.1)])
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    fn check(&self) -> Result<(), SweepError> {
        for (k, ax) in self.axes.iter().enumerate() {
            if !(ax.lo >= 0.0 && ax.hi >= ax.lo && ax.step > 0.0) || !ax.hi.is_finite() {
                return Err(SweepError::BadAxis { axis: k, lo: ax.lo, hi: ax.hi, step: ax.step });
            }
            if ax.mode >= self.base.m() {
                return Err(SweepError::ModeOutOfRange(ax.mode));
            }
        }
        if self.axes[0].mode == self.axes[1].mode {
            return Err(SweepError::SameMode(self.axes[0].mode));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "Stable",
            Verdict::Unstable => "Unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub d1: f64,
    pub d2: f64,
    pub verdict: Verdict,
    /// Normalized margin, see
    /// [`StabilityVerdict::normalized_margin`](crate::stability::StabilityVerdict::normalized_margin).
    pub margin: f64,
    pub marginal: bool,
}

/// Verdict lattice; `cells[i2 * d1.len() + i1]` sits at `(d1[i1], d2[i2])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub axis_modes: [usize; 2],
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub cells: Vec<Cell>,
}

impl RegionGrid {
    pub fn cell(&self, i1: usize, i2: usize) -> &Cell {
        &self.cells[i2 * self.d1.len() + i1]
    }

    pub fn is_stable(&self, i1: usize, i2: usize) -> bool {
        self.cell(i1, i2).verdict == Verdict::Stable
    }

    pub fn stable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.verdict == Verdict::Stable).count()
    }

    /// One line per cell, `d1,d2,verdict,margin,marginal`, floats with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("d1,d2,verdict,margin,marginal\n");
        for c in &self.cells {
            writeln!(s, "{:.16e},{:.16e},{},{:.16e},{}", c.d1, c.d2, c.verdict, c.margin, c.marginal)
                .expect("string write");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "d1,d2,verdict,margin,marginal")) => {}
            _ => return Err(CsvError { line: 1, msg: "missing header".into() }),
        }
        let mut cells = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| CsvError { line: idx + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(err("expected 5 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
            let verdict = match fields[2] {
                "Stable" => Verdict::Stable,
                "Unstable" => Verdict::Unstable,
                _ => return Err(err("bad verdict")),
            };
            let marginal = fields[4].parse::<bool>().map_err(|_| err("bad marginal flag"))?;
            cells.push(Cell { d1: num(fields[0])?, d2: num(fields[1])?, verdict, margin: num(fields[3])?, marginal });
        }
        let mut d1: Vec<f64> = Vec::new();
        let mut d2: Vec<f64> = Vec::new();
        for c in &cells {
            if !d1.contains(&c.d1) {
                d1.push(c.d1);
            }
            if !d2.contains(&c.d2) {
                d2.push(c.d2);
            }
        }
        if d1.len() * d2.len() != cells.len() {
            return Err(CsvError { line: 0, msg: "cells do not form a full lattice".into() });
        }
        Ok(Self { axis_modes: [0, 1], d1, d2, cells })
    }

    /// SVG with stable cells shaded and marginal cells hatched.
    pub fn to_svg(&self) -> String {
        const CELL: f64 = 8.0;
        const LEFT: f64 = 60.0;
        const TOP: f64 = 20.0;
        const BOTTOM: f64 = 50.0;
        const RIGHT: f64 = 20.0;
        let (n1, n2) = (self.d1.len(), self.d2.len());
        let (w, h) = (n1 as f64 * CELL, n2 as f64 * CELL);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            LEFT + w + RIGHT,
            TOP + h + BOTTOM,
            LEFT + w + RIGHT,
            TOP + h + BOTTOM
        );
        s.push_str(
            r##"<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="4" stroke="#c62828" stroke-width="1.5"/></pattern></defs>
"##,
        );
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{w}" height="{h}" fill="white" stroke="black"/>"#);
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                let c = self.cell(i1, i2);
                let x = LEFT + i1 as f64 * CELL;
                let y = TOP + (n2 - 1 - i2) as f64 * CELL;
                if c.verdict == Verdict::Stable {
                    let _ = writeln!(
                        s,
                        r##"<rect class="stable" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#9e9e9e"/>"##
                    );
                }
                if c.marginal {
                    let _ = writeln!(
                        s,
                        r#"<rect class="marginal" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="url(#hatch)"/>"#
                    );
                }
            }
        }
        let ticks = |n: usize| (n / 5).max(1);
        for (k, v) in self.d1.iter().enumerate().step_by(ticks(n1)) {
            let x = LEFT + (k as f64 + 0.5) * CELL;
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
                TOP + h,
                TOP + h + 4.0,
                TOP + h + 15.0,
                fmt_tick(*v)
            );
        }
        for (k, v) in self.d2.iter().enumerate().step_by(ticks(n2)) {
            let y = TOP + h - (k as f64 + 0.5) * CELL;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/><text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
                LEFT - 4.0,
                LEFT - 6.0,
                y + 3.0,
                fmt_tick(*v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">d{}</text>"#,
            LEFT + w / 2.0,
            TOP + h + 38.0,
            self.axis_modes[0] + 1
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">d{}</text>"#,
            TOP + h / 2.0,
            TOP + h / 2.0,
            self.axis_modes[1] + 1
        );
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Error)]
#[error("line {line}: {msg}")]
pub struct CsvError {
    pub line: usize,
    pub msg: String,
}

/// One stability decision per lattice point, evaluated on `config.threads`
/// workers. Output order and values do not depend on the worker count.
pub fn sweep(config: &SweepConfig) -> Result<RegionGrid, SweepError> {
    config.check()?;
    let base = config.base.validate()?;
    let [ax1, ax2] = config.axes;
    let (d1, d2) = (ax1.points(), ax2.points());
    let coords: Vec<(f64, f64)> = d2.iter().flat_map(|&b| d1.iter().map(move |&a| (a, b))).collect();

    let eval = |&(a, b): &(f64, f64)| -> Result<Cell, SweepError> {
        let mut dwell = base.system().dwell_times();
        dwell[ax1.mode] = a;
        dwell[ax2.mode] = b;
        let sys = base.with_dwell(&dwell)?;
        let v = check_with(&sys, &config.options);
        let margin = v.normalized_margin();
        Ok(Cell {
            d1: a,
            d2: b,
            verdict: if v.is_stable() { Verdict::Stable } else { Verdict::Unstable },
            margin,
            marginal: v.is_marginal() || margin.abs() <= config.marginal_band,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let cells = pool.install(|| coords.par_iter().map(eval).collect::<Result<Vec<_>, _>>())?;
    Ok(RegionGrid { axis_modes: [ax1.mode, ax2.mode], d1, d2, cells })
}

/// Writes `<prefix>.csv` and `<prefix>.svg`.
pub fn render_region(grid: &RegionGrid, prefix: impl AsRef<Path>) -> io::Result<(PathBuf, PathBuf)> {
    if grid.cells.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty grid"));
    }
    let prefix = prefix.as_ref();
    let csv = with_suffix(prefix, "csv");
    let svg = with_suffix(prefix, "svg");
    fs::write(&csv, grid.to_csv())?;
    fs::write(&svg, grid.to_svg())?;
    Ok((csv, svg))
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
