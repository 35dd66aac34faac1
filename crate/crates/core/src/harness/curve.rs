//! Learning-curve rows and their CSV form.
//!
//! Header: `episode,return,j_g1,..,j_gp,branch,td_error`. Floats are
//! printed with 9 significant digits so identical runs give identical bytes.
//! Wall-clock time is kept out of this file (see [`TimingLog`]) because it
//! would break the byte-for-byte determinism of the curve.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::safe_rl::BranchDecision;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    /// Cumulative return of the episode, starting from −250.
    pub cumulative_return: f64,
    /// Constraint estimates `Ĵ^i_g` the episode's updates were gated on.
    pub constraints: Vec<f64>,
    pub branch: BranchDecision,
    /// Mean sorted-atom TD error of the episode's critic updates (0 if none ran).
    pub td_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

pub fn curve_header(num_constraints: usize) -> String {
    let mut h = String::from("episode,return");
    for i in 1..=num_constraints {
        h.push_str(&format!(",j_g{i}"));
    }
    h.push_str(",branch,td_error");
    h
}

fn format_row(r: &CurveRow) -> String {
    let mut line = format!("{},{:.8e}", r.episode, r.cumulative_return);
    for j in &r.constraints {
        line.push_str(&format!(",{j:.8e}"));
    }
    line.push_str(&format!(",{},{:.8e}", r.branch, r.td_error));
    line
}

impl LearningCurve {
    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cumulative_return).collect()
    }

    pub fn write_csv<W: Write>(&self, num_constraints: usize, mut w: W) -> Result<()> {
        writeln!(w, "{}", curve_header(num_constraints))?;
        for r in &self.rows {
            writeln!(w, "{}", format_row(r))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty curve file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[0] != "episode" || cols[1] != "return" {
            return Err(Error::Parse(format!("unexpected curve header '{header}'")));
        }
        let p = cols.len() - 4;
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::Parse(format!("curve row {}: expected {} fields", n + 1, cols.len())));
            }
            let float = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("curve row {}: '{s}': {e}", n + 1)))
            };
            let row = CurveRow {
                episode: f[0]
                    .parse()
                    .map_err(|e| Error::Parse(format!("curve row {}: episode: {e}", n + 1)))?,
                cumulative_return: float(f[1])?,
                constraints: f[2..2 + p].iter().map(|s| float(s)).collect::<Result<_>>()?,
                branch: f[2 + p].parse()?,
                td_error: float(f[3 + p])?,
            };
            if let Some(prev) = rows.last().map(|r: &CurveRow| r.episode) {
                if row.episode <= prev {
                    return Err(Error::Parse(format!("curve row {}: episode index not increasing", n + 1)));
                }
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }
}

/// Appends curve rows to a file as they are produced.
pub struct CurveWriter {
    out: BufWriter<File>,
}

impl CurveWriter {
    pub fn create(path: impl AsRef<Path>, num_constraints: usize) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", curve_header(num_constraints))?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, row: &CurveRow) -> Result<()> {
        writeln!(self.out, "{}", format_row(row))?;
        self.out.flush()?;
        Ok(())
    }
}

/// Per-episode wall time, written next to the curve.
pub struct TimingLog {
    out: BufWriter<File>,
}

impl TimingLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "episode,seconds")?;
        Ok(Self { out })
    }

    pub fn append(&mut self, episode: usize, seconds: f64) -> Result<()> {
        writeln!(self.out, "{episode},{seconds:.6}")?;
        self.out.flush()?;
        Ok(())
    }
}
