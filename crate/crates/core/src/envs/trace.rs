//! Episode trace export: `t,state_0..,action_0..,r,g1..,done` as CSV.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub utilities: Vec<f64>,
    pub done: bool,
}

/// One episode, each row recording the state an action was taken in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn shape(&self) -> (usize, usize, usize) {
        self.rows
            .first()
            .map(|r| (r.state.len(), r.action.len(), r.utilities.len()))
            .unwrap_or((0, 0, 0))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (ds, da, dg) = self.shape();
        let mut header = vec!["t".to_string()];
        header.extend((0..ds).map(|i| format!("state_{i}")));
        header.extend((0..da).map(|i| format!("action_{i}")));
        header.push("r".into());
        header.extend((1..=dg).map(|i| format!("g{i}")));
        header.push("done".into());
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            if (row.state.len(), row.action.len(), row.utilities.len()) != (ds, da, dg) {
                return Err(Error::Validation("trace rows have inconsistent widths".into()));
            }
            let mut fields = vec![row.t.to_string()];
            fields.extend(row.state.iter().chain(&row.action).map(|v| format!("{v:.8e}")));
            fields.push(format!("{:.8e}", row.reward));
            fields.extend(row.utilities.iter().map(|v| format!("{v:.8e}")));
            fields.push(u8::from(row.done).to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trace file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let count = |prefix: &str| cols.iter().filter(|c| c.starts_with(prefix)).count();
        let (ds, da) = (count("state_"), count("action_"));
        let dg = cols.iter().filter(|c| c.len() > 1 && c.starts_with('g')).count();
        if cols.first() != Some(&"t") || cols.last() != Some(&"done") || cols.len() != ds + da + dg + 3 {
            return Err(Error::Parse(format!("unrecognized trace header '{header}'")));
        }
        let mut trace = Self::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::Parse(format!("trace line {} has {} fields", n + 2, f.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("trace line {}: '{s}': {e}", n + 2)))
            };
            let nums = |range: std::ops::Range<usize>| f[range].iter().map(|s| num(s)).collect::<Result<Vec<_>>>();
            trace.push(TraceRow {
                t: f[0]
                    .parse()
                    .map_err(|e| Error::Parse(format!("trace line {}: {e}", n + 2)))?,
                state: nums(1..1 + ds)?,
                action: nums(1 + ds..1 + ds + da)?,
                reward: num(f[1 + ds + da])?,
                utilities: nums(2 + ds + da..2 + ds + da + dg)?,
                done: match f[cols.len() - 1] {
                    "1" => true,
                    "0" => false,
                    other => return Err(Error::Parse(format!("trace line {}: bad done flag '{other}'", n + 2))),
                },
            });
        }
        Ok(trace)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = EpisodeTrace::new();
        for i in 0..3 {
            t.push(TraceRow {
                t: i,
                state: vec![0.1 * i as f64, -1.0, 2.5e-7, 3.0],
                action: vec![-0.25],
                reward: 1.0,
                utilities: vec![0.0, 1.0],
                done: i == 2,
            });
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,state_0,state_1,state_2,state_3,action_0,r,g1,g2,done\n"));
        assert_eq!(EpisodeTrace::read_csv(&buf[..]).unwrap(), t);
    }
}
