//! Sampled curves with per-point standard errors, and their CSV form.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() != stderr.len() {
            return Err(invalid(
                "series",
                format!(
                    "length mismatch: {} times, {} values, {} errors",
                    times.len(),
                    values.len(),
                    stderr.len()
                ),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("series", "times must be strictly increasing"));
        }
        if stderr.iter().any(|e| e.is_nan() || *e < 0.0) {
            return Err(invalid("series", "standard errors must be >= 0"));
        }
        Ok(Self {
            times,
            values,
            stderr,
        })
    }

    /// Exact curve: all errors zero.
    pub fn exact(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, values, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Points with `t` in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> TimeSeries {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= t0 && self.times[i] <= t1)
            .collect();
        TimeSeries {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            stderr: idx.iter().map(|&i| self.stderr[i]).collect(),
        }
    }

    /// Columns `t,mean,stderr`, 17 significant digits. Lines starting with
    /// `#` are written first, one per entry of `comments`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "t,mean,stderr")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(self.times[i]),
                fmt_f64(self.values[i]),
                fmt_f64(self.stderr[i])
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (mut t, mut v, mut e) = (Vec::new(), Vec::new(), Vec::new());
        for line in r.lines() {
            let line = line.map_err(|err| invalid("csv", err.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(invalid("csv", format!("expected 3 columns: {line}")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|err| invalid("csv", format!("{s}: {err}")))
            };
            t.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
            e.push(parse(cols[2])?);
        }
        Self::new(t, v, e)
    }
}

/// 17 significant digits in scientific notation; round-trips every finite `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}
