//! Result rows and their CSV / JSON-lines encoding.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::ViolationEstimate;
use crate::state::parse_settings;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(Error::Argument(format!("unknown output format {s:?}"))),
        }
    }
}

/// `100 k / n` rounded half-to-even at three decimals, computed exactly.
pub fn format_percent(k: u64, n: u64) -> String {
    assert!(n > 0 && k <= n);
    let num = 100_000u128 * k as u128;
    let n = n as u128;
    let (mut q, r) = (num / n, num % n);
    if 2 * r > n || (2 * r == n && q % 2 == 1) {
        q += 1;
    }
    format!("{}.{:03}", q / 1000, q % 1000)
}

/// One estimate as written by the tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub state: String,
    pub settings: String,
    pub dim: usize,
    pub mode: String,
    pub trials: u64,
    pub violations: u64,
    pub failures: u64,
    pub p_v_percent: String,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn from_estimate(e: &ViolationEstimate) -> Self {
        Self {
            state: e.label.clone(),
            settings: e.scenario.to_string(),
            dim: e.scenario.local_dim(),
            mode: e.mode.to_string(),
            trials: e.trials,
            violations: e.violations,
            failures: e.solver_failures,
            p_v_percent: format_percent(e.violations, e.effective_trials()),
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            seed: e.seed,
            wall_time_s: (e.wall_time * 1000.0).round() / 1000.0,
        }
    }

    /// Rebuilds the estimate the row was written from, up to wall time.
    pub fn to_estimate(&self) -> Result<ViolationEstimate> {
        let scenario = crate::state::Scenario::new(self.dim, parse_settings(&self.settings)?)?;
        let mut e = ViolationEstimate::from_counts(
            self.state.clone(),
            scenario,
            self.mode.parse()?,
            self.seed,
            self.trials,
            self.violations,
            self.failures,
        )?;
        e.wall_time = self.wall_time_s;
        Ok(e)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Argument(format!("csv: {e}"))
}

/// Writes rows of any serializable type.
pub fn write_rows<T: Serialize, W: Write>(out: W, format: Format, rows: &[T]) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(csv_error)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = io::BufWriter::new(out);
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit<T: Serialize>(path: Option<&Path>, format: Format, rows: &[T]) -> Result<()> {
    match path {
        Some(p) => write_rows(File::create(p)?, format, rows),
        None => write_rows(io::stdout().lock(), format, rows),
    }
}

/// Reads result rows, detecting JSON lines by a leading `{`.
pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        BufReader::new(text.as_bytes())
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(i, l)| {
                serde_json::from_str(&l?).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })
            })
            .collect()
    } else {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::SamplingMode;
    use crate::state::Scenario;

    #[test]
    fn percent_rounding() {
        assert_eq!(format_percent(28_318, 100_000), "28.318");
        assert_eq!(format_percent(0, 7), "0.000");
        assert_eq!(format_percent(7, 7), "100.000");
        assert_eq!(format_percent(1, 3), "33.333");
        assert_eq!(format_percent(2, 3), "66.667");
        // 0.0125% and 0.0135% are exact ties
        assert_eq!(format_percent(1, 8000), "0.012");
        assert_eq!(format_percent(27, 200_000), "0.014");
        assert_eq!(format_percent(5, 400_000), "0.001");
    }

    #[test]
    fn record_round_trip() {
        let s = Scenario::new(2, vec![3, 2]).unwrap();
        let e = ViolationEstimate::from_counts("ghz(2,30)", s, SamplingMode::Identical, 11, 1000, 123, 1).unwrap();
        let r = ResultRecord::from_estimate(&e);
        assert_eq!(r.settings, "3x2");
        assert_eq!(r.p_v_percent, "12.312");
        for format in [Format::Csv, Format::Jsonl] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("r");
            emit(Some(&path), format, std::slice::from_ref(&r)).unwrap();
            let back = read_records(&path).unwrap();
            assert_eq!(back, vec![r.clone()]);
            assert_eq!(back[0].to_estimate().unwrap(), e);
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        let e = ViolationEstimate::from_counts("x", s, SamplingMode::Independent, 0, 10, 3, 0).unwrap();
        let mut buf = Vec::new();
        write_rows(&mut buf, Format::Csv, &[ResultRecord::from_estimate(&e)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "state,settings,dim,mode,trials,violations,failures,p_v_percent,ci_low,ci_high,seed,wall_time_s"
        );
    }
}
