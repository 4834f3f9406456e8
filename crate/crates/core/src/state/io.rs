//! Text format for density matrices.
//!
//! ```text
//! # optional comment lines
//! N d
//! <d^N rows of d^N whitespace-separated entries written re+imj>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::DensityMatrix;
use crate::error::{Error, Result};

pub fn load_density_matrix(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_density_matrix(&text)
}

pub fn parse_density_matrix(text: &str) -> Result<DensityMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        msg: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line,
            msg: format!("expected integer, got {s:?}"),
        })
    };
    if fields.len() != 2 {
        return Err(Error::Parse { line, msg: "header must be `N d`".into() });
    }
    let parties = parse_usize(fields[0])?;
    let dim = parse_usize(fields[1])?;
    if parties == 0 || dim < 2 {
        return Err(Error::Parse { line, msg: format!("invalid shape N={parties}, d={dim}") });
    }
    let n = dim
        .checked_pow(parties as u32)
        .filter(|&n| n <= 4096)
        .ok_or(Error::Parse { line, msg: "matrix too large".into() })?;

    let mut entries = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for row in 0..n {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("expected {n} rows, found {row}"),
        })?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != n {
            return Err(Error::Parse {
                line,
                msg: format!("expected {n} entries, found {}", toks.len()),
            });
        }
        for (col, tok) in toks.iter().enumerate() {
            entries[(row, col)] = parse_complex(tok).ok_or_else(|| Error::Parse {
                line,
                msg: format!("bad complex number {tok:?}"),
            })?;
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, msg: "trailing data".into() });
    }
    DensityMatrix::new(parties, dim, entries)
}

/// Parses `re`, `imj`, or `re±imj`.
pub(crate) fn parse_complex(tok: &str) -> Option<Complex64> {
    let Some(body) = tok.strip_suffix('j') else {
        return tok.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().ok()?;
            let im = body[i..].parse::<f64>().ok()?;
            Some(Complex64::new(re, im))
        }
        None => body.parse::<f64>().ok().map(|im| Complex64::new(0.0, im)),
    }
}

pub fn write_density_matrix(rho: &DensityMatrix) -> String {
    let mut out = format!("{} {}\n", rho.parties(), rho.dim());
    let m = rho.entries();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| {
                let z = m[(i, j)];
                let mut s = String::new();
                write!(s, "{:e}{:+e}j", z.re, z.im).expect("write to string");
                s
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_ghz;

    #[test]
    fn complex_tokens() {
        assert_eq!(parse_complex("0.5-0.5j"), Some(Complex64::new(0.5, -0.5)));
        assert_eq!(parse_complex("1"), Some(Complex64::new(1.0, 0.0)));
        assert_eq!(parse_complex("-2j"), Some(Complex64::new(0.0, -2.0)));
        assert_eq!(parse_complex("1e-3+2.5e-4j"), Some(Complex64::new(1e-3, 2.5e-4)));
        assert_eq!(parse_complex("-1e+2-3E-1j"), Some(Complex64::new(-100.0, -0.3)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("1+j"), None);
    }

    #[test]
    fn identity_over_four() {
        let text = "# maximally mixed\n2 2\n\
            0.25+0j 0 0 0\n0 0.25 0 0\n0 0 0.25 0\n0 0 0 0.25+0j\n";
        let rho = parse_density_matrix(text).unwrap();
        assert!(rho.eigenvalues().iter().all(|e| (e - 0.25).abs() < 1e-12));
    }

    #[test]
    fn trace_error_reported() {
        let text = "1 2\n0.5 0\n0 0.4\n";
        assert!(matches!(parse_density_matrix(text), Err(Error::Trace(t)) if (t - 0.9).abs() < 1e-12));
    }

    #[test]
    fn ghz_projector_file() {
        let h = "0.5+0j";
        let z = "0+0j";
        let text = format!(
            "2 2\n{h} {z} {z} {h}\n{z} {z} {z} {z}\n{z} {z} {z} {z}\n{h} {z} {z} {h}\n"
        );
        let rho = parse_density_matrix(&text).unwrap();
        let expected = make_ghz(2, 2, std::f64::consts::FRAC_PI_4)
            .unwrap()
            .to_density_matrix();
        assert!((rho.entries() - expected.entries()).camax() < 1e-12);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(parse_density_matrix(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_density_matrix("1 2\n1 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_density_matrix("1 2\n1 0\n0 0 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_density_matrix("1 2\n1 0\n0 x\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_density_matrix("1 2\n1 0\n0 0\n1 1\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let rho = make_ghz(2, 3, 0.4).unwrap().to_density_matrix();
        let back = parse_density_matrix(&write_density_matrix(&rho)).unwrap();
        assert!((back.entries() - rho.entries()).camax() < 1e-15);
    }
}
