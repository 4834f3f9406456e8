use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of deterministic local strategies `d^(Σ m_i)`.
pub const DEFAULT_STRATEGY_CAP: u64 = 10_000_000;

/// A Bell scenario: `N` parties measuring qudits of dimension `d`, party `i`
/// choosing among `m_i` settings.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    local_dim: usize,
    settings: Vec<usize>,
}

impl Scenario {
    pub fn new(local_dim: usize, settings: Vec<usize>) -> Result<Self> {
        Self::with_cap(local_dim, settings, DEFAULT_STRATEGY_CAP)
    }

    pub fn with_cap(local_dim: usize, settings: Vec<usize>, cap: u64) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::Scenario("at least one party is required".into()));
        }
        if local_dim < 2 {
            return Err(Error::Scenario(format!("local dimension {local_dim} < 2")));
        }
        if let Some(i) = settings.iter().position(|&m| m == 0) {
            return Err(Error::Scenario(format!("party {} has zero settings", i + 1)));
        }
        let required = strategy_count(local_dim, &settings);
        if required > cap as u128 {
            return Err(Error::CapExceeded { required, cap });
        }
        Ok(Self { local_dim, settings })
    }

    /// Parses a settings string such as `3x2x2`.
    pub fn parse(local_dim: usize, settings: &str) -> Result<Self> {
        let settings = parse_settings(settings)?;
        Self::new(local_dim, settings)
    }

    pub fn num_parties(&self) -> usize {
        self.settings.len()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    /// `d^(Σ m_i)`, the number of deterministic local strategies.
    pub fn num_strategies(&self) -> usize {
        strategy_count(self.local_dim, &self.settings) as usize
    }

    /// `Π m_i`.
    pub fn num_setting_tuples(&self) -> usize {
        self.settings.iter().product()
    }

    /// `d^N`.
    pub fn num_outcome_tuples(&self) -> usize {
        self.local_dim.pow(self.num_parties() as u32)
    }

    /// Number of entries of a behavior table, `Π m_i · d^N`.
    pub fn behavior_len(&self) -> usize {
        self.num_setting_tuples() * self.num_outcome_tuples()
    }

    /// Decodes a setting-tuple index (party 1 most significant).
    pub fn setting_tuple(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_parties()];
        for (slot, &m) in out.iter_mut().zip(&self.settings).rev() {
            *slot = index % m;
            index /= m;
        }
        out
    }

    pub fn setting_index(&self, tuple: &[usize]) -> usize {
        tuple
            .iter()
            .zip(&self.settings)
            .fold(0, |acc, (&k, &m)| acc * m + k)
    }

    /// Decodes an outcome-tuple index (party 1 most significant).
    pub fn outcome_tuple(&self, mut index: usize) -> Vec<usize> {
        let d = self.local_dim;
        let mut out = vec![0; self.num_parties()];
        for slot in out.iter_mut().rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn outcome_index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &r| acc * self.local_dim + r)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.settings.iter().map(|m| m.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

fn strategy_count(d: usize, settings: &[usize]) -> u128 {
    let total: usize = settings.iter().sum();
    (d as u128).checked_pow(total as u32).unwrap_or(u128::MAX)
}

/// Parses positive integers joined by `x`.
pub fn parse_settings(s: &str) -> Result<Vec<usize>> {
    s.trim()
        .split('x')
        .map(|tok| match tok.trim().parse::<usize>() {
            Ok(m) if m >= 1 => Ok(m),
            _ => Err(Error::Argument(format!("bad settings string {s:?}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        assert_eq!(s.num_strategies(), 16);
        assert_eq!(s.behavior_len(), 16);
        let s = Scenario::new(3, vec![2, 2]).unwrap();
        assert_eq!(s.num_strategies(), 81);
        assert_eq!(s.behavior_len(), 36);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Scenario::new(1, vec![2]).is_err());
        assert!(Scenario::new(2, vec![]).is_err());
        assert!(Scenario::new(2, vec![2, 0]).is_err());
        assert!(matches!(
            Scenario::new(2, vec![10, 10, 10]),
            Err(Error::CapExceeded { .. })
        ));
        assert!(Scenario::with_cap(2, vec![2, 2], 15).is_err());
    }

    #[test]
    fn settings_grammar() {
        assert_eq!(parse_settings("3x2x2").unwrap(), vec![3, 2, 2]);
        assert!(parse_settings("3x0").is_err());
        assert!(parse_settings("3,2").is_err());
        assert!(parse_settings("").is_err());
    }

    #[test]
    fn tuple_roundtrip() {
        let s = Scenario::new(3, vec![3, 2, 4]).unwrap();
        for i in 0..s.num_setting_tuples() {
            assert_eq!(s.setting_index(&s.setting_tuple(i)), i);
        }
        assert_eq!(s.setting_tuple(1), vec![0, 0, 1]);
        assert_eq!(s.outcome_tuple(5), vec![0, 1, 2]);
    }
}
