//! Probability of violation along one-parameter state families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Estimator, ViolationEstimate};
use crate::state::{make_ghz, make_psi3, QuantumState, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFamily {
    /// `sin α |0…0⟩ + cos α |1…1⟩`.
    QubitGhz,
    /// `sin α |0…0⟩ + (cos α/√2)(|1…1⟩ + |2…2⟩)`.
    QutritGhz,
    /// `cos θ |111⟩ + sin θ |W₃⟩`.
    Psi3Theta,
}

impl ScanFamily {
    pub fn name(self) -> &'static str {
        match self {
            ScanFamily::QubitGhz => "qubit_ghz",
            ScanFamily::QutritGhz => "qutrit_ghz",
            ScanFamily::Psi3Theta => "psi3_theta",
        }
    }

    /// The member at `angle` (radians) for `parties` parties.
    pub fn state(self, parties: usize, angle: f64) -> Result<QuantumState> {
        let pure = match self {
            ScanFamily::QubitGhz => make_ghz(parties, 2, angle)?,
            ScanFamily::QutritGhz => make_ghz(parties, 3, angle)?,
            ScanFamily::Psi3Theta => {
                if parties != 3 {
                    return Err(Error::Scenario(format!("psi3_theta has 3 parties, scenario has {parties}")));
                }
                make_psi3(angle)?
            }
        };
        Ok(QuantumState::Pure(pure))
    }

    fn check(self, scenario: &Scenario) -> Result<()> {
        let d = match self {
            ScanFamily::QutritGhz => 3,
            _ => 2,
        };
        if scenario.local_dim() != d {
            return Err(Error::Scenario(format!(
                "{} needs d = {d}, scenario has d = {}",
                self.name(),
                scenario.local_dim()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ScanFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScanFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ScanFamily::QubitGhz, ScanFamily::QutritGhz, ScanFamily::Psi3Theta]
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown scan family {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Radians.
    pub angle: f64,
    pub estimate: ViolationEstimate,
}

/// One estimate per grid angle, all with the same seed.
pub fn scan_alpha(
    family: ScanFamily,
    grid: &[f64],
    scenario: &Scenario,
    trials: u64,
    seed: u64,
) -> Result<Vec<ScanPoint>> {
    scan_alpha_with(family, grid, &Estimator::new(scenario.clone(), trials, seed))
}

/// Like [`scan_alpha`], with every other run option taken from `base`.
pub fn scan_alpha_with(family: ScanFamily, grid: &[f64], base: &Estimator) -> Result<Vec<ScanPoint>> {
    let scenario = &base.identity().scenario;
    family.check(scenario)?;
    if grid.is_empty() {
        return Err(Error::Argument("empty scan grid".into()));
    }
    grid.iter()
        .map(|&angle| {
            let state = family.state(scenario.num_parties(), angle)?;
            let label = format!("{}({:.4}deg)", family.name(), angle.to_degrees());
            let estimate = base.clone().label(label).run(&state)?.into_estimate()?;
            Ok(ScanPoint { angle, estimate })
        })
        .collect()
}

/// Indices of grid points lower than both neighbours.
pub fn local_minima(curve: &[ScanPoint]) -> Vec<usize> {
    (1..curve.len().saturating_sub(1))
        .filter(|&i| {
            let p = curve[i].estimate.p_hat;
            p < curve[i - 1].estimate.p_hat && p < curve[i + 1].estimate.p_hat
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qutrit_ghz_at_right_angle_never_violates() {
        let s = Scenario::new(3, vec![2, 2]).unwrap();
        let curve = scan_alpha(ScanFamily::QutritGhz, &[90f64.to_radians()], &s, 200, 3).unwrap();
        assert_eq!(curve[0].estimate.violations, 0);
    }

    #[test]
    fn dimension_mismatch() {
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        assert!(matches!(
            scan_alpha(ScanFamily::QutritGhz, &[0.1], &s, 10, 0),
            Err(Error::Scenario(_))
        ));
        assert!(scan_alpha(ScanFamily::Psi3Theta, &[0.1], &s, 10, 0).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in [ScanFamily::QubitGhz, ScanFamily::QutritGhz, ScanFamily::Psi3Theta] {
            assert_eq!(f.name().parse::<ScanFamily>().unwrap(), f);
        }
    }
}
