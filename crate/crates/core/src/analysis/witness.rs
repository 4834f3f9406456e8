//! Genuine tripartite entanglement from the violation frequency.
//!
//! For three qubits with two settings each, any biseparable state has
//! `P_V ≤ 2(π − 3)`, the two-qubit maximum. A confidence interval lying
//! entirely above that value certifies genuine tripartite entanglement.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::ViolationEstimate;

/// `2(π − 3)`, the largest probability of violation of a two-qubit state
/// with two settings per party.
pub const BISEPARABLE_BOUND: f64 = 2.0 * (PI - 3.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WitnessVerdict {
    Witnessed,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub verdict: WitnessVerdict,
    pub bound: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    /// `(p̂ − bound) / σ̂` with the binomial standard error.
    pub z_score: f64,
}

pub fn gme_witness(estimate: &ViolationEstimate) -> Result<WitnessReport> {
    let s = &estimate.scenario;
    if s.local_dim() != 2 || s.settings() != [2, 2, 2] {
        return Err(Error::Scenario(format!(
            "the witness applies to three qubits with two settings each, got d={} settings={s}",
            s.local_dim()
        )));
    }
    let n = estimate.effective_trials() as f64;
    let p = estimate.p_hat;
    let se = (p * (1.0 - p) / n).sqrt();
    let z_score = if se > 0.0 {
        (p - BISEPARABLE_BOUND) / se
    } else if p > BISEPARABLE_BOUND {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    Ok(WitnessReport {
        verdict: if estimate.ci_low > BISEPARABLE_BOUND {
            WitnessVerdict::Witnessed
        } else {
            WitnessVerdict::Inconclusive
        },
        bound: BISEPARABLE_BOUND,
        p_hat: p,
        ci_low: estimate.ci_low,
        z_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::SamplingMode;
    use crate::state::Scenario;

    fn estimate(settings: Vec<usize>, trials: u64, violations: u64) -> ViolationEstimate {
        ViolationEstimate::from_counts(
            "t",
            Scenario::new(2, settings).unwrap(),
            SamplingMode::Independent,
            0,
            trials,
            violations,
            0,
        )
        .unwrap()
    }

    #[test]
    fn bound_value() {
        assert!((BISEPARABLE_BOUND - 0.283185307).abs() < 1e-9);
    }

    #[test]
    fn clear_excess_is_witnessed() {
        let r = gme_witness(&estimate(vec![2, 2, 2], 100_000, 74_688)).unwrap();
        assert_eq!(r.verdict, WitnessVerdict::Witnessed);
        assert!(r.z_score > 10.0);
    }

    #[test]
    fn value_at_bound_is_inconclusive() {
        let r = gme_witness(&estimate(vec![2, 2, 2], 100_000, 28_317)).unwrap();
        assert_eq!(r.verdict, WitnessVerdict::Inconclusive);
    }

    #[test]
    fn wrong_scenario() {
        assert!(matches!(gme_witness(&estimate(vec![2, 2], 10, 1)), Err(Error::Scenario(_))));
    }
}
