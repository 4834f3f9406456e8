//! Replays estimator trials through the independent locality tests.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::trial_settings;
use crate::local::{
    build_lp_with, max_abs_chsh, vertex_membership_oracle, FeasibilitySolver, LpStructure, VerdictKind,
    VERTEX_ORACLE_CAP,
};
use crate::measurement::{behavior, SamplingMode};
use crate::state::{QuantumState, Scenario};

/// Trials whose largest `|CHSH|` lies within this distance of 2 are not
/// compared against the CHSH test.
pub const CHSH_EXCLUSION: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub index: u64,
    pub oracle: String,
    pub solver: VerdictKind,
    pub expected: VerdictKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub trials: u64,
    pub chsh_compared: u64,
    pub chsh_excluded: u64,
    pub vertex_compared: u64,
    pub nonlocal: u64,
    pub disagreements: Vec<Disagreement>,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Runs trials `0..trials` of the estimator's sampling scheme and compares
/// the main solver with the CHSH test (two qubits, two settings each) and
/// with the vertex-enumeration test (when the scenario is small enough).
pub fn oracle_check(
    state: &QuantumState,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    mode: SamplingMode,
    tol: f64,
) -> Result<OracleReport> {
    let use_chsh = scenario.local_dim() == 2 && scenario.settings() == [2, 2];
    let use_vertex = scenario.num_strategies() <= VERTEX_ORACLE_CAP;
    if !use_chsh && !use_vertex {
        return Err(Error::Scenario(format!("no independent test applies to scenario {scenario}")));
    }
    let structure = Arc::new(LpStructure::new(scenario)?);
    let mut solver = FeasibilitySolver::new(tol);
    let mut report = OracleReport {
        trials,
        chsh_compared: 0,
        chsh_excluded: 0,
        vertex_compared: 0,
        nonlocal: 0,
        disagreements: Vec::new(),
    };
    for index in 0..trials {
        let settings = trial_settings(scenario, seed, index, mode)?;
        let p = behavior(state, scenario, &settings)?;
        let verdict = solver.solve(&build_lp_with(Arc::clone(&structure), &p)?)?.kind;
        if verdict == VerdictKind::Nonlocal {
            report.nonlocal += 1;
        }
        let mut compare = |oracle: &str, expected: VerdictKind| {
            if expected != verdict {
                report.disagreements.push(Disagreement {
                    index,
                    oracle: oracle.into(),
                    solver: verdict,
                    expected,
                });
            }
        };
        if use_chsh {
            let s = max_abs_chsh(&p)?;
            if (s - 2.0).abs() <= CHSH_EXCLUSION {
                report.chsh_excluded += 1;
            } else {
                let expected = if s > 2.0 { VerdictKind::Nonlocal } else { VerdictKind::Local };
                compare("chsh", expected);
                report.chsh_compared += 1;
            }
        }
        if use_vertex {
            compare("vertex", vertex_membership_oracle(&p, tol)?);
            report.vertex_compared += 1;
        }
    }
    Ok(report)
}
