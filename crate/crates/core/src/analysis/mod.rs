//! Post-processing of estimates: fits, the tripartite witness, the
//! product test, angle scans, the CHSH(α) identities and solver cross-checks.

mod chsh;
mod fit;
mod multiplicativity;
mod oracle_check;
mod scan;
mod witness;

pub use chsh::{
    appendix_lemma_check, chsh_correlator, chsh_value, correlator_via_behavior, AppendixReport, ChshParams,
    ChshValue, IDENTITY_TOL, UNIT_TOL,
};
pub use fit::{fit_exponential, FitResult, XDefinition};
pub use multiplicativity::{multiplicativity_check, MultiplicativityReport};
pub use oracle_check::{oracle_check, Disagreement, OracleReport, CHSH_EXCLUSION};
pub use scan::{local_minima, scan_alpha, scan_alpha_with, ScanFamily, ScanPoint};
pub use witness::{gme_witness, WitnessReport, WitnessVerdict, BISEPARABLE_BOUND};
