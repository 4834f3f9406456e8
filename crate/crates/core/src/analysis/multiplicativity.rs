//! Whether local-model probabilities multiply under tensor products.

use serde::{Deserialize, Serialize};

use crate::estimator::ViolationEstimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativityReport {
    /// `(1 − p̂_a)(1 − p̂_b)`.
    pub product: f64,
    /// `1 − p̂_ab`.
    pub joint: f64,
    /// Accepted range for `product`.
    pub low: f64,
    pub high: f64,
    pub pass: bool,
}

/// Compares `(1 − p̂_a)(1 − p̂_b)` with `1 − p̂_ab`.
///
/// The accepted range is the confidence interval of `1 − p̂_ab` widened on
/// both sides by the half-width of the product, obtained from the factors'
/// interval half-widths by first-order error propagation.
pub fn multiplicativity_check(
    a: &ViolationEstimate,
    b: &ViolationEstimate,
    ab: &ViolationEstimate,
) -> MultiplicativityReport {
    let (la, lb) = (1.0 - a.p_hat, 1.0 - b.p_hat);
    let product = la * lb;
    let h_product = ((lb * a.half_width()).powi(2) + (la * b.half_width()).powi(2)).sqrt();
    let low = 1.0 - ab.ci_high - h_product;
    let high = 1.0 - ab.ci_low + h_product;
    MultiplicativityReport {
        product,
        joint: 1.0 - ab.p_hat,
        low,
        high,
        pass: (low..=high).contains(&product),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::SamplingMode;
    use crate::state::Scenario;

    fn est(n: u64, k: u64) -> ViolationEstimate {
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        ViolationEstimate::from_counts("t", s, SamplingMode::Independent, 0, n, k, 0).unwrap()
    }

    #[test]
    fn product_factors_pass_trivially() {
        let r = multiplicativity_check(&est(1000, 0), &est(1000, 0), &est(1000, 0));
        assert_eq!(r.product, 1.0);
        assert_eq!(r.joint, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn consistent_values_pass() {
        // 1 − (1 − 0.283)² ≈ 0.486
        let r = multiplicativity_check(&est(100_000, 28_318), &est(100_000, 28_318), &est(10_000, 4_862));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn additive_guess_fails() {
        let r = multiplicativity_check(&est(100_000, 28_318), &est(100_000, 28_318), &est(10_000, 2_832));
        assert!(!r.pass);
    }
}
