//! CHSH on `sin α |00⟩ + cos α |11⟩` with spin observables `a·σ ⊗ b·σ`.
//!
//! The correlator is `a_z b_z + sin 2α (a_x b_x − a_y b_y)`, and the CHSH
//! value splits as `C_z + sin 2α (C_x − C_y)` where each `C_k` is the CHSH
//! combination of the products of `k` components. Since `C_z ≤ 2`, a state
//! with `α ≠ π/4` that violates CHSH has `C_x > C_y`, so the maximally
//! entangled state violates at least as much with the same observables.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{behavior, MeasurementBasis, SettingsAssignment};
use crate::state::{make_ghz, QuantumState, Scenario};

/// Allowed deviation of a Bloch vector's norm from 1.
pub const UNIT_TOL: f64 = 1e-12;
/// Allowed gap between the two CHSH evaluations, and the lemma's slack.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshParams {
    alpha: f64,
    a: [[f64; 3]; 2],
    b: [[f64; 3]; 2],
}

fn check_unit(name: &str, v: [f64; 3]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL || !norm.is_finite() {
        return Err(Error::Argument(format!("{name} has norm {norm}, expected 1")));
    }
    Ok(())
}

impl ChshParams {
    pub fn new(alpha: f64, a: [[f64; 3]; 2], b: [[f64; 3]; 2]) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Argument(format!("alpha = {alpha}")));
        }
        check_unit("a1", a[0])?;
        check_unit("a2", a[1])?;
        check_unit("b1", b[0])?;
        check_unit("b2", b[1])?;
        Ok(Self { alpha, a, b })
    }

    /// Uniform `α ∈ [0, π/2]` and four independent uniform unit vectors.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let alpha = rng.random_range(0.0..=FRAC_PI_2);
        let mut v = || random_unit(rng);
        let a = [v(), v()];
        let b = [v(), v()];
        Self { alpha, a, b }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self, i: usize) -> [f64; 3] {
        self.a[i]
    }

    pub fn b(&self, j: usize) -> [f64; 3] {
        self.b[j]
    }

    /// Same observables at a different `α`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

/// `⟨A_i B_j⟩` for `i, j ∈ {0, 1}`.
pub fn chsh_correlator(params: &ChshParams, which: (usize, usize)) -> f64 {
    let a = params.a[which.0];
    let b = params.b[which.1];
    a[2] * b[2] + (2.0 * params.alpha).sin() * (a[0] * b[0] - a[1] * b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshValue {
    /// `⟨A₁B₁⟩ + ⟨A₁B₂⟩ + ⟨A₂B₁⟩ − ⟨A₂B₂⟩`.
    pub value: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub c_z: f64,
}

impl ChshValue {
    /// `C_z + sin 2α (C_x − C_y)`.
    pub fn from_decomposition(&self, alpha: f64) -> f64 {
        self.c_z + (2.0 * alpha).sin() * (self.c_x - self.c_y)
    }
}

pub fn chsh_value(params: &ChshParams) -> ChshValue {
    let value = chsh_correlator(params, (0, 0)) + chsh_correlator(params, (0, 1))
        + chsh_correlator(params, (1, 0))
        - chsh_correlator(params, (1, 1));
    let c = |k: usize| {
        let (a, b) = (params.a, params.b);
        a[0][k] * b[0][k] + a[0][k] * b[1][k] + a[1][k] * b[0][k] - a[1][k] * b[1][k]
    };
    ChshValue { value, c_x: c(0), c_y: c(1), c_z: c(2) }
}

/// `⟨A_i B_j⟩` computed by the measurement pipeline: the state
/// `sin α |00⟩ + cos α |11⟩`, the eigenbases of `a_i·σ` and `b_j·σ`, and
/// outcome 0 read as `+1`.
pub fn correlator_via_behavior(params: &ChshParams, which: (usize, usize)) -> Result<f64> {
    let state = QuantumState::Pure(make_ghz(2, 2, params.alpha)?);
    let scenario = Scenario::new(2, vec![1, 1])?;
    let settings = SettingsAssignment::new(
        &scenario,
        vec![
            vec![MeasurementBasis::from_bloch(params.a[which.0])],
            vec![MeasurementBasis::from_bloch(params.b[which.1])],
        ],
    )?;
    let p = behavior(&state, &scenario, &settings)?;
    Ok(p.prob(&[0, 0], &[0, 0]) + p.prob(&[0, 0], &[1, 1]) - p.prob(&[0, 0], &[0, 1]) - p.prob(&[0, 0], &[1, 0]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub samples: u64,
    /// Samples with `CHSH(α) > 2`, the only ones the lemma speaks about.
    pub violating: u64,
    /// Violating samples with `CHSH(π/4) < CHSH(α) − 10⁻¹²`.
    pub deficits: u64,
    /// Largest `CHSH(α) − CHSH(π/4)` over violating samples (nonpositive
    /// when the property holds), or 0 if no sample violated.
    pub max_deficit: f64,
    /// Largest gap between the correlator sum and the decomposition.
    pub max_identity_gap: f64,
    /// Samples with `C_z > 2 + 10⁻¹²`.
    pub c_z_exceeded: u64,
    pub max_c_z: f64,
    pub pass: bool,
}

/// Random draws of `(α, a₁, a₂, b₁, b₂)` checking that the maximally
/// entangled state violates CHSH at least as much as any `α`.
pub fn appendix_lemma_check(samples: u64, seed: u64) -> Result<AppendixReport> {
    if samples == 0 {
        return Err(Error::Argument("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = AppendixReport {
        samples,
        violating: 0,
        deficits: 0,
        max_deficit: f64::NEG_INFINITY,
        max_identity_gap: 0.0,
        c_z_exceeded: 0,
        max_c_z: f64::NEG_INFINITY,
        pass: true,
    };
    for _ in 0..samples {
        let params = ChshParams::random(&mut rng);
        let v = chsh_value(&params);
        r.max_identity_gap = r.max_identity_gap.max((v.value - v.from_decomposition(params.alpha)).abs());
        r.max_c_z = r.max_c_z.max(v.c_z);
        if v.c_z > 2.0 + IDENTITY_TOL {
            r.c_z_exceeded += 1;
        }
        if v.value > 2.0 {
            r.violating += 1;
            let at_max = chsh_value(&params.with_alpha(FRAC_PI_4)).value;
            let deficit = v.value - at_max;
            r.max_deficit = r.max_deficit.max(deficit);
            if deficit > IDENTITY_TOL {
                r.deficits += 1;
            }
        }
    }
    if r.violating == 0 {
        r.max_deficit = 0.0;
    }
    r.pass = r.deficits == 0 && r.c_z_exceeded == 0 && r.max_identity_gap <= IDENTITY_TOL;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    const X: [f64; 3] = [1.0, 0.0, 0.0];
    const Z: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn single_correlators() {
        let p = ChshParams::new(FRAC_PI_4, [Z, Z], [Z, Z]).unwrap();
        assert_eq!(chsh_correlator(&p, (0, 0)), 1.0);
        let p = ChshParams::new(0.0, [X, X], [X, X]).unwrap();
        assert_eq!(chsh_correlator(&p, (0, 0)), 0.0);
        let p = ChshParams::new(FRAC_PI_4, [X, X], [X, X]).unwrap();
        assert!((chsh_correlator(&p, (0, 0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_z_gives_two() {
        let v = chsh_value(&ChshParams::new(0.3, [Z, Z], [Z, Z]).unwrap());
        assert_eq!(v.value, 2.0);
        assert_eq!(v.c_z, 2.0);
        assert_eq!((v.c_x, v.c_y), (0.0, 0.0));
    }

    #[test]
    fn tsirelson_configuration() {
        let h = FRAC_1_SQRT_2;
        let p = ChshParams::new(FRAC_PI_4, [Z, X], [[h, 0.0, h], [-h, 0.0, h]]).unwrap();
        // C_z = h + h + 0 − 0, C_x = 0 + 0 + h + h, C_y = 0
        let v = chsh_value(&p);
        assert!((v.value - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((v.c_z - 2f64.sqrt()).abs() < 1e-15);
        assert!((v.c_x - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_vectors() {
        assert!(ChshParams::new(0.1, [[1.0, 1e-5, 0.0], Z], [Z, Z]).is_err());
    }

    #[test]
    fn pipeline_agrees_with_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = ChshParams::random(&mut rng);
            for which in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let gap = (chsh_correlator(&p, which) - correlator_via_behavior(&p, which).unwrap()).abs();
                assert!(gap < 1e-10, "{gap}");
            }
        }
    }

    #[test]
    fn lemma_holds_on_small_sample() {
        let r = appendix_lemma_check(5000, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.violating > 0);
        assert!(r.max_c_z <= 2.0 + IDENTITY_TOL);
    }

    #[test]
    fn equality_at_quarter_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ChshParams::random(&mut rng).with_alpha(FRAC_PI_4);
        assert_eq!(chsh_value(&p).value, chsh_value(&p.with_alpha(FRAC_PI_4)).value);
    }
}
