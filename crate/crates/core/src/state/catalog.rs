//! Named states: generalized GHZ, Dicke, ψ₃(θ), and the fixed four-qubit and
//! three-qutrit states.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DensityMatrix, PureState, QuantumState};
use crate::error::{Error, Result};

const ANGLE_SLACK: f64 = 1e-12;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn basis_index(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &r| acc * d + r)
}

/// Builds a state from `(coefficient, digits)` terms, normalizing at the end.
fn from_terms(parties: usize, dim: usize, terms: &[(f64, &[usize])]) -> Result<PureState> {
    let mut amps = vec![zero(); dim.pow(parties as u32)];
    for &(coef, digits) in terms {
        amps[basis_index(digits, dim)] += Complex64::new(coef, 0.0);
    }
    PureState::normalized(parties, dim, amps)
}

fn check_angle(name: &str, angle: f64) -> Result<()> {
    if !(-ANGLE_SLACK..=FRAC_PI_2 + ANGLE_SLACK).contains(&angle) {
        return Err(Error::Argument(format!(
            "{name} = {angle} rad is outside [0, π/2]"
        )));
    }
    Ok(())
}

/// `sin α |0…0⟩ + cos α |1…1⟩` for qubits, and
/// `sin α |0…0⟩ + (cos α/√2)(|1…1⟩ + |2…2⟩)` for qutrits.
pub fn make_ghz(parties: usize, dim: usize, alpha: f64) -> Result<PureState> {
    check_angle("alpha", alpha)?;
    if parties == 0 {
        return Err(Error::Argument("GHZ state needs at least one party".into()));
    }
    let (s, c) = alpha.sin_cos();
    let mut amps = vec![zero(); dim.pow(parties as u32)];
    let all = |r: usize| basis_index(&vec![r; parties], dim);
    match dim {
        2 => {
            amps[all(0)] = Complex64::new(s, 0.0);
            amps[all(1)] = Complex64::new(c, 0.0);
        }
        3 => {
            amps[all(0)] = Complex64::new(s, 0.0);
            amps[all(1)] = Complex64::new(c * FRAC_1_SQRT_2, 0.0);
            amps[all(2)] = Complex64::new(c * FRAC_1_SQRT_2, 0.0);
        }
        _ => {
            return Err(Error::Argument(format!(
                "GHZ family is defined for d = 2 or 3, got {dim}"
            )))
        }
    }
    PureState::normalized(parties, dim, amps)
}

/// Qubit Dicke state with `excitations` ones; `e = 1` is the W state.
pub fn make_dicke(parties: usize, excitations: usize) -> Result<PureState> {
    if excitations == 0 || excitations >= parties {
        return Err(Error::Argument(format!(
            "Dicke excitations must lie in 1..={}, got {excitations}",
            parties.saturating_sub(1)
        )));
    }
    let amps = (0..1usize << parties)
        .map(|i| {
            if i.count_ones() as usize == excitations {
                Complex64::new(1.0, 0.0)
            } else {
                zero()
            }
        })
        .collect();
    PureState::normalized(parties, 2, amps)
}

/// `cos θ |111⟩ + sin θ |W₃⟩`.
pub fn make_psi3(theta: f64) -> Result<PureState> {
    check_angle("theta", theta)?;
    let w = make_dicke(3, 1)?;
    let (s, c) = theta.sin_cos();
    let mut amps: Vec<Complex64> = w.amplitudes().iter().map(|a| a * s).collect();
    amps[7] += Complex64::new(c, 0.0);
    PureState::normalized(3, 2, amps)
}

/// `|0…0⟩` on `parties` qudits.
pub fn make_product_zero(parties: usize, dim: usize) -> Result<PureState> {
    let mut amps = vec![zero(); dim.pow(parties as u32)];
    amps[0] = Complex64::new(1.0, 0.0);
    PureState::new(parties, dim, amps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedState {
    Singlet4,
    Cluster4,
    Aharonov3,
    QutritDickeQ1,
    QutritDickeQ2,
    QutritDickeQ3,
    Smolin4,
    Werner2,
}

impl NamedState {
    pub const ALL: [NamedState; 8] = [
        NamedState::Singlet4,
        NamedState::Cluster4,
        NamedState::Aharonov3,
        NamedState::QutritDickeQ1,
        NamedState::QutritDickeQ2,
        NamedState::QutritDickeQ3,
        NamedState::Smolin4,
        NamedState::Werner2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedState::Singlet4 => "singlet4",
            NamedState::Cluster4 => "cluster4",
            NamedState::Aharonov3 => "aharonov3",
            NamedState::QutritDickeQ1 => "qutrit_dicke_Q1",
            NamedState::QutritDickeQ2 => "qutrit_dicke_Q2",
            NamedState::QutritDickeQ3 => "qutrit_dicke_Q3",
            NamedState::Smolin4 => "smolin4",
            NamedState::Werner2 => "werner2",
        }
    }
}

impl fmt::Display for NamedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NamedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedState::ALL
            .into_iter()
            .find(|n| n.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown state name {s:?}")))
    }
}

/// Builds one of the fixed named states.
pub fn make_named(name: NamedState) -> Result<QuantumState> {
    let state = match name {
        NamedState::Singlet4 => {
            let a = 1.0 / 3f64.sqrt();
            let b = -1.0 / 12f64.sqrt();
            QuantumState::Pure(from_terms(
                4,
                2,
                &[
                    (a, &[0, 0, 1, 1]),
                    (a, &[1, 1, 0, 0]),
                    (b, &[0, 1, 0, 1]),
                    (b, &[0, 1, 1, 0]),
                    (b, &[1, 0, 0, 1]),
                    (b, &[1, 0, 1, 0]),
                ],
            )?)
        }
        NamedState::Cluster4 => QuantumState::Pure(from_terms(
            4,
            2,
            &[
                (0.5, &[0, 0, 0, 0]),
                (0.5, &[0, 0, 1, 1]),
                (0.5, &[1, 1, 0, 0]),
                (-0.5, &[1, 1, 1, 1]),
            ],
        )?),
        NamedState::Aharonov3 => {
            let a = 1.0 / 6f64.sqrt();
            QuantumState::Pure(from_terms(
                3,
                3,
                &[
                    (a, &[0, 1, 2]),
                    (a, &[1, 2, 0]),
                    (a, &[2, 0, 1]),
                    (-a, &[0, 2, 1]),
                    (-a, &[1, 0, 2]),
                    (-a, &[2, 1, 0]),
                ],
            )?)
        }
        NamedState::QutritDickeQ1 => QuantumState::Pure(symmetric_qutrit(&[(1.0, [0, 0, 1])])?),
        NamedState::QutritDickeQ2 => {
            QuantumState::Pure(symmetric_qutrit(&[(2.0, [0, 1, 1]), (1.0, [0, 0, 2])])?)
        }
        NamedState::QutritDickeQ3 => {
            QuantumState::Pure(symmetric_qutrit(&[(2.0, [1, 1, 1]), (1.0, [0, 1, 2])])?)
        }
        NamedState::Smolin4 => QuantumState::Mixed(smolin4()?),
        NamedState::Werner2 => QuantumState::Mixed(werner2()?),
    };
    Ok(state)
}

/// Sums each term over its distinct permutations of the three parties.
fn symmetric_qutrit(terms: &[(f64, [usize; 3])]) -> Result<PureState> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut amps = vec![zero(); 27];
    for &(coef, digits) in terms {
        let mut seen = Vec::new();
        for p in PERMS {
            let permuted = [digits[p[0]], digits[p[1]], digits[p[2]]];
            if !seen.contains(&permuted) {
                seen.push(permuted);
                amps[basis_index(&permuted, 3)] += Complex64::new(coef, 0.0);
            }
        }
    }
    PureState::normalized(3, 3, amps)
}

/// The four two-qubit Bell states Φ⁺, Φ⁻, Ψ⁺, Ψ⁻.
fn bell_states() -> [PureState; 4] {
    let h = FRAC_1_SQRT_2;
    let mk = |v: [f64; 4]| {
        PureState::new(2, 2, v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .expect("Bell state is normalized")
    };
    [
        mk([h, 0.0, 0.0, h]),
        mk([h, 0.0, 0.0, -h]),
        mk([0.0, h, h, 0.0]),
        mk([0.0, h, -h, 0.0]),
    ]
}

/// `(1/4) Σ_i |Φ_i⟩⟨Φ_i| ⊗ |Φ_i⟩⟨Φ_i|` over the four Bell states.
fn smolin4() -> Result<DensityMatrix> {
    let mut acc = DMatrix::from_element(16, 16, zero());
    for bell in bell_states() {
        let pair = bell.tensor(&bell)?;
        acc += pair.to_density_matrix().entries() * Complex64::new(0.25, 0.0);
    }
    DensityMatrix::new(4, 2, acc)
}

/// `(1/√2)|GHZ₂⟩⟨GHZ₂| + (1 − 1/√2) 𝟙/4`.
fn werner2() -> Result<DensityMatrix> {
    let v = FRAC_1_SQRT_2;
    let ghz = make_ghz(2, 2, std::f64::consts::FRAC_PI_4)?.to_density_matrix();
    let noise = DensityMatrix::maximally_mixed(2, 2)?;
    mix(&[ghz, noise], &[v, 1.0 - v])
}

/// Convex combination of density matrices.
pub fn mix(states: &[DensityMatrix], weights: &[f64]) -> Result<DensityMatrix> {
    if states.is_empty() || states.len() != weights.len() {
        return Err(Error::Argument(format!(
            "{} states but {} weights",
            states.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Argument("mixture weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Argument(format!("mixture weights sum to {total}")));
    }
    let first = &states[0];
    if let Some(bad) = states
        .iter()
        .find(|s| s.parties() != first.parties() || s.dim() != first.dim())
    {
        return Err(Error::Dimension(format!(
            "cannot mix N={},d={} with N={},d={}",
            first.parties(),
            first.dim(),
            bad.parties(),
            bad.dim()
        )));
    }
    let n = first.entries().nrows();
    let mut acc = DMatrix::from_element(n, n, zero());
    for (s, &w) in states.iter().zip(weights) {
        acc += s.entries() * Complex64::new(w, 0.0);
    }
    DensityMatrix::new(first.parties(), first.dim(), acc)
}

/// Haar-random pure state from a normalized standard complex Gaussian vector.
pub fn random_pure_state(parties: usize, dim: usize, seed: u64) -> Result<PureState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dim
        .checked_pow(parties as u32)
        .ok_or_else(|| Error::Argument("state too large".into()))?;
    let amps = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    PureState::normalized(parties, dim, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn amp(s: &PureState, digits: &[usize]) -> Complex64 {
        s.amplitudes()[basis_index(digits, s.dim())]
    }

    fn close(a: Complex64, b: f64) -> bool {
        (a - Complex64::new(b, 0.0)).norm() < 1e-12
    }

    #[test]
    fn ghz_examples() {
        let g = make_ghz(2, 2, FRAC_PI_4).unwrap();
        assert!(close(amp(&g, &[0, 0]), FRAC_1_SQRT_2));
        assert!(close(amp(&g, &[1, 1]), FRAC_1_SQRT_2));
        assert!(close(amp(&g, &[0, 1]), 0.0));

        let p = make_ghz(3, 2, 0.0).unwrap();
        assert!(close(amp(&p, &[1, 1, 1]), 1.0));

        let q = make_ghz(2, 3, FRAC_PI_2).unwrap();
        assert!(close(amp(&q, &[0, 0]), 1.0));

        // α = 0 keeps the cos term: (|11⟩ + |22⟩)/√2
        let q0 = make_ghz(2, 3, 0.0).unwrap();
        assert!(close(amp(&q0, &[1, 1]), FRAC_1_SQRT_2));
        assert!(close(amp(&q0, &[2, 2]), FRAC_1_SQRT_2));
        assert!(close(amp(&q0, &[0, 0]), 0.0));
    }

    #[test]
    fn ghz_rejects_bad_args() {
        assert!(make_ghz(2, 4, 0.3).is_err());
        assert!(make_ghz(2, 2, -0.1).is_err());
        assert!(make_ghz(2, 2, 1.6).is_err());
    }

    #[test]
    fn qutrit_ghz_symmetric_point_is_maximally_entangled() {
        let alpha = (1.0f64 / 3.0).sqrt().asin();
        let q = make_ghz(2, 3, alpha).unwrap();
        for r in 0..3 {
            assert!(close(amp(&q, &[r, r]), 1.0 / 3f64.sqrt()));
        }
    }

    #[test]
    fn dicke_examples() {
        let w = make_dicke(3, 1).unwrap();
        let c = 1.0 / 3f64.sqrt();
        for digits in [[0, 0, 1], [0, 1, 0], [1, 0, 0]] {
            assert!(close(amp(&w, &digits), c));
        }
        assert!(close(amp(&w, &[0, 1, 1]), 0.0));

        let d42 = make_dicke(4, 2).unwrap();
        let nonzero: Vec<_> = d42.amplitudes().iter().filter(|a| a.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 6);
        assert!(nonzero.iter().all(|a| close(**a, 1.0 / 6f64.sqrt())));

        let d21 = make_dicke(2, 1).unwrap();
        assert!(close(amp(&d21, &[0, 1]), FRAC_1_SQRT_2));
        assert!(close(amp(&d21, &[1, 0]), FRAC_1_SQRT_2));

        assert!(make_dicke(3, 0).is_err());
        assert!(make_dicke(3, 3).is_err());
    }

    #[test]
    fn psi3_examples() {
        let w = make_dicke(3, 1).unwrap();
        let p90 = make_psi3(FRAC_PI_2).unwrap();
        assert!((p90.inner(&w).norm() - 1.0).abs() < 1e-12);
        let p0 = make_psi3(0.0).unwrap();
        assert!(close(amp(&p0, &[1, 1, 1]), 1.0));
        let p45 = make_psi3(FRAC_PI_4).unwrap();
        assert!((p45.inner(&p45).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_and_aharonov() {
        let QuantumState::Pure(c4) = make_named(NamedState::Cluster4).unwrap() else {
            panic!("cluster state is pure")
        };
        assert!(close(amp(&c4, &[0, 0, 0, 0]), 0.5));
        assert!(close(amp(&c4, &[0, 0, 1, 1]), 0.5));
        assert!(close(amp(&c4, &[1, 1, 0, 0]), 0.5));
        assert!(close(amp(&c4, &[1, 1, 1, 1]), -0.5));

        let QuantumState::Pure(a3) = make_named(NamedState::Aharonov3).unwrap() else {
            panic!("Aharonov state is pure")
        };
        let nonzero: Vec<_> = a3.amplitudes().iter().filter(|a| a.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 6);
        assert!(nonzero.iter().all(|a| (a.norm() - 1.0 / 6f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn qutrit_dicke_coefficients() {
        let QuantumState::Pure(q2) = make_named(NamedState::QutritDickeQ2).unwrap() else {
            panic!()
        };
        assert!(close(amp(&q2, &[0, 1, 1]), 2.0 / 15f64.sqrt()));
        assert!(close(amp(&q2, &[2, 0, 0]), 1.0 / 15f64.sqrt()));
        let QuantumState::Pure(q3) = make_named(NamedState::QutritDickeQ3).unwrap() else {
            panic!()
        };
        assert!(close(amp(&q3, &[1, 1, 1]), 2.0 / 10f64.sqrt()));
        assert!(close(amp(&q3, &[2, 1, 0]), 1.0 / 10f64.sqrt()));
    }

    #[test]
    fn werner_spectrum() {
        // oracle: the spectrum of v|Φ⁺⟩⟨Φ⁺| + (1-v)𝟙/4 is {v + (1-v)/4, (1-v)/4 ×3}
        let QuantumState::Mixed(w) = make_named(NamedState::Werner2).unwrap() else {
            panic!()
        };
        let v = FRAC_1_SQRT_2;
        let ev = w.eigenvalues();
        for e in &ev[..3] {
            assert!((e - (1.0 - v) / 4.0).abs() < 1e-12);
        }
        assert!((ev[3] - (v + (1.0 - v) / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn smolin_is_valid_and_symmetric() {
        let QuantumState::Mixed(s) = make_named(NamedState::Smolin4).unwrap() else {
            panic!()
        };
        let ev = s.eigenvalues();
        // rank 4, eigenvalues 1/4
        assert!(ev[..12].iter().all(|e| e.abs() < 1e-12));
        assert!(ev[12..].iter().all(|e| (e - 0.25).abs() < 1e-12));
        // invariant under any pair swap
        let p = s.permute_parties(&[0, 2, 1, 3]).unwrap();
        assert!((p.entries() - s.entries()).camax() < 1e-12);
    }

    #[test]
    fn mix_rules() {
        let z = make_product_zero(1, 2).unwrap().to_density_matrix();
        let o = PureState::new(1, 2, vec![zero(), Complex64::new(1.0, 0.0)])
            .unwrap()
            .to_density_matrix();
        let half = mix(&[z.clone(), o], &[0.5, 0.5]).unwrap();
        let id = DensityMatrix::maximally_mixed(1, 2).unwrap();
        assert!((half.entries() - id.entries()).camax() < 1e-15);
        assert_eq!(mix(&[z.clone()], &[1.0]).unwrap(), z);
        assert!(mix(&[z.clone()], &[0.9]).is_err());
        assert!(mix(&[z.clone(), z.clone()], &[1.5, -0.5]).is_err());
        let zz = make_product_zero(2, 2).unwrap().to_density_matrix();
        assert!(matches!(mix(&[z, zz], &[0.5, 0.5]), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_states() {
        let a = random_pure_state(3, 2, 7).unwrap();
        let b = random_pure_state(3, 2, 7).unwrap();
        let c = random_pure_state(3, 2, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.inner(&c).norm_sqr() < 1.0 - 1e-6);
    }

    #[test]
    fn names_parse() {
        for n in NamedState::ALL {
            assert_eq!(n.name().parse::<NamedState>().unwrap(), n);
            assert!(make_named(n).is_ok());
        }
        assert!("nope".parse::<NamedState>().is_err());
    }
}
