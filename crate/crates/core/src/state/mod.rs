//! Quantum states on `N` qudits: pure vectors, density matrices, and the
//! catalog of named states.
//!
//! Basis ordering is the computational basis `|r¹…rᴺ⟩` in row-major order
//! with party 1 the most significant digit.

mod catalog;
mod io;
mod scenario;

pub use catalog::{
    make_dicke, make_ghz, make_named, make_product_zero, make_psi3, mix, random_pure_state,
    NamedState,
};
pub use io::{load_density_matrix, parse_density_matrix, write_density_matrix};
pub use scenario::{parse_settings, Scenario, DEFAULT_STRATEGY_CAP};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const PURE_NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;

/// A normalized state vector of length `d^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    parties: usize,
    dim: usize,
}

impl PureState {
    pub fn new(parties: usize, dim: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_dims(parties, dim, amplitudes.len())?;
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::State(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes, parties, dim })
    }

    /// Builds a state from unnormalized amplitudes.
    pub fn normalized(parties: usize, dim: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_dims(parties, dim, amplitudes.len())?;
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::State("zero or non-finite amplitude vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Self::new(parties, dim, amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "local dimensions {} and {} differ",
                self.dim, other.dim
            )));
        }
        let amplitudes = kron_vec(&self.amplitudes, &other.amplitudes);
        Ok(PureState {
            amplitudes,
            parties: self.parties + other.parties,
            dim: self.dim,
        })
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let n = self.amplitudes.len();
        let entries = DMatrix::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix { entries, parties: self.parties, dim: self.dim }
    }

    /// Reorders parties so that new party `i` is old party `perm[i]`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<PureState> {
        let map = party_permutation_map(self.parties, self.dim, perm)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (new, &old) in map.iter().enumerate() {
            amplitudes[new] = self.amplitudes[old];
        }
        Ok(PureState { amplitudes, parties: self.parties, dim: self.dim })
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
    parties: usize,
    dim: usize,
}

impl DensityMatrix {
    pub fn new(parties: usize, dim: usize, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension("density matrix is not square".into()));
        }
        check_dims(parties, dim, entries.nrows())?;
        let n = entries.nrows();
        let mut herm = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                herm = herm.max((entries[(i, j)] - entries[(j, i)].conj()).norm());
            }
        }
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::Trace(trace.re));
        }
        let min_eig = hermitian_eigenvalues(&entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(Self { entries, parties, dim })
    }

    /// The maximally mixed state `𝟙/d^N`.
    pub fn maximally_mixed(parties: usize, dim: usize) -> Result<Self> {
        let n = dim.pow(parties as u32);
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0 / n as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(parties, dim, entries)
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = hermitian_eigenvalues(&self.entries);
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "local dimensions {} and {} differ",
                self.dim, other.dim
            )));
        }
        Ok(DensityMatrix {
            entries: self.entries.kronecker(&other.entries),
            parties: self.parties + other.parties,
            dim: self.dim,
        })
    }

    /// Reorders parties so that new party `i` is old party `perm[i]`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<DensityMatrix> {
        let map = party_permutation_map(self.parties, self.dim, perm)?;
        let n = map.len();
        let entries = DMatrix::from_fn(n, n, |i, j| self.entries[(map[i], map[j])]);
        Ok(DensityMatrix { entries, parties: self.parties, dim: self.dim })
    }
}

/// Either kind of state. Pure states keep their vector form so that
/// probabilities can be computed from amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn parties(&self) -> usize {
        match self {
            QuantumState::Pure(p) => p.parties(),
            QuantumState::Mixed(m) => m.parties(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(p) => p.dim(),
            QuantumState::Mixed(m) => m.dim(),
        }
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(p) => p.to_density_matrix(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    /// Kronecker product; pure ⊗ pure stays pure.
    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState> {
        match (self, other) {
            (QuantumState::Pure(a), QuantumState::Pure(b)) => a.tensor(b).map(QuantumState::Pure),
            _ => self
                .to_density_matrix()
                .tensor(&other.to_density_matrix())
                .map(QuantumState::Mixed),
        }
    }

    pub fn permute_parties(&self, perm: &[usize]) -> Result<QuantumState> {
        match self {
            QuantumState::Pure(p) => p.permute_parties(perm).map(QuantumState::Pure),
            QuantumState::Mixed(m) => m.permute_parties(perm).map(QuantumState::Mixed),
        }
    }
}

impl From<PureState> for QuantumState {
    fn from(p: PureState) -> Self {
        QuantumState::Pure(p)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(m: DensityMatrix) -> Self {
        QuantumState::Mixed(m)
    }
}

fn check_dims(parties: usize, dim: usize, len: usize) -> Result<()> {
    if parties == 0 || dim < 2 {
        return Err(Error::State(format!("invalid shape N={parties}, d={dim}")));
    }
    let expected = dim
        .checked_pow(parties as u32)
        .ok_or_else(|| Error::State("state too large".into()))?;
    if expected != len {
        return Err(Error::Dimension(format!(
            "length {len} does not match d^N = {expected}"
        )));
    }
    Ok(())
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    // Symmetrize first so tiny anti-Hermitian noise does not leak in.
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// `map[new_index] = old_index` for the party reordering `perm`.
fn party_permutation_map(parties: usize, dim: usize, perm: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; parties];
    if perm.len() != parties || perm.iter().any(|&p| p >= parties || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Argument(format!("{perm:?} is not a permutation of {parties} parties")));
    }
    let n = dim.pow(parties as u32);
    let mut map = vec![0; n];
    let mut digits = vec![0usize; parties];
    for (new, slot) in map.iter_mut().enumerate() {
        let mut x = new;
        for d in digits.iter_mut().rev() {
            *d = x % dim;
            x /= dim;
        }
        // new digit i holds old party perm[i]
        let mut old_digits = vec![0usize; parties];
        for (i, &p) in perm.iter().enumerate() {
            old_digits[p] = digits[i];
        }
        *slot = old_digits.iter().fold(0, |acc, &r| acc * dim + r);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn pure_norm_checked() {
        assert!(PureState::new(1, 2, vec![c(1.0), c(0.0)]).is_ok());
        assert!(PureState::new(1, 2, vec![c(1.0), c(1.0)]).is_err());
        assert!(PureState::new(2, 2, vec![c(1.0), c(0.0)]).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let mixed = DensityMatrix::maximally_mixed(2, 2).unwrap();
        assert!(mixed.eigenvalues().iter().all(|&e| (e - 0.25).abs() < 1e-12));

        let mut bad = mixed.entries().clone();
        bad[(0, 0)] = c(0.15);
        assert!(matches!(DensityMatrix::new(2, 2, bad), Err(Error::Trace(_))));

        let mut bad = mixed.entries().clone();
        bad[(0, 1)] = c(0.1);
        assert!(matches!(DensityMatrix::new(2, 2, bad), Err(Error::NotHermitian(_))));

        let mut bad = DMatrix::from_element(2, 2, c(0.0));
        bad[(0, 0)] = c(1.5);
        bad[(1, 1)] = c(-0.5);
        assert!(matches!(DensityMatrix::new(1, 2, bad), Err(Error::NotPsd(_))));
    }

    #[test]
    fn tensor_of_kets() {
        let zero = PureState::new(1, 2, vec![c(1.0), c(0.0)]).unwrap();
        let zz = zero.tensor(&zero).unwrap();
        assert_eq!(zz.parties(), 2);
        assert_eq!(zz.amplitudes(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let q = PureState::new(1, 3, vec![c(1.0), c(0.0), c(0.0)]).unwrap();
        assert!(matches!(zero.tensor(&q), Err(Error::Dimension(_))));
    }

    #[test]
    fn permute_moves_digits() {
        // |01⟩ with parties swapped becomes |10⟩
        let s = PureState::new(2, 2, vec![c(0.0), c(1.0), c(0.0), c(0.0)]).unwrap();
        let t = s.permute_parties(&[1, 0]).unwrap();
        assert_eq!(t.amplitudes()[2], c(1.0));
        assert!(s.permute_parties(&[0, 0]).is_err());
    }
}
