//! Random projective measurements and the joint outcome probabilities they
//! produce on a state.
//!
//! A measurement basis is a `d × d` unitary whose column `r` is the vector
//! `|v_r⟩` for outcome `r`. Qubit bases come from a three-angle unitary,
//! qutrit bases from a product of three embedded two-level rotations.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{QuantumState, Scenario};

/// Orthonormality tolerance for measurement bases.
pub const BASIS_TOL: f64 = 1e-10;
/// Per-setting normalization and no-signaling tolerance for behaviors.
pub const BEHAVIOR_TOL: f64 = 1e-9;

const CLAMP_SLACK: f64 = 1e-12;

fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBasis {
    dim: usize,
    /// Row-major `d × d` unitary; column `r` is the outcome-`r` vector.
    matrix: Vec<Complex64>,
    angles: Vec<f64>,
}

impl MeasurementBasis {
    /// Wraps a unitary given row-major, checking orthonormality of its columns.
    pub fn from_matrix(dim: usize, matrix: Vec<Complex64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} entries for a {dim}x{dim} basis",
                matrix.len()
            )));
        }
        let basis = Self { dim, matrix, angles: Vec::new() };
        let dev = basis.orthonormality_deviation();
        if dev > BASIS_TOL {
            return Err(Error::Argument(format!(
                "basis columns are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(basis)
    }

    pub fn computational(dim: usize) -> Self {
        let matrix = (0..dim * dim)
            .map(|i| if i / dim == i % dim { c(1.0) } else { c(0.0) })
            .collect();
        Self { dim, matrix, angles: Vec::new() }
    }

    /// The three-angle qubit unitary
    /// `[[cos φ e^{iψ}, sin φ e^{iχ}], [−sin φ e^{−iχ}, cos φ e^{−iψ}]]`.
    ///
    /// `ψ` and `χ` are taken mod 2π and `φ` is clamped to `[0, π/2]`.
    pub fn qubit_unitary(phi: f64, psi: f64, chi: f64) -> Self {
        let phi = phi.clamp(0.0, FRAC_PI_2);
        let psi = psi.rem_euclid(TAU);
        let chi = chi.rem_euclid(TAU);
        let (s, co) = phi.sin_cos();
        let matrix = vec![
            cis(psi) * co,
            cis(chi) * s,
            -cis(-chi) * s,
            cis(-psi) * co,
        ];
        Self { dim: 2, matrix, angles: vec![phi, psi, chi] }
    }

    /// Qutrit unitary from the angles `(φ₁, ψ₁, χ₁, φ₂, ψ₂, χ₂, φ₃, ψ₃)`:
    /// the product of rotations in the (0,1), (0,2) and (1,2) planes, in
    /// that order.
    pub fn qutrit_unitary(angles: [f64; 8]) -> Self {
        let [p1, s1, c1, p2, s2, c2, p3, s3] = angles;
        let p1 = p1.clamp(0.0, FRAC_PI_2);
        let p2 = p2.clamp(0.0, FRAC_PI_2);
        let p3 = p3.clamp(0.0, FRAC_PI_2);
        let z = c(0.0);
        let one = c(1.0);
        let first = [
            cis(s1) * p1.cos(), cis(c1) * p1.sin(), z,
            -cis(-c1) * p1.sin(), cis(-s1) * p1.cos(), z,
            z, z, one,
        ];
        let second = [
            cis(s2) * p2.cos(), z, cis(c2) * p2.sin(),
            z, one, z,
            -cis(-c2) * p2.sin(), z, cis(-s2) * p2.cos(),
        ];
        let third = [
            one, z, z,
            z, cis(s3) * p3.cos(), c(p3.sin()),
            z, c(-p3.sin()), cis(-s3) * p3.cos(),
        ];
        let matrix = matmul3(&matmul3(&first, &second), &third).to_vec();
        Self {
            dim: 3,
            matrix,
            angles: vec![p1, s1, c1, p2, s2, c2, p3, s3],
        }
    }

    /// Eigenbasis of `a·σ` for a unit Bloch vector `a`: outcome 0 is the
    /// `+1` eigenvector, outcome 1 the `−1` eigenvector.
    pub fn from_bloch(a: [f64; 3]) -> Self {
        let theta = a[2].clamp(-1.0, 1.0).acos();
        let azimuth = a[1].atan2(a[0]);
        Self::qubit_unitary(theta / 2.0, 0.0, std::f64::consts::PI - azimuth)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Entry `(row, col)` of the unitary.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim + col]
    }

    /// The vector `|v_r⟩` for outcome `r`.
    pub fn column(&self, r: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.entry(i, r)).collect()
    }

    /// Max entrywise deviation of `U†U` from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let ip: Complex64 = (0..d).map(|i| self.entry(i, a).conj() * self.entry(i, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }

    /// Max entrywise deviation of `Σ_r |v_r⟩⟨v_r|` from the identity.
    pub fn completeness_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: Complex64 = (0..d).map(|r| self.entry(i, r) * self.entry(j, r).conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }

    /// Row-major `U†`.
    fn adjoint(&self) -> Vec<Complex64> {
        let d = self.dim;
        (0..d * d).map(|i| self.entry(i % d, i / d).conj()).collect()
    }
}

fn matmul3(a: &[Complex64; 9], b: &[Complex64; 9]) -> [Complex64; 9] {
    let mut out = [c(0.0); 9];
    for i in 0..3 {
        for j in 0..3 {
            out[i * 3 + j] = (0..3).map(|k| a[i * 3 + k] * b[k * 3 + j]).sum();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Fresh bases for every party and setting.
    #[default]
    Independent,
    /// One list of bases, applied by every party.
    Identical,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(SamplingMode::Independent),
            "identical" | "identical_across_parties" => Ok(SamplingMode::Identical),
            _ => Err(Error::Argument(format!("unknown sampling mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingMode::Independent => "independent",
            SamplingMode::Identical => "identical",
        })
    }
}

/// Per-party ordered measurement bases.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingsAssignment {
    bases: Vec<Vec<MeasurementBasis>>,
}

impl SettingsAssignment {
    pub fn new(scenario: &Scenario, bases: Vec<Vec<MeasurementBasis>>) -> Result<Self> {
        if bases.len() != scenario.num_parties() {
            return Err(Error::Dimension(format!(
                "{} parties in assignment, {} in scenario",
                bases.len(),
                scenario.num_parties()
            )));
        }
        for (i, (list, &m)) in bases.iter().zip(scenario.settings()).enumerate() {
            if list.len() != m {
                return Err(Error::Dimension(format!(
                    "party {} has {} bases, expected {m}",
                    i + 1,
                    list.len()
                )));
            }
            if list.iter().any(|b| b.dim() != scenario.local_dim()) {
                return Err(Error::Dimension(format!(
                    "party {} has a basis of the wrong dimension",
                    i + 1
                )));
            }
        }
        Ok(Self { bases })
    }

    pub fn party(&self, i: usize) -> &[MeasurementBasis] {
        &self.bases[i]
    }

    pub fn num_parties(&self) -> usize {
        self.bases.len()
    }
}

fn sample_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<MeasurementBasis> {
    let phi = |rng: &mut R, exponent: f64| {
        let xi: f64 = rng.random();
        xi.powf(exponent).asin()
    };
    match dim {
        2 => {
            let p = phi(rng, 0.5);
            let psi = rng.random::<f64>() * TAU;
            let chi = rng.random::<f64>() * TAU;
            Ok(MeasurementBasis::qubit_unitary(p, psi, chi))
        }
        3 => {
            let p1 = phi(rng, 0.5);
            let s1 = rng.random::<f64>() * TAU;
            let c1 = rng.random::<f64>() * TAU;
            let p2 = phi(rng, 0.5);
            let s2 = rng.random::<f64>() * TAU;
            let c2 = rng.random::<f64>() * TAU;
            let p3 = phi(rng, 0.25);
            let s3 = rng.random::<f64>() * TAU;
            Ok(MeasurementBasis::qutrit_unitary([p1, s1, c1, p2, s2, c2, p3, s3]))
        }
        _ => Err(Error::Argument(format!(
            "random measurements are parametrized for d = 2 or 3, got {dim}"
        ))),
    }
}

/// Draws random measurement bases for every party and setting.
pub fn sample_settings<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
    mode: SamplingMode,
) -> Result<SettingsAssignment> {
    let d = scenario.local_dim();
    let bases = match mode {
        SamplingMode::Independent => scenario
            .settings()
            .iter()
            .map(|&m| (0..m).map(|_| sample_basis(d, rng)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?,
        SamplingMode::Identical => {
            let m = scenario.settings()[0];
            if scenario.settings().iter().any(|&x| x != m) {
                return Err(Error::Argument(
                    "identical sampling needs the same number of settings for every party".into(),
                ));
            }
            let list = (0..m).map(|_| sample_basis(d, rng)).collect::<Result<Vec<_>>>()?;
            vec![list; scenario.num_parties()]
        }
    };
    Ok(SettingsAssignment { bases })
}

/// Joint outcome probabilities `P(r¹…rᴺ | k₁…k_N)`.
///
/// Entry `(k, r)` is stored at `k_index · d^N + r_index`, both indices in
/// row-major order with party 1 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

impl Behavior {
    /// Checks range, normalization and no-signaling.
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self> {
        let b = Self::new_unchecked(scenario, table)?;
        let norm = b.normalization_deviation();
        if norm > BEHAVIOR_TOL {
            return Err(Error::Argument(format!("behavior is not normalized ({norm:e})")));
        }
        let ns = b.no_signaling_deviation();
        if ns > BEHAVIOR_TOL {
            return Err(Error::Argument(format!("behavior is signaling ({ns:e})")));
        }
        Ok(b)
    }

    /// Only checks the shape and the `[0, 1]` range; signaling tables are
    /// allowed.
    pub fn new_unchecked(scenario: Scenario, table: Vec<f64>) -> Result<Self> {
        if table.len() != scenario.behavior_len() {
            return Err(Error::Dimension(format!(
                "table has {} entries, scenario needs {}",
                table.len(),
                scenario.behavior_len()
            )));
        }
        if let Some(p) = table.iter().find(|p| !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(*p)) {
            return Err(Error::Argument(format!("probability {p} out of range")));
        }
        let table = table.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(Self { scenario, table })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, settings: &[usize], outcomes: &[usize]) -> f64 {
        let s = &self.scenario;
        self.table[s.setting_index(settings) * s.num_outcome_tuples() + s.outcome_index(outcomes)]
    }

    pub fn normalization_deviation(&self) -> f64 {
        self.table
            .chunks(self.scenario.num_outcome_tuples())
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Max deviation over parties `j` of the marginal of the other parties
    /// across `j`'s setting choices.
    pub fn no_signaling_deviation(&self) -> f64 {
        let s = &self.scenario;
        let n = s.num_parties();
        let mut worst = 0.0f64;
        for j in 0..n {
            for kidx in 0..s.num_setting_tuples() {
                let k = s.setting_tuple(kidx);
                if k[j] != 0 {
                    continue;
                }
                let reference = self.marginal_without(j, &k);
                for kj in 1..s.settings()[j] {
                    let mut k2 = k.clone();
                    k2[j] = kj;
                    let other = self.marginal_without(j, &k2);
                    for (a, b) in reference.iter().zip(&other) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    /// Marginal over all parties except `j` at setting tuple `k`, indexed by
    /// the full outcome index with `r_j = 0`.
    fn marginal_without(&self, j: usize, k: &[usize]) -> Vec<f64> {
        let s = &self.scenario;
        let d = s.local_dim();
        let base = s.setting_index(k) * s.num_outcome_tuples();
        let stride = d.pow((s.num_parties() - 1 - j) as u32);
        let mut out = Vec::with_capacity(s.num_outcome_tuples() / d);
        for r in 0..s.num_outcome_tuples() {
            if (r / stride) % d != 0 {
                continue;
            }
            out.push((0..d).map(|x| self.table[base + r + x * stride]).sum());
        }
        out
    }

    /// New party `i` is old party `perm[i]`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<Behavior> {
        let s = &self.scenario;
        let n = s.num_parties();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Argument(format!("{perm:?} is not a party permutation")));
        }
        let settings: Vec<usize> = perm.iter().map(|&p| s.settings()[p]).collect();
        let ns = Scenario::new(s.local_dim(), settings)?;
        let mut table = vec![0.0; self.table.len()];
        for kidx in 0..ns.num_setting_tuples() {
            let k_new = ns.setting_tuple(kidx);
            let mut k_old = vec![0; n];
            for (i, &p) in perm.iter().enumerate() {
                k_old[p] = k_new[i];
            }
            for ridx in 0..ns.num_outcome_tuples() {
                let r_new = ns.outcome_tuple(ridx);
                let mut r_old = vec![0; n];
                for (i, &p) in perm.iter().enumerate() {
                    r_old[p] = r_new[i];
                }
                table[kidx * ns.num_outcome_tuples() + ridx] = self.prob(&k_old, &r_old);
            }
        }
        Ok(Behavior { scenario: ns, table })
    }

    /// New setting `k` of `party` is old setting `perm[k]`.
    pub fn permute_settings(&self, party: usize, perm: &[usize]) -> Result<Behavior> {
        let s = &self.scenario;
        check_perm(perm, s.settings()[party])?;
        let mut table = vec![0.0; self.table.len()];
        for kidx in 0..s.num_setting_tuples() {
            let mut k = s.setting_tuple(kidx);
            k[party] = perm[k[party]];
            let old = s.setting_index(&k) * s.num_outcome_tuples();
            let new = kidx * s.num_outcome_tuples();
            table[new..new + s.num_outcome_tuples()]
                .copy_from_slice(&self.table[old..old + s.num_outcome_tuples()]);
        }
        Ok(Behavior { scenario: s.clone(), table })
    }

    /// For `party` measuring `setting`, new outcome `r` is old outcome `perm[r]`.
    pub fn permute_outcomes(&self, party: usize, setting: usize, perm: &[usize]) -> Result<Behavior> {
        let s = &self.scenario;
        check_perm(perm, s.local_dim())?;
        let mut table = self.table.clone();
        for kidx in 0..s.num_setting_tuples() {
            let k = s.setting_tuple(kidx);
            if k[party] != setting {
                continue;
            }
            for ridx in 0..s.num_outcome_tuples() {
                let mut r = s.outcome_tuple(ridx);
                r[party] = perm[r[party]];
                table[kidx * s.num_outcome_tuples() + ridx] = self.prob(&k, &r);
            }
        }
        Ok(Behavior { scenario: s.clone(), table })
    }
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Argument(format!("{perm:?} is not a permutation of 0..{n}")));
    }
    Ok(())
}

fn check_shapes(state: &QuantumState, scenario: &Scenario, settings: &SettingsAssignment) -> Result<()> {
    if state.parties() != scenario.num_parties() || state.dim() != scenario.local_dim() {
        return Err(Error::Dimension(format!(
            "state has N={}, d={} but scenario has N={}, d={}",
            state.parties(),
            state.dim(),
            scenario.num_parties(),
            scenario.local_dim()
        )));
    }
    if settings.num_parties() != scenario.num_parties() {
        return Err(Error::Dimension("settings do not match the scenario".into()));
    }
    for i in 0..scenario.num_parties() {
        let list = settings.party(i);
        if list.len() != scenario.settings()[i] || list.iter().any(|b| b.dim() != scenario.local_dim()) {
            return Err(Error::Dimension(format!("settings for party {} do not match", i + 1)));
        }
    }
    Ok(())
}

/// Applies the row-major `d × d` matrix `m` to tensor leg with the given
/// stride: `out[.., r, ..] = Σ_a m[r][a] input[.., a, ..]`.
fn apply_leg(m: &[Complex64], d: usize, stride: usize, input: &[Complex64], out: &mut [Complex64]) {
    let block = stride * d;
    for (ib, ob) in input.chunks_exact(block).zip(out.chunks_exact_mut(block)) {
        for low in 0..stride {
            for r in 0..d {
                let row = &m[r * d..(r + 1) * d];
                let mut acc = c(0.0);
                for (a, &coef) in row.iter().enumerate() {
                    acc += coef * ib[a * stride + low];
                }
                ob[r * stride + low] = acc;
            }
        }
    }
}

/// Computes the behavior of `state` under `settings`.
///
/// Every entry equals `⟨w|ρ|w⟩` with `|w⟩ = ⊗ᵢ |v^i_{k_i, r_i}⟩`. The
/// evaluation rotates each party's leg of the state by `U†` (and the column
/// leg of a density matrix by `Uᵀ`), sharing partial rotations between
/// setting tuples with a common prefix.
pub fn behavior(state: &QuantumState, scenario: &Scenario, settings: &SettingsAssignment) -> Result<Behavior> {
    check_shapes(state, scenario, settings)?;
    let n = scenario.num_parties();
    let d = scenario.local_dim();
    let outcomes = scenario.num_outcome_tuples();

    // leg operators per party and setting: (left, right)
    let ops: Vec<Vec<(Vec<Complex64>, Vec<Complex64>)>> = (0..n)
        .map(|i| {
            settings
                .party(i)
                .iter()
                .map(|b| {
                    let adj = b.adjoint();
                    let transpose: Vec<Complex64> = adj.iter().map(|z| z.conj()).collect();
                    (adj, transpose)
                })
                .collect()
        })
        .collect();

    let (root, mixed) = match state {
        QuantumState::Pure(p) => (p.amplitudes().to_vec(), false),
        QuantumState::Mixed(m) => {
            // row-major flattening: row legs first, then column legs
            let e = m.entries();
            let dim = e.nrows();
            ((0..dim * dim).map(|i| e[(i / dim, i % dim)]).collect(), true)
        }
    };
    let len = root.len();
    let mut levels: Vec<Vec<Complex64>> = vec![vec![c(0.0); len]; n + 1];
    levels[0] = root;
    let mut scratch = vec![c(0.0); len];
    let mut table = vec![0.0; scenario.behavior_len()];

    struct Ctx<'a> {
        ops: &'a [Vec<(Vec<Complex64>, Vec<Complex64>)>],
        n: usize,
        d: usize,
        outcomes: usize,
        mixed: bool,
        settings: &'a [usize],
    }

    fn recurse(
        ctx: &Ctx<'_>,
        level: usize,
        prefix: usize,
        levels: &mut [Vec<Complex64>],
        scratch: &mut [Complex64],
        table: &mut [f64],
    ) {
        if level == ctx.n {
            let v = &levels[ctx.n];
            let dst = &mut table[prefix * ctx.outcomes..(prefix + 1) * ctx.outcomes];
            for (r, slot) in dst.iter_mut().enumerate() {
                let p = if ctx.mixed {
                    v[r * ctx.outcomes + r].re
                } else {
                    v[r].norm_sqr()
                };
                *slot = p.clamp(0.0, 1.0);
            }
            return;
        }
        let stride = ctx.d.pow((ctx.n - 1 - level) as u32);
        for k in 0..ctx.settings[level] {
            let (left, right) = &ctx.ops[level][k];
            let (head, tail) = levels.split_at_mut(level + 1);
            let src = &head[level];
            let dst = &mut tail[0];
            if ctx.mixed {
                apply_leg(left, ctx.d, stride * ctx.outcomes, src, scratch);
                apply_leg(right, ctx.d, stride, scratch, dst);
            } else {
                apply_leg(left, ctx.d, stride, src, dst);
            }
            recurse(ctx, level + 1, prefix * ctx.settings[level] + k, levels, scratch, table);
        }
    }

    let ctx = Ctx { ops: &ops, n, d, outcomes, mixed, settings: scenario.settings() };
    recurse(&ctx, 0, 0, &mut levels, &mut scratch, &mut table);
    Ok(Behavior { scenario: scenario.clone(), table })
}

/// Reference evaluation of every entry as `⟨w|ρ|w⟩` with an explicit
/// product vector `|w⟩`. Quadratic in `d^N` per entry; meant for checks.
pub fn behavior_direct(state: &QuantumState, scenario: &Scenario, settings: &SettingsAssignment) -> Result<Behavior> {
    check_shapes(state, scenario, settings)?;
    let rho = state.to_density_matrix();
    let e = rho.entries();
    let mut table = Vec::with_capacity(scenario.behavior_len());
    for kidx in 0..scenario.num_setting_tuples() {
        let k = scenario.setting_tuple(kidx);
        for ridx in 0..scenario.num_outcome_tuples() {
            let r = scenario.outcome_tuple(ridx);
            let mut w = vec![c(1.0)];
            for (i, (&ki, &ri)) in k.iter().zip(&r).enumerate() {
                w = crate::state::kron_vec(&w, &settings.party(i)[ki].column(ri));
            }
            let mut acc = c(0.0);
            for a in 0..w.len() {
                for b in 0..w.len() {
                    acc += w[a].conj() * e[(a, b)] * w[b];
                }
            }
            table.push(acc.re);
        }
    }
    Behavior::new_unchecked(scenario.clone(), table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_ghz, make_product_zero};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

    #[test]
    fn qubit_unitary_examples() {
        let id = MeasurementBasis::qubit_unitary(0.0, 0.0, 0.0);
        assert_eq!(id, MeasurementBasis { angles: vec![0.0; 3], ..MeasurementBasis::computational(2) });

        let r = MeasurementBasis::qubit_unitary(FRAC_PI_4, 0.0, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let col0 = r.column(0);
        let col1 = r.column(1);
        assert!((col0[0] - c(h)).norm() < 1e-15 && (col0[1] - c(-h)).norm() < 1e-15);
        assert!((col1[0] - c(h)).norm() < 1e-15 && (col1[1] - c(h)).norm() < 1e-15);

        let u = MeasurementBasis::qubit_unitary(0.3, 1.7, -4.2);
        assert!(u.orthonormality_deviation() < 1e-12);
        assert!(u.completeness_deviation() < 1e-12);
    }

    #[test]
    fn qutrit_unitary_examples() {
        let id = MeasurementBasis::qutrit_unitary([0.0; 8]);
        assert!((0..9).all(|i| (id.matrix[i] - MeasurementBasis::computational(3).matrix[i]).norm() < 1e-15));

        let u = MeasurementBasis::qutrit_unitary([0.4, 1.0, 2.0, 1.1, 3.0, 0.2, 0.9, 5.0]);
        assert!(u.orthonormality_deviation() < 1e-12);

        // oracle: first factor at φ₁ = π/2 is [[0,1,0],[-1,0,0],[0,0,1]]
        let s = MeasurementBasis::qutrit_unitary([FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (z, e) in s.matrix.iter().zip(expected) {
            assert!((z - c(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn bloch_bases_are_eigenvectors() {
        for a in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, -0.48, 0.64]] {
            let b = MeasurementBasis::from_bloch(a);
            // ⟨v_0| a·σ |v_0⟩ = +1
            let v = b.column(0);
            let sx = 2.0 * (v[0].conj() * v[1]).re;
            let sy = 2.0 * (v[0].conj() * v[1]).im;
            let sz = v[0].norm_sqr() - v[1].norm_sqr();
            let dot = sx * a[0] + sy * a[1] + sz * a[2];
            assert!((dot - 1.0).abs() < 1e-12, "{a:?} -> {dot}");
        }
    }

    #[test]
    fn identical_mode() {
        let s = Scenario::new(2, vec![2, 2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = sample_settings(&s, &mut rng, SamplingMode::Identical).unwrap();
        assert_eq!(a.party(0), a.party(2));
        let uneven = Scenario::new(2, vec![3, 2]).unwrap();
        assert!(sample_settings(&uneven, &mut rng, SamplingMode::Identical).is_err());
    }

    #[test]
    fn sampled_bases_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3] {
            let s = Scenario::new(d, vec![3, 2]).unwrap();
            for _ in 0..200 {
                let a = sample_settings(&s, &mut rng, SamplingMode::Independent).unwrap();
                for i in 0..2 {
                    for b in a.party(i) {
                        assert!(b.orthonormality_deviation() < BASIS_TOL);
                        assert!(b.completeness_deviation() < BASIS_TOL);
                    }
                }
            }
        }
    }

    fn pair(a: MeasurementBasis, b: MeasurementBasis) -> (Scenario, SettingsAssignment) {
        let s = Scenario::new(2, vec![1, 1]).unwrap();
        let set = SettingsAssignment::new(&s, vec![vec![a], vec![b]]).unwrap();
        (s, set)
    }

    #[test]
    fn product_state_behavior() {
        let st = QuantumState::Pure(make_product_zero(2, 2).unwrap());
        let (s, set) = pair(MeasurementBasis::computational(2), MeasurementBasis::computational(2));
        let b = behavior(&st, &s, &set).unwrap();
        assert_eq!(b.table(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ghz_z_basis_correlations() {
        let st = QuantumState::Pure(make_ghz(2, 2, FRAC_PI_4).unwrap());
        let (s, set) = pair(MeasurementBasis::computational(2), MeasurementBasis::computational(2));
        let b = behavior(&st, &s, &set).unwrap();
        let expect = [0.5, 0.0, 0.0, 0.5];
        for (x, e) in b.table().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn tsirelson_chsh_from_behavior() {
        // A1 = σz, A2 = σx, B1/B2 = σz rotated by ∓π/8 (Bloch ±π/4)
        let st = QuantumState::Pure(make_ghz(2, 2, FRAC_PI_4).unwrap());
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        let set = SettingsAssignment::new(
            &s,
            vec![
                vec![MeasurementBasis::from_bloch([0.0, 0.0, 1.0]), MeasurementBasis::from_bloch([1.0, 0.0, 0.0])],
                vec![MeasurementBasis::qubit_unitary(FRAC_PI_8, 0.0, std::f64::consts::PI), MeasurementBasis::qubit_unitary(FRAC_PI_8, 0.0, 0.0)],
            ],
        )
        .unwrap();
        let b = behavior(&st, &s, &set).unwrap();
        let e = |i: usize, j: usize| {
            b.prob(&[i, j], &[0, 0]) + b.prob(&[i, j], &[1, 1]) - b.prob(&[i, j], &[0, 1]) - b.prob(&[i, j], &[1, 0])
        };
        let chsh = e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1);
        assert!((chsh - 2.0 * SQRT_2).abs() < 1e-12, "{chsh}");
    }

    #[test]
    fn fast_path_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = QuantumState::Pure(crate::state::random_pure_state(3, 2, 9).unwrap());
        let mixed = QuantumState::Mixed(crate::state::make_named(crate::state::NamedState::Werner2).unwrap().to_density_matrix());
        let s3 = Scenario::new(2, vec![2, 3, 1]).unwrap();
        let s2 = Scenario::new(2, vec![2, 2]).unwrap();
        for _ in 0..20 {
            let set = sample_settings(&s3, &mut rng, SamplingMode::Independent).unwrap();
            let fast = behavior(&st, &s3, &set).unwrap();
            let slow = behavior_direct(&st, &s3, &set).unwrap();
            let mixed3 = QuantumState::Mixed(st.to_density_matrix());
            let fast_m = behavior(&mixed3, &s3, &set).unwrap();
            for ((a, b), m) in fast.table().iter().zip(slow.table()).zip(fast_m.table()) {
                assert!((a - b).abs() < 1e-13 && (a - m).abs() < 1e-13);
            }
            let set2 = sample_settings(&s2, &mut rng, SamplingMode::Independent).unwrap();
            let f = behavior(&mixed, &s2, &set2).unwrap();
            let g = behavior_direct(&mixed, &s2, &set2).unwrap();
            for (a, b) in f.table().iter().zip(g.table()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn behavior_rejects_mismatch() {
        let st = QuantumState::Pure(make_product_zero(3, 2).unwrap());
        let (s, set) = pair(MeasurementBasis::computational(2), MeasurementBasis::computational(2));
        assert!(matches!(behavior(&st, &s, &set), Err(Error::Dimension(_))));
    }

    #[test]
    fn behavior_validation() {
        let s = Scenario::new(2, vec![1, 1]).unwrap();
        assert!(Behavior::new(s.clone(), vec![0.25; 4]).is_ok());
        assert!(Behavior::new(s.clone(), vec![0.3; 4]).is_err());
        assert!(Behavior::new_unchecked(s.clone(), vec![1.5, 0.0, 0.0, 0.0]).is_err());
        assert!(Behavior::new_unchecked(s, vec![0.25; 3]).is_err());
        // signaling: Bob's marginal depends on Alice's setting
        let s = Scenario::new(2, vec![2, 1]).unwrap();
        let t = vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert!(Behavior::new(s.clone(), t.clone()).is_err());
        assert!(Behavior::new_unchecked(s, t).unwrap().no_signaling_deviation() > 0.5);
    }
}
