//! Local-realistic models as linear programs.
//!
//! A behavior admits a local model iff it is a convex combination of the
//! `d^(Σ m_i)` deterministic strategies, one per assignment of an outcome to
//! every setting of every party. [`LocalProgram`] holds the 0/1 incidence
//! between strategies and behavior entries; [`solve_feasibility`] decides
//! membership with a phase-one simplex and returns either the local model or
//! a Farkas certificate, which [`extract_bell_functional`] turns into a
//! violated Bell inequality.
//!
//! # Reduced rows
//!
//! The incidence matrix is a tensor product of single-party matrices, each
//! of rank `m_i (d − 1) + 1`. Keeping, for every party, the rows of setting
//! 0 plus the rows `r < d − 1` of the other settings gives an independent
//! subset spanning all rows. The solver first works on that subset. A model
//! found there is checked against every row; if the behavior is signaling
//! and the check fails, the full system is solved instead. A certificate
//! found on the subset is padded with zeros and stays valid for the full
//! system.

mod oracle;
mod simplex;

pub use oracle::{chsh_oracle, chsh_values, max_abs_chsh, vertex_membership_oracle, VERTEX_ORACLE_CAP};

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Behavior;
use crate::state::{Scenario, DEFAULT_STRATEGY_CAP};
use simplex::{ColumnSource, Columns, PhaseOne, Scratch};

/// Default threshold on the phase-one optimum.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// A local model must reproduce every behavior entry to this accuracy.
pub const MODEL_TOL: f64 = 1e-7;
/// Slack allowed in `yᵀA ≤ 0` when checking a certificate.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VerdictKind {
    Local,
    Nonlocal,
}

/// Outcome of a feasibility test.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Phase-one optimum: total infeasibility of the marginal constraints.
    pub margin: f64,
    /// Weights on deterministic strategies when local.
    pub model: Option<Vec<f64>>,
    /// Farkas vector over all rows (marginal rows, then normalization) when
    /// nonlocal.
    pub certificate: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Strategy/row incidence for one scenario. Independent of the behavior, so
/// it is built once and shared across trials.
#[derive(Debug)]
pub struct LpStructure {
    scenario: Scenario,
    num_vars: usize,
    /// Full row index of every reduced row.
    reduced_rows: Vec<usize>,
    reduced_offsets: Vec<usize>,
    reduced_entries: Vec<u32>,
    /// Full incidence including the normalization row (last).
    full_offsets: Vec<usize>,
    full_entries: Vec<u32>,
    reduced_factors: Factors,
    full_factors: Factors,
    /// Full row of each entry of the party-major marginal tensor.
    full_tensor_rows: Vec<u32>,
}

/// Per-party incidence: `hits[i][s]` lists the local rows of party `i` hit
/// by its local strategy `s`; `rows[i]` is the number of local rows.
#[derive(Debug)]
struct Factors {
    rows: Vec<usize>,
    hits: Vec<Vec<Vec<usize>>>,
}

impl Factors {
    fn new(settings: &[usize], d: usize, local_rows: &[Vec<(usize, usize)>]) -> Self {
        let hits = settings
            .iter()
            .zip(local_rows)
            .map(|(&m, rows)| {
                (0..d.pow(m as u32))
                    .map(|s| {
                        let digits = local_digits(s, m, d);
                        rows.iter()
                            .enumerate()
                            .filter(|(_, &(k, r))| digits[k] == r)
                            .map(|(p, _)| p)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { rows: local_rows.iter().map(Vec::len).collect(), hits }
    }
}

fn local_digits(mut s: usize, m: usize, d: usize) -> Vec<usize> {
    let mut digits = vec![0; m];
    for slot in digits.iter_mut().rev() {
        *slot = s % d;
        s /= d;
    }
    digits
}

/// Column source that prices all strategies at once by contracting the
/// dual vector, viewed as a tensor with one axis per party, one axis at a
/// time against the per-party incidence.
struct ProductColumns<'a> {
    columns: Columns<'a>,
    factors: &'a Factors,
    /// Maps tensor entries to rows when the row order is not party-major.
    gather: Option<&'a [u32]>,
    /// A row hit by every column.
    all_ones_row: Option<usize>,
}

impl ColumnSource for ProductColumns<'_> {
    fn columns(&self) -> Columns<'_> {
        self.columns
    }

    fn dot_all(&self, y: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let n_parties = self.factors.rows.len();
        let Scratch { input, steps } = scratch;
        input.clear();
        match self.gather {
            Some(g) => input.extend(g.iter().map(|&r| y[r as usize])),
            None => input.extend_from_slice(&y[..self.factors.rows.iter().product::<usize>()]),
        }
        steps.resize_with(n_parties, Vec::new);
        // contract the last party first so that later, larger steps run
        // over long contiguous strides
        let mut inner = 1;
        for (i, hits) in self.factors.hits.iter().enumerate().rev() {
            let local = self.factors.rows[i];
            let outer: usize = self.factors.rows[..i].iter().product();
            let strategies = hits.len();
            let (done, pending) = steps.split_at_mut(i + 1);
            let next = &mut done[i];
            let cur: &[f64] = if i + 1 == n_parties { input } else { &pending[0] };
            let size = outer * strategies * inner;
            if next.len() != size {
                next.resize(size, 0.0);
            }
            if inner == 1 {
                for (a, block) in next.chunks_exact_mut(strategies).enumerate() {
                    let src = &cur[a * local..(a + 1) * local];
                    for (o, rows) in block.iter_mut().zip(hits) {
                        *o = rows.iter().map(|&p| src[p]).sum();
                    }
                }
            } else {
                for a in 0..outer {
                    for (s, rows) in hits.iter().enumerate() {
                        let o = &mut next[(a * strategies + s) * inner..][..inner];
                        let src = |p: usize| &cur[(a * local + p) * inner..][..inner];
                        match rows.split_first() {
                            None => o.fill(0.0),
                            Some((&first, rest)) => {
                                o.copy_from_slice(src(first));
                                for &p in rest {
                                    o.iter_mut().zip(src(p)).for_each(|(o, v)| *o += v);
                                }
                            }
                        }
                    }
                }
            }
            inner *= strategies;
        }
        let shift = self.all_ones_row.map_or(0.0, |r| y[r]);
        out.iter_mut().zip(steps[0].iter()).for_each(|(o, v)| *o = v + shift);
    }
}

impl LpStructure {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_cap(scenario, DEFAULT_STRATEGY_CAP)
    }

    pub fn with_cap(scenario: &Scenario, cap: u64) -> Result<Self> {
        let total_settings: usize = scenario.settings().iter().sum();
        let required = (scenario.local_dim() as u128)
            .checked_pow(total_settings as u32)
            .unwrap_or(u128::MAX);
        if required > cap as u128 {
            return Err(Error::CapExceeded { required, cap });
        }
        let d = scenario.local_dim();
        let n_parties = scenario.num_parties();
        let settings = scenario.settings();
        let outcomes = scenario.num_outcome_tuples();
        let num_vars = scenario.num_strategies();
        let marginal_rows = scenario.behavior_len();

        // per-party local rows (k, r) kept in the reduced system
        let local_rows: Vec<Vec<(usize, usize)>> = settings
            .iter()
            .map(|&m| {
                (0..m)
                    .flat_map(|k| (0..d).map(move |r| (k, r)))
                    .filter(|&(k, r)| k == 0 || r + 1 < d)
                    .collect()
            })
            .collect();
        let local_pos = |i: usize, k: usize, r: usize| -> Option<usize> {
            local_rows[i].iter().position(|&x| x == (k, r))
        };
        let reduced_count: usize = local_rows.iter().map(Vec::len).product();
        let mut reduced_rows = Vec::with_capacity(reduced_count);
        for idx in 0..reduced_count {
            let mut rest = idx;
            let mut ks = vec![0; n_parties];
            let mut rs = vec![0; n_parties];
            for i in (0..n_parties).rev() {
                let len = local_rows[i].len();
                let (k, r) = local_rows[i][rest % len];
                ks[i] = k;
                rs[i] = r;
                rest /= len;
            }
            reduced_rows.push(scenario.setting_index(&ks) * outcomes + scenario.outcome_index(&rs));
        }

        let mut reduced_offsets = Vec::with_capacity(num_vars + 1);
        let mut reduced_entries = Vec::new();
        let mut full_offsets = Vec::with_capacity(num_vars + 1);
        let mut full_entries = Vec::with_capacity(num_vars * (scenario.num_setting_tuples() + 1));
        reduced_offsets.push(0);
        full_offsets.push(0);

        let mut digits = vec![0usize; total_settings];
        let mut party_rows: Vec<Vec<usize>> = vec![Vec::new(); n_parties];
        for j in 0..num_vars {
            let mut x = j;
            for slot in digits.iter_mut().rev() {
                *slot = x % d;
                x /= d;
            }
            let strategy = split_strategy(&digits, settings);

            for kidx in 0..scenario.num_setting_tuples() {
                let ks = scenario.setting_tuple(kidx);
                let r = ks
                    .iter()
                    .zip(&strategy)
                    .fold(0, |acc, (&k, s)| acc * d + s[k]);
                full_entries.push((kidx * outcomes + r) as u32);
            }
            full_entries.push(marginal_rows as u32);
            full_offsets.push(full_entries.len());

            for (i, rows) in party_rows.iter_mut().enumerate() {
                rows.clear();
                for (k, &r) in strategy[i].iter().enumerate() {
                    if let Some(p) = local_pos(i, k, r) {
                        rows.push(p);
                    }
                }
            }
            push_product(&party_rows, &local_rows, &mut reduced_entries);
            reduced_offsets.push(reduced_entries.len());
        }

        let all_rows: Vec<Vec<(usize, usize)>> = settings
            .iter()
            .map(|&m| (0..m).flat_map(|k| (0..d).map(move |r| (k, r))).collect())
            .collect();
        let mut full_tensor_rows = Vec::with_capacity(marginal_rows);
        for t in 0..marginal_rows {
            let mut rest = t;
            let mut ks = vec![0; n_parties];
            let mut rs = vec![0; n_parties];
            for i in (0..n_parties).rev() {
                let p = rest % (settings[i] * d);
                rest /= settings[i] * d;
                ks[i] = p / d;
                rs[i] = p % d;
            }
            full_tensor_rows.push((scenario.setting_index(&ks) * outcomes + scenario.outcome_index(&rs)) as u32);
        }

        Ok(Self {
            scenario: scenario.clone(),
            num_vars,
            reduced_rows,
            reduced_offsets,
            reduced_entries,
            full_offsets,
            full_entries,
            reduced_factors: Factors::new(settings, d, &local_rows),
            full_factors: Factors::new(settings, d, &all_rows),
            full_tensor_rows,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Number of marginal rows, `Π m_i · d^N`.
    pub fn num_marginal_rows(&self) -> usize {
        self.scenario.behavior_len()
    }

    /// Marginal rows plus the normalization row.
    pub fn num_rows(&self) -> usize {
        self.num_marginal_rows() + 1
    }

    pub fn num_reduced_rows(&self) -> usize {
        self.reduced_rows.len()
    }

    /// Rows (marginal and normalization) in which strategy `j` has a one.
    pub fn column(&self, j: usize) -> &[u32] {
        &self.full_entries[self.full_offsets[j]..self.full_offsets[j + 1]]
    }

    /// Outcome assigned by strategy `j` to each (party, setting).
    pub fn strategy(&self, j: usize) -> Vec<Vec<usize>> {
        let d = self.scenario.local_dim();
        let total: usize = self.scenario.settings().iter().sum();
        let mut digits = vec![0; total];
        let mut x = j;
        for slot in digits.iter_mut().rev() {
            *slot = x % d;
            x /= d;
        }
        split_strategy(&digits, self.scenario.settings())
    }

    fn full_columns(&self) -> ProductColumns<'_> {
        ProductColumns {
            columns: Columns { offsets: &self.full_offsets, rows: &self.full_entries },
            factors: &self.full_factors,
            gather: Some(&self.full_tensor_rows),
            all_ones_row: Some(self.num_marginal_rows()),
        }
    }

    fn reduced_columns(&self) -> ProductColumns<'_> {
        ProductColumns {
            columns: Columns { offsets: &self.reduced_offsets, rows: &self.reduced_entries },
            factors: &self.reduced_factors,
            gather: None,
            all_ones_row: None,
        }
    }
}

fn split_strategy(digits: &[usize], settings: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(settings.len());
    let mut at = 0;
    for &m in settings {
        out.push(digits[at..at + m].to_vec());
        at += m;
    }
    out
}

/// Appends the mixed-radix indices of the product of per-party row sets.
fn push_product(party_rows: &[Vec<usize>], local_rows: &[Vec<(usize, usize)>], out: &mut Vec<u32>) {
    let mut acc = vec![0usize];
    for (rows, all) in party_rows.iter().zip(local_rows) {
        let radix = all.len();
        acc = acc
            .iter()
            .flat_map(|&a| rows.iter().map(move |&p| a * radix + p))
            .collect();
    }
    out.extend(acc.into_iter().map(|x| x as u32));
}

/// The feasibility program for one behavior.
#[derive(Clone, Debug)]
pub struct LocalProgram {
    structure: Arc<LpStructure>,
    rhs: Vec<f64>,
}

impl LocalProgram {
    pub fn structure(&self) -> &LpStructure {
        &self.structure
    }

    pub fn num_vars(&self) -> usize {
        self.structure.num_vars
    }

    pub fn num_marginal_rows(&self) -> usize {
        self.structure.num_marginal_rows()
    }

    pub fn num_rows(&self) -> usize {
        self.structure.num_rows()
    }

    /// Right-hand side over all rows; the normalization entry is 1.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = self.rhs.clone();
        b.push(1.0);
        b
    }

    pub fn behavior_entries(&self) -> &[f64] {
        &self.rhs
    }

    /// Dense row-major constraint matrix, rows as in [`Self::rhs`].
    pub fn dense_matrix(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.num_vars()]; self.num_rows()];
        for j in 0..self.num_vars() {
            for &r in self.structure.column(j) {
                a[r as usize][j] = 1;
            }
        }
        a
    }

    /// `max_row |A x − b|` over all rows.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.num_rows()];
        for (j, &v) in x.iter().enumerate() {
            if v != 0.0 {
                for &r in self.structure.column(j) {
                    ax[r as usize] += v;
                }
            }
        }
        ax.iter()
            .zip(self.rhs().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks `yᵀA ≤ CERTIFICATE_TOL` columnwise and `yᵀb > 0`.
    pub fn is_farkas_certificate(&self, y: &[f64]) -> bool {
        if y.len() != self.num_rows() {
            return false;
        }
        let yb: f64 = y.iter().zip(self.rhs().iter()).map(|(a, b)| a * b).sum();
        if !(yb > 0.0) {
            return false;
        }
        (0..self.num_vars()).all(|j| {
            let ya: f64 = self.structure.column(j).iter().map(|&r| y[r as usize]).sum();
            ya <= CERTIFICATE_TOL
        })
    }

    /// Writes the program as text: `#` header lines, then one line per row
    /// with the 0/1 coefficients followed by the right-hand side.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let s = self.structure.scenario();
        writeln!(out, "# bellpv local program v1")?;
        writeln!(out, "# d={} settings={}", s.local_dim(), s)?;
        writeln!(out, "# rows {} cols {}", self.num_rows(), self.num_vars())?;
        let b = self.rhs();
        for (row, rhs) in self.dense_matrix().iter().zip(&b) {
            let mut line = String::with_capacity(row.len() * 2 + 24);
            for &a in row {
                line.push(if a == 1 { '1' } else { '0' });
                line.push(' ');
            }
            line.push_str(&format!("{rhs:.17e}"));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Builds the feasibility program for `behavior`.
pub fn build_lp(scenario: &Scenario, behavior: &Behavior) -> Result<LocalProgram> {
    let structure = Arc::new(LpStructure::new(scenario)?);
    build_lp_with(structure, behavior)
}

/// Like [`build_lp`] with a precomputed structure.
pub fn build_lp_with(structure: Arc<LpStructure>, behavior: &Behavior) -> Result<LocalProgram> {
    if behavior.scenario() != structure.scenario() {
        return Err(Error::Dimension(format!(
            "behavior scenario {} does not match program scenario {}",
            behavior.scenario(),
            structure.scenario()
        )));
    }
    Ok(LocalProgram { structure, rhs: behavior.table().to_vec() })
}

/// Reusable solver workspace.
#[derive(Debug)]
pub struct FeasibilitySolver {
    tol: f64,
    max_iterations: Option<usize>,
    phase_one: PhaseOne,
}

impl Default for FeasibilitySolver {
    fn default() -> Self {
        Self::new(DEFAULT_TOLERANCE)
    }
}

impl FeasibilitySolver {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_iterations: None, phase_one: PhaseOne::new() }
    }

    pub fn with_max_iterations(mut self, limit: usize) -> Self {
        self.max_iterations = Some(limit);
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn solve(&mut self, lp: &LocalProgram) -> Result<Verdict> {
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {}", self.tol)));
        }
        let s = &*lp.structure;
        let b_reduced: Vec<f64> = s.reduced_rows.iter().map(|&r| lp.rhs[r]).collect();
        let reduced = s.reduced_columns();
        let limit = self
            .max_iterations
            .unwrap_or(50 * (s.num_vars + b_reduced.len()) + 1000);
        let objective = self
            .phase_one
            .solve(&reduced, &b_reduced, limit)
            .map_err(|e| Error::Solver(e.to_string()))?;
        let mut iterations = self.phase_one.iterations();

        if objective > self.tol {
            let mut y = vec![0.0; lp.num_rows()];
            for (&row, &v) in s.reduced_rows.iter().zip(self.phase_one.duals()) {
                y[row] = v;
            }
            if lp.is_farkas_certificate(&y) {
                return Ok(Verdict {
                    kind: VerdictKind::Nonlocal,
                    margin: objective,
                    model: None,
                    certificate: Some(y),
                    iterations,
                });
            }
        } else {
            let model = self.phase_one.structural_values();
            if self.model_is_sound(lp, &model) {
                return Ok(Verdict {
                    kind: VerdictKind::Local,
                    margin: objective,
                    model: Some(model),
                    certificate: None,
                    iterations,
                });
            }
        }

        // signaling input or numerical trouble on the reduced system
        let b_full = lp.rhs();
        let limit = self
            .max_iterations
            .unwrap_or(50 * (s.num_vars + b_full.len()) + 1000);
        let objective = self
            .phase_one
            .solve(&s.full_columns(), &b_full, limit)
            .map_err(|e| Error::Solver(e.to_string()))?;
        iterations += self.phase_one.iterations();
        if objective > self.tol {
            let y = self.phase_one.duals().to_vec();
            if !lp.is_farkas_certificate(&y) {
                return Err(Error::Solver("certificate failed verification".into()));
            }
            Ok(Verdict {
                kind: VerdictKind::Nonlocal,
                margin: objective,
                model: None,
                certificate: Some(y),
                iterations,
            })
        } else {
            let model = self.phase_one.structural_values();
            if !self.model_is_sound(lp, &model) {
                return Err(Error::Solver("local model failed verification".into()));
            }
            Ok(Verdict {
                kind: VerdictKind::Local,
                margin: objective,
                model: Some(model),
                certificate: None,
                iterations,
            })
        }
    }

    fn model_is_sound(&self, lp: &LocalProgram, model: &[f64]) -> bool {
        let total: f64 = model.iter().sum();
        (total - 1.0).abs() <= 1e-9 && lp.max_residual(model) <= MODEL_TOL
    }
}

/// Decides whether `lp` admits a local model.
pub fn solve_feasibility(lp: &LocalProgram, tol: f64) -> Result<Verdict> {
    FeasibilitySolver::new(tol).solve(lp)
}

/// A Bell inequality `Σ c·P ≤ local_bound` over behavior entries.
#[derive(Clone, Debug, PartialEq)]
pub struct BellFunctional {
    pub scenario: Scenario,
    pub coefficients: Vec<f64>,
    pub local_bound: f64,
    pub quantum_value: f64,
}

impl BellFunctional {
    pub fn evaluate(&self, behavior: &Behavior) -> f64 {
        self.coefficients.iter().zip(behavior.table()).map(|(c, p)| c * p).sum()
    }

    pub fn violation(&self) -> f64 {
        self.quantum_value - self.local_bound
    }
}

/// Turns a nonlocal verdict's certificate into a Bell functional.
///
/// The normalization-row multiplier is folded into the coefficients of the
/// first setting tuple (every normalized behavior and every strategy puts
/// total weight 1 there), and the same entries are then shifted so that the
/// least-valued deterministic strategy scores 0. The local bound is the
/// maximum over all strategies by enumeration.
pub fn extract_bell_functional(verdict: &Verdict, lp: &LocalProgram) -> Result<BellFunctional> {
    let y = match (&verdict.kind, &verdict.certificate) {
        (VerdictKind::Nonlocal, Some(y)) => y,
        _ => {
            return Err(Error::Argument(
                "a Bell functional needs a nonlocal verdict with a certificate".into(),
            ))
        }
    };
    let s = lp.structure();
    let rows = s.num_marginal_rows();
    let outcomes = s.scenario().num_outcome_tuples();
    let mut coefficients = y[..rows].to_vec();
    let norm = y[rows];
    coefficients[..outcomes].iter_mut().for_each(|c| *c += norm);

    let values: Vec<f64> = (0..s.num_vars())
        .map(|j| {
            s.column(j)
                .iter()
                .filter(|&&r| (r as usize) < rows)
                .map(|&r| coefficients[r as usize])
                .sum()
        })
        .collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    coefficients[..outcomes].iter_mut().for_each(|c| *c -= min);
    let local_bound = values.iter().map(|v| v - min).fold(f64::NEG_INFINITY, f64::max);
    let quantum_value = coefficients
        .iter()
        .zip(lp.behavior_entries())
        .map(|(c, p)| c * p)
        .sum();
    Ok(BellFunctional {
        scenario: s.scenario().clone(),
        coefficients,
        local_bound,
        quantum_value,
    })
}
