//! Phase-one revised simplex over 0/1 columns.
//!
//! Solves `min Σ a` subject to `A x + a = b`, `x, a ≥ 0` with `b ≥ 0`,
//! starting from the all-artificial basis. The basis inverse is kept
//! explicitly and updated with one eta step per pivot; it is rebuilt by
//! Gauss-Jordan elimination whenever the primal residual drifts.
//!
//! Pricing uses Devex reference weights with lowest-index tie-breaking. A
//! long streak of degenerate pivots switches to Bland's rule until progress
//! resumes.
//! Artificials that leave the basis never re-enter.

/// Column-compressed 0/1 matrix: column `j` has ones in rows
/// `rows[offsets[j]..offsets[j + 1]]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Columns<'a> {
    pub offsets: &'a [usize],
    pub rows: &'a [u32],
}

impl<'a> Columns<'a> {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn col(&self, j: usize) -> &'a [u32] {
        &self.rows[self.offsets[j]..self.offsets[j + 1]]
    }
}

/// A 0/1 constraint matrix as seen by the solver.
pub(crate) trait ColumnSource {
    fn columns(&self) -> Columns<'_>;

    /// `out[j] = Σ_{r ∈ column j} y[r]` for every column.
    fn dot_all(&self, y: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let _ = scratch;
        let cols = self.columns();
        for (j, o) in out.iter_mut().enumerate() {
            *o = cols.col(j).iter().map(|&r| y[r as usize]).sum();
        }
    }
}

impl ColumnSource for Columns<'_> {
    fn columns(&self) -> Columns<'_> {
        *self
    }
}

/// Reusable buffers for [`ColumnSource::dot_all`].
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    pub input: Vec<f64>,
    pub steps: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum SimplexFailure {
    IterationLimit(usize),
    Singular,
    Unbounded,
}

impl std::fmt::Display for SimplexFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimplexFailure::IterationLimit(n) => write!(f, "iteration limit of {n} reached"),
            SimplexFailure::Singular => f.write_str("basis became singular"),
            SimplexFailure::Unbounded => f.write_str("phase one reported an unbounded ray"),
        }
    }
}

const PRICE_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-10;
const REFRESH_EVERY: usize = 50;

#[derive(Debug, Default)]
pub(crate) struct PhaseOne {
    m: usize,
    n: usize,
    binv: Vec<f64>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    is_basic: Vec<bool>,
    dots: Vec<f64>,
    weights: Vec<f64>,
    row_r: Vec<f64>,
    scratch: Scratch,
    iterations: usize,
}

impl PhaseOne {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Dual vector `c_Bᵀ B⁻¹` of the final basis.
    pub fn duals(&self) -> &[f64] {
        &self.y
    }

    /// Values of the structural variables.
    pub fn structural_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                x[v] = self.xb[i].max(0.0);
            }
        }
        x
    }

    fn reset(&mut self, m: usize, n: usize, b: &[f64]) {
        self.m = m;
        self.n = n;
        self.binv.clear();
        self.binv.resize(m * m, 0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        self.basis.clear();
        self.basis.extend(n..n + m);
        self.xb.clear();
        self.xb.extend_from_slice(b);
        self.y.clear();
        self.y.resize(m, 1.0);
        self.alpha.clear();
        self.alpha.resize(m, 0.0);
        self.is_basic.clear();
        self.is_basic.resize(n, false);
        self.weights.clear();
        self.weights.resize(n, 1.0);
        self.iterations = 0;
    }

    fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&v, _)| v >= self.n)
            .map(|(_, &x)| x)
            .sum()
    }

    /// Runs phase one and returns the optimal total infeasibility.
    pub fn solve<C: ColumnSource>(&mut self, source: &C, b: &[f64], max_iterations: usize) -> Result<f64, SimplexFailure> {
        let cols = source.columns();
        let m = b.len();
        let n = cols.len();
        debug_assert!(b.iter().all(|&v| v >= 0.0));
        self.reset(m, n, b);

        let mut fresh = true;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations > 0 && self.iterations.is_multiple_of(REFRESH_EVERY) && !fresh {
                self.refresh(cols, b)?;
                fresh = true;
            }
            let bland = degenerate_run > 2 * m;
            let Some((q, dq)) = self.price(source, bland) else {
                if fresh {
                    break;
                }
                self.refresh(cols, b)?;
                fresh = true;
                continue;
            };

            // alpha = B⁻¹ A_q
            let col = cols.col(q);
            for i in 0..m {
                let row = &self.binv[i * m..(i + 1) * m];
                self.alpha[i] = col.iter().map(|&c| row[c as usize]).sum();
            }

            let r = self.ratio_test(bland).ok_or(SimplexFailure::Unbounded)?;
            let theta = self.xb[r].max(0.0) / self.alpha[r];
            degenerate_run = if theta <= RATIO_TIE { degenerate_run + 1 } else { 0 };
            if !bland {
                self.update_weights(source, r, q);
            }
            self.pivot(r, q, dq, theta);
            fresh = false;

            self.iterations += 1;
            if self.iterations >= max_iterations {
                return Err(SimplexFailure::IterationLimit(max_iterations));
            }
        }
        Ok(self.objective().max(0.0))
    }

    fn price<C: ColumnSource>(&mut self, source: &C, bland: bool) -> Option<(usize, f64)> {
        self.dots.resize(self.n, 0.0);
        source.dot_all(&self.y, &mut self.dots, &mut self.scratch);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.is_basic[j] {
                continue;
            }
            let dj = -self.dots[j];
            if dj < -PRICE_TOL {
                if bland {
                    return Some((j, dj));
                }
                let score = dj * dj / self.weights[j];
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((j, score));
                }
            }
        }
        best.map(|(j, _)| (j, -self.dots[j]))
    }

    /// Devex reference weights, updated from the pivot row `e_rᵀ B⁻¹ A`.
    fn update_weights<C: ColumnSource>(&mut self, source: &C, r: usize, q: usize) {
        let m = self.m;
        self.row_r.clear();
        self.row_r.extend_from_slice(&self.binv[r * m..(r + 1) * m]);
        source.dot_all(&self.row_r, &mut self.dots, &mut self.scratch);
        let arq = self.alpha[r];
        let wq = self.weights[q];
        for j in 0..self.n {
            if !self.is_basic[j] && j != q {
                let ratio = self.dots[j] / arq;
                self.weights[j] = self.weights[j].max(ratio * ratio * wq);
            }
        }
        let leaving = self.basis[r];
        if leaving < self.n {
            self.weights[leaving] = (wq / (arq * arq)).max(1.0);
        }
    }

    fn ratio_test(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.alpha[i];
            if a <= PIVOT_TOL {
                continue;
            }
            let t = self.xb[i].max(0.0) / a;
            match best {
                None => best = Some((i, t)),
                Some((bi, bt)) => {
                    if t < bt - RATIO_TIE {
                        best = Some((i, t));
                    } else if t <= bt + RATIO_TIE && self.prefer_leaving(i, bi, bland) {
                        best = Some((i, t.min(bt)));
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Tie-break between rows `i` and `j` for the leaving variable.
    fn prefer_leaving(&self, i: usize, j: usize, bland: bool) -> bool {
        let (vi, vj) = (self.basis[i], self.basis[j]);
        if bland {
            return vi < vj;
        }
        let (ai, aj) = (vi >= self.n, vj >= self.n);
        if ai != aj {
            return ai;
        }
        vi < vj
    }

    fn pivot(&mut self, r: usize, q: usize, dq: f64, theta: f64) {
        let m = self.m;
        let piv = self.alpha[r];
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            row.iter_mut().for_each(|v| *v /= piv);
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = self.alpha[i];
            if f != 0.0 {
                row.iter_mut().zip(pivot_row.iter()).for_each(|(v, p)| *v -= f * p);
            }
        }
        for (off, row) in after.chunks_exact_mut(m).enumerate() {
            let f = self.alpha[r + 1 + off];
            if f != 0.0 {
                row.iter_mut().zip(pivot_row.iter()).for_each(|(v, p)| *v -= f * p);
            }
        }
        for i in 0..m {
            if i != r {
                self.xb[i] = (self.xb[i] - theta * self.alpha[i]).max(0.0);
            }
        }
        self.xb[r] = theta;
        self.y.iter_mut().zip(pivot_row.iter()).for_each(|(y, p)| *y += dq * p);

        let leaving = self.basis[r];
        if leaving < self.n {
            self.is_basic[leaving] = false;
        }
        self.basis[r] = q;
        self.is_basic[q] = true;
    }

    /// Recomputes duals from the inverse and rebuilds the inverse if the
    /// primal residual has drifted.
    fn refresh(&mut self, cols: Columns<'_>, b: &[f64]) -> Result<(), SimplexFailure> {
        let m = self.m;
        let mut resid = b.to_vec();
        for (i, &v) in self.basis.iter().enumerate() {
            let x = self.xb[i];
            if v < self.n {
                for &row in cols.col(v) {
                    resid[row as usize] -= x;
                }
            } else {
                resid[v - self.n] -= x;
            }
        }
        let drift = resid.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        if drift > DRIFT_TOL {
            self.reinvert(cols)?;
            for i in 0..m {
                let row = &self.binv[i * m..(i + 1) * m];
                self.xb[i] = row.iter().zip(b).map(|(a, b)| a * b).sum::<f64>().max(0.0);
            }
        }
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &v) in self.basis.iter().enumerate() {
            if v >= self.n {
                let row = &self.binv[i * m..(i + 1) * m];
                self.y.iter_mut().zip(row).for_each(|(y, a)| *y += a);
            }
        }
        Ok(())
    }

    fn reinvert(&mut self, cols: Columns<'_>) -> Result<(), SimplexFailure> {
        let m = self.m;
        // a = B (row-major), inv = I; eliminate with partial pivoting
        let mut a = vec![0.0f64; m * m];
        for (i, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                for &row in cols.col(v) {
                    a[row as usize * m + i] = 1.0;
                }
            } else {
                a[(v - self.n) * m + i] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))
                .expect("nonempty range");
            if a[p * m + c].abs() < 1e-12 {
                return Err(SimplexFailure::Singular);
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = a[i * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[i * m + k] -= f * a[c * m + k];
                        inv[i * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        Ok(())
    }
}
