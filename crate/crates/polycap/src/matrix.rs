//! Matrix-backed constructions and oracles: product polynomials,
//! determinantal polynomials, permanents, mixed discriminants, enumeration of
//! constant-line-sum integer matrices and the extremal doubly stochastic
//! matrices with a sparse column.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::HomPoly;

/// Size guard for the symbolic product-polynomial expansion.
pub const PROD_MAX_N: usize = 10;
/// Size guard for the symbolic determinantal expansion.
pub const DET_MAX_N: usize = 6;
/// Size guard for the Ryser permanent.
pub const RYSER_MAX_N: usize = 20;
/// Size guard for the naive permutation-sum permanent.
pub const NAIVE_PERMANENT_MAX_N: usize = 9;
/// Size guard for the inclusion-exclusion mixed discriminant.
pub const MIXED_DISC_MAX_N: usize = 10;

/// Iterates all permutations of `0..n` via Heap's algorithm, passing the
/// permutation and its sign. Each step swaps exactly two entries, so the sign
/// simply alternates.
pub(crate) fn for_each_permutation<F: FnMut(&[usize], f64)>(n: usize, mut f: F) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut sign = 1.0;
    f(&perm, sign);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            f(&perm, sign);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Square matrix with nonnegative real entries, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("matrix dimension must be positive".into()));
        }
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Validation(
                "matrix entries must be finite and nonnegative".into(),
            ));
        }
        Ok(NonnegMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        NonnegMatrix { n, entries }
    }

    /// The matrix with every entry equal to `v`.
    pub fn constant(n: usize, v: f64) -> Self {
        NonnegMatrix {
            n,
            entries: vec![v; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Number of nonzero entries in column `j`.
    pub fn column_nonzeros(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, j) != 0.0).count()
    }

    pub fn has_zero_row(&self) -> bool {
        (0..self.n).any(|i| self.row(i).iter().all(|&v| v == 0.0))
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.row_sums().iter().all(|&s| (s - 1.0).abs() <= tol)
            && self.col_sums().iter().all(|&s| (s - 1.0).abs() <= tol)
    }

    /// Entrywise scaling by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        NonnegMatrix::new(self.n, self.entries.iter().map(|&v| v * c).collect())
    }

    /// The extremal doubly stochastic matrix with `k` rows `(a,..,a,b)` and
    /// `n-k` rows `(c,..,c,0)`, where `a = (k-1)/(k(n-1))`, `b = 1/k`,
    /// `c = 1/(n-1)`. Requires `1 < k <= n-1`.
    pub fn special_d(n: usize, k: usize) -> Result<Self> {
        if !(1 < k && k <= n.saturating_sub(1)) {
            return Err(Error::Argument(format!(
                "special matrix requires 1 < k <= n-1, got n={n}, k={k}"
            )));
        }
        let a = (k as f64 - 1.0) / (k as f64 * (n as f64 - 1.0));
        let b = 1.0 / k as f64;
        let c = 1.0 / (n as f64 - 1.0);
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = if i < k {
                    if j < n - 1 {
                        a
                    } else {
                        b
                    }
                } else if j < n - 1 {
                    c
                } else {
                    0.0
                };
                entries.push(v);
            }
        }
        NonnegMatrix::new(n, entries)
    }

    /// Symbolic expansion of the product of row linear forms
    /// `prod_i (sum_j A(i,j) x_j)`, a degree-`n` polynomial in `n` variables.
    pub fn prod_polynomial(&self) -> Result<HomPoly> {
        if self.n > PROD_MAX_N {
            return Err(Error::Budget(format!(
                "product polynomial expansion is capped at n={PROD_MAX_N}, got {}",
                self.n
            )));
        }
        let mut acc = HomPoly::monomial(self.n, &vec![0; self.n], 1.0)?;
        for i in 0..self.n {
            acc = acc.mul(&HomPoly::linear_form(self.row(i))?)?;
        }
        Ok(acc)
    }

    /// Permanent by Ryser's inclusion-exclusion with Gray-code subset
    /// iteration, `O(2^n n)`.
    pub fn permanent(&self) -> Result<f64> {
        let n = self.n;
        if n > RYSER_MAX_N {
            return Err(Error::Budget(format!(
                "Ryser permanent is capped at n={RYSER_MAX_N}, got {n}"
            )));
        }
        let mut row_sums = vec![0.0; n];
        let mut total = 0.0;
        let mut prev = 0u64;
        for k in 1u64..(1u64 << n) {
            let gray = k ^ (k >> 1);
            let j = (gray ^ prev).trailing_zeros() as usize;
            if gray & (1 << j) != 0 {
                for (i, rs) in row_sums.iter_mut().enumerate() {
                    *rs += self.get(i, j);
                }
            } else {
                for (i, rs) in row_sums.iter_mut().enumerate() {
                    *rs -= self.get(i, j);
                }
            }
            let prod: f64 = row_sums.iter().product();
            if (n as u32 - gray.count_ones()).is_multiple_of(2) {
                total += prod;
            } else {
                total -= prod;
            }
            prev = gray;
        }
        Ok(total)
    }

    /// Permanent by the defining permutation sum; the oracle for
    /// [`Self::permanent`].
    pub fn permanent_naive(&self) -> Result<f64> {
        let n = self.n;
        if n > NAIVE_PERMANENT_MAX_N {
            return Err(Error::Budget(format!(
                "naive permanent is capped at n={NAIVE_PERMANENT_MAX_N}, got {n}"
            )));
        }
        fn go(a: &NonnegMatrix, row: usize, used: &mut [bool]) -> f64 {
            if row == a.n {
                return 1.0;
            }
            let mut acc = 0.0;
            for j in 0..a.n {
                if used[j] {
                    continue;
                }
                let v = a.get(row, j);
                if v == 0.0 {
                    continue;
                }
                used[j] = true;
                acc += v * go(a, row + 1, used);
                used[j] = false;
            }
            acc
        }
        Ok(go(self, 0, &mut vec![false; n]))
    }

    /// Alternately normalizes rows and columns until the matrix is doubly
    /// stochastic within `tol`. Requires every row and column sum positive.
    pub fn sinkhorn_balance(&self, tol: f64, max_iter: usize) -> Result<NonnegMatrix> {
        let n = self.n;
        if self.row_sums().iter().any(|&s| s <= 0.0) || self.col_sums().iter().any(|&s| s <= 0.0) {
            return Err(Error::Validation(
                "Sinkhorn balancing requires positive row and column sums".into(),
            ));
        }
        let mut m = self.entries.clone();
        for _ in 0..max_iter {
            for i in 0..n {
                let s: f64 = m[i * n..(i + 1) * n].iter().sum();
                for j in 0..n {
                    m[i * n + j] /= s;
                }
            }
            for j in 0..n {
                let s: f64 = (0..n).map(|i| m[i * n + j]).sum();
                for i in 0..n {
                    m[i * n + j] /= s;
                }
            }
            let worst = (0..n)
                .map(|i| {
                    let r: f64 = m[i * n..(i + 1) * n].iter().sum();
                    let c: f64 = (0..n).map(|q| m[q * n + i]).sum();
                    (r - 1.0).abs().max((c - 1.0).abs())
                })
                .fold(0.0, f64::max);
            if worst <= tol {
                return NonnegMatrix::new(n, m);
            }
        }
        Err(Error::Numeric(format!(
            "Sinkhorn balancing did not reach tolerance {tol} in {max_iter} iterations"
        )))
    }

    /// Parses `n` lines of `n` comma-separated decimals.
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {}: bad number {tok:?}", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse("empty matrix".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse(format!("expected {n} columns in every row")));
        }
        NonnegMatrix::new(n, rows.concat())
    }

    pub fn to_csv_string(&self) -> String {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// An `n`-tuple of real symmetric PSD `n x n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdTuple {
    n: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl PsdTuple {
    /// Validates symmetry (within `1e-9` of the entry scale, then
    /// symmetrizes) and positive semidefiniteness (smallest eigenvalue at
    /// least `-1e-10 * (1 + norm)`).
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = matrices.len();
        if n == 0 {
            return Err(Error::Argument("empty tuple".into()));
        }
        let mut sym = Vec::with_capacity(n);
        for (idx, m) in matrices.into_iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!(
                    "matrix {idx} is {}x{}, expected {n}x{n} (tuple length = dimension)",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let asym = (&m - m.transpose()).iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if asym > 1e-9 * (1.0 + scale) {
                return Err(Error::Validation(format!(
                    "matrix {idx} is not symmetric (defect {asym:.3e})"
                )));
            }
            let s = (&m + m.transpose()) * 0.5;
            let min_eig = s
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |a, &v| a.min(v));
            if min_eig < -1e-10 * (1.0 + scale) {
                return Err(Error::Validation(format!(
                    "matrix {idx} is not PSD (eigenvalue {min_eig:.3e})"
                )));
            }
            sym.push(s);
        }
        Ok(PsdTuple { n, matrices: sym })
    }

    pub fn from_rows(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = rows.len();
        let mats = rows
            .into_iter()
            .map(|m| {
                if m.len() != n || m.iter().any(|row| row.len() != n) {
                    return Err(Error::Dimension(format!(
                        "every matrix must be {n}x{n} (tuple length = dimension)"
                    )));
                }
                Ok(DMatrix::from_row_slice(n, n, &m.concat()))
            })
            .collect::<Result<Vec<_>>>()?;
        PsdTuple::new(mats)
    }

    /// Diagonal tuple carrying the rows of `a`: the determinantal polynomial
    /// reduces to the product polynomial of `a`.
    pub fn diag_tuple(a: &NonnegMatrix) -> Self {
        let n = a.n();
        let matrices = (0..n)
            .map(|i| DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(a.row(i))))
            .collect();
        PsdTuple { n, matrices }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Tuple membership in the doubly stochastic class: each matrix has unit
    /// trace and the tuple sums to the identity.
    pub fn is_doubly_stochastic_tuple(&self, tol: f64) -> bool {
        let n = self.n;
        if self.matrices.iter().any(|m| (m.trace() - 1.0).abs() > tol) {
            return false;
        }
        let mut sum = DMatrix::<f64>::zeros(n, n);
        for m in &self.matrices {
            sum += m;
        }
        (sum - DMatrix::<f64>::identity(n, n))
            .iter()
            .all(|&v| v.abs() <= tol)
    }

    /// Signed coefficients of `det(sum_i t_i A_i)` by Leibniz expansion over
    /// permutations of linear forms, before the nonnegativity clamp.
    pub(crate) fn det_polynomial_raw(&self) -> Result<BTreeMap<Vec<u32>, f64>> {
        let n = self.n;
        if n > DET_MAX_N {
            return Err(Error::Budget(format!(
                "determinantal expansion is capped at n={DET_MAX_N}, got {n}"
            )));
        }
        // forms[r][c][i] = A_i(r, c): the linear form at matrix position (r, c)
        let mut forms = vec![vec![vec![0.0f64; n]; n]; n];
        for (i, m) in self.matrices.iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    forms[r][c][i] = m[(r, c)];
                }
            }
        }
        let mut total: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for_each_permutation(n, |perm, sign| {
            // expand prod_r forms[r][perm[r]] incrementally
            let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
            acc.insert(vec![0u32; n], 1.0);
            for r in 0..n {
                let form = &forms[r][perm[r]];
                let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
                for (exps, coeff) in &acc {
                    for (i, &fi) in form.iter().enumerate() {
                        if fi == 0.0 {
                            continue;
                        }
                        let mut e = exps.clone();
                        e[i] += 1;
                        *next.entry(e).or_insert(0.0) += coeff * fi;
                    }
                }
                acc = next;
            }
            for (e, c) in acc {
                *total.entry(e).or_insert(0.0) += sign * c;
            }
        });
        Ok(total)
    }

    /// `det(sum_i t_i A_i)` as a polynomial with nonnegative coefficients.
    /// Cancellation noise within `1e-10` of the coefficient scale (either
    /// sign — exact zeros come out as tiny residues of both signs and would
    /// otherwise pollute the support) is clamped to zero; anything more
    /// negative indicates an invalid tuple and is an error.
    pub fn det_polynomial(&self) -> Result<HomPoly> {
        let raw = self.det_polynomial_raw()?;
        let scale = raw.values().fold(0.0f64, |a, &v| a.max(v.abs()));
        let band = 1e-10 * (1.0 + scale);
        let mut monos = Vec::new();
        for (exps, c) in raw {
            if c < -band {
                return Err(Error::Numeric(format!(
                    "determinantal coefficient {c:.3e} is negative beyond the cancellation band"
                )));
            }
            if c > band {
                monos.push((exps, c));
            }
        }
        HomPoly::new(self.n, self.n as u32, monos)
    }

    /// Mixed discriminant by polarization inclusion-exclusion:
    /// `sum_{S} (-1)^{n-|S|} det(sum_{i in S} A_i)` over nonempty subsets.
    pub fn mixed_discriminant(&self) -> Result<f64> {
        let n = self.n;
        if n > MIXED_DISC_MAX_N {
            return Err(Error::Budget(format!(
                "inclusion-exclusion mixed discriminant is capped at n={MIXED_DISC_MAX_N}, got {n}"
            )));
        }
        let mut total = 0.0;
        for mask in 1u32..(1u32 << n) {
            let mut sum = DMatrix::<f64>::zeros(n, n);
            for (i, m) in self.matrices.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    sum += m;
                }
            }
            let det = sum.determinant();
            if (n as u32 - mask.count_ones()).is_multiple_of(2) {
                total += det;
            } else {
                total -= det;
            }
        }
        Ok(total)
    }
}

impl Serialize for PsdTuple {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw {
            n: usize,
            matrices: Vec<Vec<Vec<f64>>>,
        }
        let matrices = self
            .matrices
            .iter()
            .map(|m| {
                (0..self.n)
                    .map(|r| (0..self.n).map(|c| m[(r, c)]).collect())
                    .collect()
            })
            .collect();
        Raw {
            n: self.n,
            matrices,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PsdTuple {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            matrices: Vec<Vec<Vec<f64>>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.matrices.len() != raw.n {
            return Err(D::Error::custom("tuple length must equal n"));
        }
        PsdTuple::from_rows(raw.matrices).map_err(D::Error::custom)
    }
}

/// Square matrix with nonnegative integer entries and all row and column sums
/// equal to `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaMatrix {
    pub n: usize,
    pub k: u32,
    pub entries: Vec<u32>,
}

impl LambdaMatrix {
    pub fn new(n: usize, k: u32, entries: Vec<u32>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension("wrong entry count".into()));
        }
        let m = LambdaMatrix { n, k, entries };
        for i in 0..n {
            let r: u32 = (0..n).map(|j| m.get(i, j)).sum();
            let c: u32 = (0..n).map(|j| m.get(j, i)).sum();
            if r != k || c != k {
                return Err(Error::Validation(format!(
                    "line sums must all equal {k} (row {i}: {r}, column {i}: {c})"
                )));
            }
        }
        Ok(m)
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }

    pub fn as_nonneg(&self) -> NonnegMatrix {
        NonnegMatrix::new(self.n, self.entries.iter().map(|&v| v as f64).collect())
            .expect("integer entries are valid")
    }

    /// Exact integer permanent by the permutation-sum definition.
    pub fn permanent_exact(&self) -> u64 {
        fn go(m: &LambdaMatrix, row: usize, used: &mut [bool]) -> u64 {
            if row == m.n {
                return 1;
            }
            let mut acc = 0u64;
            for j in 0..m.n {
                if used[j] {
                    continue;
                }
                let v = m.get(row, j);
                if v == 0 {
                    continue;
                }
                used[j] = true;
                acc += v as u64 * go(m, row + 1, used);
                used[j] = false;
            }
            acc
        }
        go(self, 0, &mut vec![false; self.n])
    }
}

/// Enumeration budget for [`enumerate_lambda`].
#[derive(Clone, Copy, Debug)]
pub struct LambdaBudget {
    pub k_max: u32,
    pub n_max: usize,
}

impl Default for LambdaBudget {
    fn default() -> Self {
        LambdaBudget { k_max: 4, n_max: 5 }
    }
}

/// Exhaustive, duplicate-free enumeration of all matrices with constant line
/// sums `k`, in lexicographic row order (rows themselves in lexicographic
/// entry order). Row-by-row backtracking with column-sum feasibility pruning.
pub fn enumerate_lambda(k: u32, n: usize, budget: LambdaBudget) -> Result<LambdaEnumerator> {
    if k == 0 || n == 0 {
        return Err(Error::Argument("enumeration requires k >= 1 and n >= 1".into()));
    }
    if k > budget.k_max || n > budget.n_max {
        return Err(Error::Budget(format!(
            "enumeration budget is k <= {}, n <= {}; got k={k}, n={n}",
            budget.k_max, budget.n_max
        )));
    }
    Ok(LambdaEnumerator {
        k,
        n,
        col_rem: vec![k; n],
        rows: Vec::new(),
        options: Vec::new(),
        cursor: Vec::new(),
        done: false,
    })
}

pub struct LambdaEnumerator {
    k: u32,
    n: usize,
    col_rem: Vec<u32>,
    rows: Vec<Vec<u32>>,
    options: Vec<Vec<Vec<u32>>>,
    cursor: Vec<usize>,
    done: bool,
}

impl LambdaEnumerator {
    /// All rows summing to `k` with entry `j` in `[lo_j, hi_j]`, lexicographic.
    fn row_options(&self) -> Vec<Vec<u32>> {
        let rows_left = (self.n - self.rows.len()) as u32;
        let k = self.k;
        let n = self.n;
        let hi: Vec<u32> = self.col_rem.iter().map(|&c| c.min(k)).collect();
        // every later row adds at most k per column, so entry j must leave
        // col_rem[j] - e_j <= k * (rows_left - 1)
        let lo: Vec<u32> = self
            .col_rem
            .iter()
            .map(|&c| c.saturating_sub(k * (rows_left - 1)))
            .collect();
        let mut out = Vec::new();
        let mut row = vec![0u32; n];
        fn gen(
            j: usize,
            remaining: u32,
            lo: &[u32],
            hi: &[u32],
            row: &mut Vec<u32>,
            out: &mut Vec<Vec<u32>>,
        ) {
            let n = lo.len();
            if j == n {
                if remaining == 0 {
                    out.push(row.clone());
                }
                return;
            }
            let lo_rest: u32 = lo[j + 1..].iter().sum();
            let hi_rest: u32 = hi[j + 1..].iter().sum();
            let e_min = lo[j].max(remaining.saturating_sub(hi_rest));
            let e_max = hi[j].min(remaining.saturating_sub(lo_rest));
            for e in e_min..=e_max {
                row[j] = e;
                gen(j + 1, remaining - e, lo, hi, row, out);
            }
            row[j] = 0;
        }
        gen(0, k, &lo, &hi, &mut row, &mut out);
        out
    }

    fn push_row(&mut self, row: Vec<u32>) {
        for (j, &e) in row.iter().enumerate() {
            self.col_rem[j] -= e;
        }
        self.rows.push(row);
    }

    fn pop_row(&mut self) {
        let row = self.rows.pop().expect("row stack underflow");
        for (j, &e) in row.iter().enumerate() {
            self.col_rem[j] += e;
        }
    }
}

impl Iterator for LambdaEnumerator {
    type Item = LambdaMatrix;

    fn next(&mut self) -> Option<LambdaMatrix> {
        loop {
            if self.done {
                return None;
            }
            let depth = self.rows.len();
            if depth == self.n {
                let entries = self.rows.concat();
                let m = LambdaMatrix {
                    n: self.n,
                    k: self.k,
                    entries,
                };
                self.pop_row();
                return Some(m);
            }
            if self.options.len() == depth {
                self.options.push(self.row_options());
                self.cursor.push(0);
            }
            let i = self.cursor[depth];
            if i >= self.options[depth].len() {
                self.options.pop();
                self.cursor.pop();
                if depth == 0 {
                    self.done = true;
                    return None;
                }
                self.pop_row();
                continue;
            }
            self.cursor[depth] += 1;
            let row = self.options[depth][i].clone();
            self.push_row(row);
        }
    }
}

/// Independent count of constant-line-sum matrices by dynamic programming
/// over column-remainder multisets; the oracle for the enumerator.
pub fn count_lambda_dp(k: u32, n: usize) -> u64 {
    use std::collections::HashMap;
    let mut states: HashMap<Vec<u32>, u64> = HashMap::new();
    states.insert(vec![k; n], 1);
    for _row in 0..n {
        let mut next: HashMap<Vec<u32>, u64> = HashMap::new();
        for (rem, ways) in &states {
            let mut row = vec![0u32; n];
            fn gen(
                j: usize,
                remaining: u32,
                rem: &[u32],
                row: &mut Vec<u32>,
                out: &mut Vec<Vec<u32>>,
            ) {
                let n = rem.len();
                if j == n {
                    if remaining == 0 {
                        out.push(row.clone());
                    }
                    return;
                }
                for e in 0..=remaining.min(rem[j]) {
                    row[j] = e;
                    gen(j + 1, remaining - e, rem, row, out);
                }
                row[j] = 0;
            }
            let mut rows = Vec::new();
            gen(0, k, rem, &mut row, &mut rows);
            for r in rows {
                let new_rem: Vec<u32> = rem.iter().zip(&r).map(|(a, b)| a - b).collect();
                *next.entry(new_rem).or_insert(0) += ways;
            }
        }
        states = next;
    }
    states.get(&vec![0u32; n]).copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::{permanent_exact, rat, RatPoly};
    use approx::assert_relative_eq;
    use num::traits::ToPrimitive;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permanent_examples() {
        assert_eq!(NonnegMatrix::identity(3).permanent().unwrap(), 1.0);
        let j3 = NonnegMatrix::constant(3, 1.0 / 3.0);
        assert_relative_eq!(j3.permanent().unwrap(), 6.0 / 27.0, max_relative = 1e-12);
        let d = NonnegMatrix::special_d(3, 2).unwrap();
        assert_relative_eq!(d.permanent().unwrap(), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn ryser_matches_naive_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(1..=8usize);
            let a =
                NonnegMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect())
                    .unwrap();
            let r = a.permanent().unwrap();
            let o = a.permanent_naive().unwrap();
            assert_relative_eq!(r, o, max_relative = 1e-9);
        }
    }

    #[test]
    fn permanent_is_monotone_under_entry_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..30 {
            let n = rng.random_range(2..=6usize);
            let base: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let bumped: Vec<f64> = base
                .iter()
                .map(|&v| v + rng.random_range(0.0..0.5))
                .collect();
            let pa = NonnegMatrix::new(n, base).unwrap().permanent().unwrap();
            let pb = NonnegMatrix::new(n, bumped).unwrap().permanent().unwrap();
            assert!(pa >= 0.0);
            assert!(pb >= pa - 1e-12 * (1.0 + pb.abs()));
        }
    }

    #[test]
    fn prod_polynomial_examples() {
        let p = NonnegMatrix::identity(2).prod_polynomial().unwrap();
        assert_eq!(p.coeff(&[1, 1]), 1.0);
        assert_eq!(p.num_terms(), 1);

        let p = NonnegMatrix::constant(2, 0.5).prod_polynomial().unwrap();
        assert_relative_eq!(p.coeff(&[2, 0]), 0.25, max_relative = 1e-14);
        assert_relative_eq!(p.coeff(&[1, 1]), 0.5, max_relative = 1e-14);
        assert_relative_eq!(p.coeff(&[0, 2]), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn prod_polynomial_of_special_d_matches_exact_expansion() {
        // n=3, k=2: rows (a,a,b),(a,a,b),(c,c,0) with a=1/4, b=1/2, c=1/2
        let d = NonnegMatrix::special_d(3, 2).unwrap();
        let p = d.prod_polynomial().unwrap();
        let exact = RatPoly::prod_polynomial(&[
            vec![rat(1, 4), rat(1, 4), rat(1, 2)],
            vec![rat(1, 4), rat(1, 4), rat(1, 2)],
            vec![rat(1, 2), rat(1, 2), rat(0, 1)],
        ]);
        for (exps, c) in p.terms() {
            assert_relative_eq!(c, exact.coeff_f64(&exps), max_relative = 1e-12);
        }
    }

    #[test]
    fn prod_polynomial_budget_guard() {
        let a = NonnegMatrix::constant(11, 0.1);
        assert!(matches!(a.prod_polynomial(), Err(Error::Budget(_))));
    }

    #[test]
    fn special_d_structure() {
        let d = NonnegMatrix::special_d(3, 2).unwrap();
        let expect = [0.25, 0.25, 0.5, 0.25, 0.25, 0.5, 0.5, 0.5, 0.0];
        for (a, b) in d.entries().iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        for n in 3..=6usize {
            for k in 2..n {
                let d = NonnegMatrix::special_d(n, k).unwrap();
                assert!(d.is_doubly_stochastic(1e-12));
                // per(D) = G(k) (n-1)!/(n-1)^(n-1), checked in exact arithmetic
                let a = rat((k as i64) - 1, (k as i64) * (n as i64 - 1));
                let b = rat(1, k as i64);
                let c = rat(1, n as i64 - 1);
                let mut rows = Vec::new();
                for i in 0..n {
                    let mut row = Vec::new();
                    for j in 0..n {
                        row.push(if i < k {
                            if j < n - 1 {
                                a.clone()
                            } else {
                                b.clone()
                            }
                        } else if j < n - 1 {
                            c.clone()
                        } else {
                            rat(0, 1)
                        });
                    }
                    rows.push(row);
                }
                let exact = permanent_exact(&rows);
                let formula = crate::constants::g_exact(k as u32)
                    * crate::constants::vdw_exact(n as u32 - 1);
                assert_eq!(exact, formula, "per(D) formula fails at n={n}, k={k}");
                assert_relative_eq!(
                    d.permanent().unwrap(),
                    exact.to_f64().unwrap(),
                    max_relative = 1e-12
                );
            }
        }
        assert!(NonnegMatrix::special_d(3, 1).is_err());
        assert!(NonnegMatrix::special_d(3, 3).is_err());
    }

    fn random_psd_tuple(rng: &mut ChaCha8Rng, n: usize) -> PsdTuple {
        let mats: Vec<DMatrix<f64>> = (0..n)
            .map(|_| {
                let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let m = &r * r.transpose();
                m / n as f64
            })
            .collect();
        PsdTuple::new(mats).unwrap()
    }

    #[test]
    fn det_polynomial_examples() {
        let t = PsdTuple::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let p = t.det_polynomial().unwrap();
        assert_eq!(p.coeff(&[1, 1]), 1.0);
        assert_eq!(p.num_terms(), 1);

        // (I/2, I/2): det((x1+x2)/2 I) = ((x1+x2)/2)^2
        let half = DMatrix::<f64>::identity(2, 2) * 0.5;
        let t = PsdTuple::new(vec![half.clone(), half]).unwrap();
        let p = t.det_polynomial().unwrap();
        assert_relative_eq!(p.coeff(&[2, 0]), 0.25, max_relative = 1e-12);
        assert_relative_eq!(p.coeff(&[1, 1]), 0.5, max_relative = 1e-12);
        assert_relative_eq!(p.coeff(&[0, 2]), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn det_polynomial_rank_identity() {
        // rank of a variable subset equals the rank of the matching matrix sum
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let n = rng.random_range(2..=4usize);
            let t = {
                // mix ranks: some rank-1 pieces, some full PSD
                let mats: Vec<DMatrix<f64>> = (0..n)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            let v = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
                            &v * v.transpose()
                        } else {
                            let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                            &r * r.transpose()
                        }
                    })
                    .collect();
                PsdTuple::new(mats).unwrap()
            };
            let p = t.det_polynomial().unwrap();
            for mask in 1u32..(1 << n) {
                let vars: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                let mut sum = DMatrix::<f64>::zeros(n, n);
                for &i in &vars {
                    sum += &t.matrices()[i];
                }
                let rank = sum.rank(1e-9);
                assert_eq!(
                    p.rank_of_subset(&vars).unwrap() as usize,
                    rank,
                    "rank identity fails on subset {vars:?}"
                );
            }
        }
    }

    #[test]
    fn det_polynomial_coefficients_stay_in_cancellation_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..30 {
            let n = rng.random_range(2..=4usize);
            let t = random_psd_tuple(&mut rng, n);
            let raw = t.det_polynomial_raw().unwrap();
            let scale = raw.values().fold(0.0f64, |a, &v| a.max(v.abs()));
            for (_, c) in raw {
                assert!(
                    c >= -1e-12 * (1.0 + scale),
                    "coefficient {c:.3e} too negative before clamp"
                );
            }
            assert!(t.det_polynomial().is_ok());
        }
    }

    #[test]
    fn non_psd_tuple_is_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let ok = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            PsdTuple::new(vec![bad, ok]),
            Err(Error::Validation(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(PsdTuple::new(vec![asym, DMatrix::<f64>::identity(2, 2)]).is_err());
    }

    #[test]
    fn mixed_discriminant_examples() {
        let t = PsdTuple::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        assert_relative_eq!(t.mixed_discriminant().unwrap(), 1.0, epsilon = 1e-12);

        let half = DMatrix::<f64>::identity(2, 2) * 0.5;
        let t = PsdTuple::new(vec![half.clone(), half]).unwrap();
        assert_relative_eq!(t.mixed_discriminant().unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mixed_discriminant_matches_symbolic_and_permanent() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..30 {
            let n = rng.random_range(2..=4usize);
            let t = random_psd_tuple(&mut rng, n);
            let ie = t.mixed_discriminant().unwrap();
            let sym = t.det_polynomial().unwrap().mixed_partial_at_zero().unwrap();
            assert_relative_eq!(ie, sym, max_relative = 1e-8, epsilon = 1e-12);
        }
        for _ in 0..20 {
            let n = rng.random_range(2..=5usize);
            let a =
                NonnegMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect())
                    .unwrap();
            let d = PsdTuple::diag_tuple(&a).mixed_discriminant().unwrap();
            let per = a.permanent().unwrap();
            assert_relative_eq!(d, per, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda_enumeration_examples() {
        // permutation matrices
        for n in 1..=4usize {
            let count = enumerate_lambda(1, n, LambdaBudget::default()).unwrap().count();
            let fact: usize = (1..=n).product();
            assert_eq!(count, fact);
        }
        // hand enumeration of the k=2, n=2 case
        let all: Vec<LambdaMatrix> =
            enumerate_lambda(2, 2, LambdaBudget::default()).unwrap().collect();
        assert_eq!(all.len(), 3);
        let sets: Vec<Vec<u32>> = all.iter().map(|m| m.entries.clone()).collect();
        assert!(sets.contains(&vec![2, 0, 0, 2]));
        assert!(sets.contains(&vec![0, 2, 2, 0]));
        assert!(sets.contains(&vec![1, 1, 1, 1]));
        // duplicate-free
        let mut dedup = sets.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), sets.len());
    }

    #[test]
    fn lambda_counts_match_dp_oracle() {
        for (k, n) in [(1u32, 4usize), (2, 3), (2, 4), (3, 3), (3, 4)] {
            let enumerated = enumerate_lambda(k, n, LambdaBudget::default()).unwrap().count() as u64;
            assert_eq!(enumerated, count_lambda_dp(k, n), "count mismatch at k={k}, n={n}");
        }
    }

    #[test]
    fn lambda_min_permanent_is_two_for_k2() {
        for n in 2..=5usize {
            let min = enumerate_lambda(2, n, LambdaBudget::default())
                .unwrap()
                .map(|m| m.permanent_exact())
                .min()
                .unwrap();
            assert_eq!(min, 2, "min permanent over 2-regular matrices at n={n}");
        }
    }

    #[test]
    fn lambda_budget_guard() {
        assert!(matches!(
            enumerate_lambda(5, 3, LambdaBudget::default()),
            Err(Error::Budget(_))
        ));
        assert!(matches!(
            enumerate_lambda(2, 6, LambdaBudget::default()),
            Err(Error::Budget(_))
        ));
        assert!(enumerate_lambda(2, 6, LambdaBudget { k_max: 4, n_max: 6 }).is_ok());
    }

    #[test]
    fn lambda_ryser_matches_exact_integer_permanent() {
        for m in enumerate_lambda(3, 4, LambdaBudget::default()).unwrap().take(200) {
            let exact = m.permanent_exact() as f64;
            let ryser = m.as_nonneg().permanent().unwrap();
            assert_relative_eq!(ryser, exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn sinkhorn_balances_positive_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..10 {
            let n = rng.random_range(2..=6usize);
            let a =
                NonnegMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.1..1.0)).collect())
                    .unwrap();
            let b = a.sinkhorn_balance(1e-12, 50_000).unwrap();
            assert!(b.is_doubly_stochastic(1e-11));
        }
        let zero_col = NonnegMatrix::new(2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(zero_col.sinkhorn_balance(1e-10, 100).is_err());
    }

    #[test]
    fn csv_round_trip_and_rejection() {
        let d = NonnegMatrix::special_d(4, 2).unwrap();
        let s = d.to_csv_string();
        let back = NonnegMatrix::from_csv_str(&s).unwrap();
        for (a, b) in d.entries().iter().zip(back.entries()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        assert!(NonnegMatrix::from_csv_str("1,2\n3").is_err());
        assert!(NonnegMatrix::from_csv_str("1,x\n3,4").is_err());
        assert!(NonnegMatrix::from_csv_str("1,-2\n3,4").is_err());
    }

    #[test]
    fn psd_tuple_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let t = random_psd_tuple(&mut rng, 3);
        let s = serde_json::to_string(&t).unwrap();
        let back: PsdTuple = serde_json::from_str(&s).unwrap();
        assert_relative_eq!(
            t.mixed_discriminant().unwrap(),
            back.mixed_discriminant().unwrap(),
            max_relative = 1e-12
        );
        assert!(serde_json::from_str::<PsdTuple>(r#"{"n":2,"matrices":[[[1,0],[0,1]]]}"#).is_err());
    }

    #[test]
    fn doubly_stochastic_tuple_detection() {
        // projector tuple from an orthonormal basis
        let q = DMatrix::from_row_slice(
            2,
            2,
            &[
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
                -std::f64::consts::FRAC_1_SQRT_2,
            ],
        );
        let mats: Vec<DMatrix<f64>> = (0..2)
            .map(|i| {
                let v = q.column(i).clone_owned();
                &v * v.transpose()
            })
            .collect();
        let t = PsdTuple::new(mats).unwrap();
        assert!(t.is_doubly_stochastic_tuple(1e-10));
        // unbalanced traces disqualify the tuple
        let t2 = PsdTuple::new(vec![
            DMatrix::<f64>::identity(2, 2) * 0.6,
            DMatrix::<f64>::identity(2, 2) * 0.4,
        ])
        .unwrap();
        assert!(!t2.is_doubly_stochastic_tuple(1e-10));
    }
}
