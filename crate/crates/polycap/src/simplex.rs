//! Exact linear feasibility for Newton-polytope membership.
//!
//! Given integer exponent vectors `r_1..r_s` and an integer target `t`,
//! classifies `t` against `conv{r_i}`:
//!
//! * `Outside`  — no convex combination reaches `t`;
//! * `Boundary` — reachable, but only with some weight forced to zero;
//! * `Interior` — reachable with all weights strictly positive (the relative
//!   interior of the hull of finitely many points).
//!
//! The classification maximizes the minimum weight: with `lambda_i = mu_i + eps`,
//! solve `max eps` subject to `sum lambda = 1`, `sum lambda_i r_i = t`,
//! `mu, eps >= 0` by a two-phase dense simplex with Bland's rule over
//! `BigRational`, so the verdict is exact.

use num::rational::BigRational;
use num::traits::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum HullLocation {
    Interior,
    Boundary,
    Outside,
}

struct Tableau {
    rows: Vec<Vec<BigRational>>, // constraint rows, last column = rhs
    obj: Vec<BigRational>,       // reduced-cost row, last column = -objective value
    basis: Vec<usize>,
    ncols: usize, // structural + artificial columns (rhs excluded)
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col].clone();
        for v in &mut self.rows[row] {
            *v /= &p;
        }
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let f = self.rows[r][col].clone();
            if f.is_zero() {
                continue;
            }
            for c in 0..=self.ncols {
                let delta = &self.rows[row][c] * &f;
                self.rows[r][c] -= delta;
            }
        }
        let f = self.obj[col].clone();
        if !f.is_zero() {
            for c in 0..=self.ncols {
                let delta = &self.rows[row][c] * &f;
                self.obj[c] -= delta;
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes the current objective row. Pivots by steepest reduced cost
    /// (Dantzig) and falls back to Bland's rule after a run of degenerate
    /// pivots so cycling is impossible; `allowed` restricts the entering
    /// columns and `stop` allows an early exit once the caller has the sign
    /// information it needs.
    fn run<F: Fn(usize) -> bool, S: Fn(&Tableau) -> bool>(&mut self, allowed: F, stop: S) {
        let mut degenerate_streak = 0usize;
        loop {
            if stop(self) {
                return;
            }
            let bland = degenerate_streak > 40;
            let mut entering: Option<usize> = None;
            for c in 0..self.ncols {
                if !allowed(c) || !self.obj[c].is_negative() {
                    continue;
                }
                match entering {
                    None => entering = Some(c),
                    Some(e) => {
                        if !bland && self.obj[c] < self.obj[e] {
                            entering = Some(c);
                        }
                    }
                }
                if bland {
                    break; // first eligible column
                }
            }
            let Some(col) = entering else { return };
            let mut best: Option<(BigRational, usize)> = None;
            for r in 0..self.rows.len() {
                if self.rows[r][col].is_positive() {
                    let ratio = &self.rows[r][self.ncols] / &self.rows[r][col];
                    let better = match &best {
                        None => true,
                        Some((b, br)) => {
                            ratio < *b || (ratio == *b && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            let Some((ratio, row)) = best else {
                // unbounded direction cannot occur here: eps is bounded by 1/s
                return;
            };
            if ratio.is_zero() {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(row, col);
        }
    }

    fn eps_value(&self, eps_col: usize) -> BigRational {
        self.basis
            .iter()
            .position(|&b| b == eps_col)
            .map(|r| self.rows[r][self.ncols].clone())
            .unwrap_or_else(BigRational::zero)
    }
}

pub(crate) fn locate_in_hull(points: &[Vec<u32>], target: &[u32]) -> HullLocation {
    if points.is_empty() {
        return HullLocation::Outside;
    }
    let dim = target.len();
    let s = points.len();
    let m = dim + 1; // constraint rows
    let structural = s + 1; // mu_1..mu_s, eps
    let ncols = structural + m; // plus artificials

    let big = |v: u32| BigRational::from_integer(v.into());

    // constraint matrix
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    {
        // sum mu + s * eps = 1
        let mut row = vec![BigRational::zero(); ncols + 1];
        for v in row.iter_mut().take(s) {
            *v = BigRational::one();
        }
        row[s] = BigRational::from_integer(s.into());
        row[ncols] = BigRational::one();
        rows.push(row);
    }
    for j in 0..dim {
        let mut row = vec![BigRational::zero(); ncols + 1];
        for (c, p) in points.iter().enumerate() {
            row[c] = big(p[j]);
        }
        row[s] = points.iter().map(|p| big(p[j])).sum();
        row[ncols] = big(target[j]);
        rows.push(row);
    }
    // artificial identity block
    for (i, row) in rows.iter_mut().enumerate() {
        row[structural + i] = BigRational::one();
    }

    // phase 1: minimize the artificial sum; reduced costs relative to the
    // artificial basis are the negated column sums
    let mut obj = vec![BigRational::zero(); ncols + 1];
    for (c, o) in obj.iter_mut().enumerate() {
        if c >= structural && c < ncols {
            continue; // artificial cost 1 cancels against its own basis entry
        }
        let col_sum: BigRational = rows.iter().map(|r| r[c].clone()).sum();
        *o = -col_sum;
    }

    let mut t = Tableau {
        rows,
        obj,
        basis: (structural..ncols).collect(),
        ncols,
    };
    t.run(|c| c < structural, |_| false);

    // -obj[ncols] is the attained artificial sum
    if !t.obj[t.ncols].is_zero() {
        return HullLocation::Outside;
    }

    // drive leftover artificials out of the basis (degenerate rows)
    let mut drop_rows: Vec<usize> = Vec::new();
    for r in 0..t.rows.len() {
        if t.basis[r] >= structural {
            match (0..structural).find(|&c| !t.rows[r][c].is_zero()) {
                Some(c) => t.pivot(r, c),
                None => drop_rows.push(r), // redundant constraint
            }
        }
    }
    for &r in drop_rows.iter().rev() {
        t.rows.remove(r);
        t.basis.remove(r);
    }

    // phase 2: maximize eps == minimize -eps; stop as soon as eps is basic
    // with positive value, since any feasible eps > 0 already certifies the
    // relative interior
    let mut obj = vec![BigRational::zero(); ncols + 1];
    obj[s] = -BigRational::one();
    for r in 0..t.rows.len() {
        if t.basis[r] == s {
            // make the objective row consistent with eps being basic
            let f = obj[s].clone();
            for (c, o) in obj.iter_mut().enumerate() {
                let delta = &t.rows[r][c] * &f;
                *o -= delta;
            }
        }
    }
    t.obj = obj;
    t.run(|c| c < structural, |t| t.eps_value(s).is_positive());

    if t.eps_value(s).is_positive() {
        HullLocation::Interior
    } else {
        HullLocation::Boundary
    }
}
