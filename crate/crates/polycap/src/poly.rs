//! Sparse homogeneous multivariate polynomials with nonnegative coefficients.
//!
//! A [`HomPoly`] stores a polynomial of degree `n` in `m` variables as a map
//! from exponent vectors to positive coefficients. Exponent vectors are packed
//! into a `u64` key, four bits per variable, so `m <= 16` and `n <= 15`; the
//! packing makes the map ordering equal to lexicographic ordering on exponent
//! vectors, which keeps every serialization deterministic.
//!
//! All operations are pure; a constructed polynomial is immutable.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum number of variables supported by the packed representation.
pub const MAX_VARS: usize = 16;
/// Maximum total degree supported by the packed representation.
pub const MAX_DEGREE: u32 = 15;

/// Subset-scan cap for the support characterization check.
pub const SUPPORT_CHECK_MAX_VARS: usize = 12;

fn pack(exps: &[u32]) -> u64 {
    let mut key = 0u64;
    for (i, &e) in exps.iter().enumerate() {
        key |= (e as u64) << (4 * (15 - i));
    }
    key
}

fn unpack(key: u64, num_vars: usize) -> Vec<u32> {
    (0..num_vars)
        .map(|i| ((key >> (4 * (15 - i))) & 0xf) as u32)
        .collect()
}

fn nibble(key: u64, var: usize) -> u32 {
    ((key >> (4 * (15 - var))) & 0xf) as u32
}

/// A single monomial: exponent vector plus coefficient. This is the wire form
/// used by the JSON polynomial format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exps: Vec<u32>,
    pub coeff: f64,
}

/// Homogeneous polynomial in `num_vars` variables of total degree `degree`
/// with nonnegative coefficients. Zero-coefficient monomials are never stored;
/// the empty map is the zero polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct HomPoly {
    num_vars: usize,
    degree: u32,
    terms: BTreeMap<u64, f64>,
}

impl HomPoly {
    /// Builds a polynomial from monomials, validating homogeneity and
    /// nonnegativity. Duplicate exponent vectors are accumulated.
    pub fn new<I>(num_vars: usize, degree: u32, monomials: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        if num_vars == 0 || num_vars > MAX_VARS {
            return Err(Error::Argument(format!(
                "num_vars must be in 1..={MAX_VARS}, got {num_vars}"
            )));
        }
        if degree > MAX_DEGREE {
            return Err(Error::Budget(format!(
                "degree {degree} exceeds the packed-representation cap {MAX_DEGREE}"
            )));
        }
        let mut terms = BTreeMap::new();
        for (exps, coeff) in monomials {
            if exps.len() != num_vars {
                return Err(Error::Dimension(format!(
                    "exponent vector has length {}, expected {num_vars}",
                    exps.len()
                )));
            }
            if !coeff.is_finite() {
                return Err(Error::Validation("non-finite coefficient".into()));
            }
            if coeff < 0.0 {
                return Err(Error::Validation(format!(
                    "negative coefficient {coeff} (only Hom_+ is representable)"
                )));
            }
            let total: u32 = exps.iter().sum();
            if total != degree {
                return Err(Error::Validation(format!(
                    "inhomogeneous input: monomial {exps:?} has total degree {total}, expected {degree}"
                )));
            }
            if coeff == 0.0 {
                continue;
            }
            *terms.entry(pack(&exps)).or_insert(0.0) += coeff;
        }
        Ok(HomPoly {
            num_vars,
            degree,
            terms,
        })
    }

    /// The zero polynomial of the given shape.
    pub fn zero(num_vars: usize, degree: u32) -> Result<Self> {
        Self::new(num_vars, degree, std::iter::empty())
    }

    /// Single-monomial polynomial.
    pub fn monomial(num_vars: usize, exps: &[u32], coeff: f64) -> Result<Self> {
        Self::new(num_vars, exps.iter().sum(), [(exps.to_vec(), coeff)])
    }

    /// The linear form `sum_i coeffs[i] * x_i`.
    pub fn linear_form(coeffs: &[f64]) -> Result<Self> {
        let m = coeffs.len();
        Self::new(
            m,
            1,
            coeffs.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(i, &c)| {
                let mut e = vec![0u32; m];
                e[i] = 1;
                (e, c)
            }),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the given exponent vector (0 when absent).
    pub fn coeff(&self, exps: &[u32]) -> f64 {
        if exps.len() != self.num_vars {
            return 0.0;
        }
        self.terms.get(&pack(exps)).copied().unwrap_or(0.0)
    }

    /// Iterates terms as `(exponent vector, coefficient)` in lexicographic
    /// exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<u32>, f64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (unpack(k, self.num_vars), c))
    }

    /// Sum of all coefficients, i.e. the value at the all-ones point.
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.values().sum()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_vars {
            return Err(Error::Dimension(format!(
                "expected a vector of length {}, got {len}",
                self.num_vars
            )));
        }
        Ok(())
    }

    /// Evaluates at a real point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let mut acc = 0.0;
        for (&key, &c) in &self.terms {
            let mut t = c;
            for (i, &xi) in x.iter().enumerate() {
                let e = nibble(key, i);
                if e > 0 {
                    t *= xi.powi(e as i32);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Evaluates at a complex point.
    pub fn evaluate_complex(&self, z: &[Complex64]) -> Result<Complex64> {
        self.check_len(z.len())?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&key, &c) in &self.terms {
            let mut t = Complex64::new(c, 0.0);
            for (i, &zi) in z.iter().enumerate() {
                let e = nibble(key, i);
                if e > 0 {
                    t *= zi.powi(e as i32);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Exact symbolic partial derivative with respect to variable `var`
    /// (0-based). The result is homogeneous of degree `degree - 1`.
    pub fn partial_derivative(&self, var: usize) -> Result<HomPoly> {
        if var >= self.num_vars {
            return Err(Error::Argument(format!(
                "variable index {var} out of range for {} variables",
                self.num_vars
            )));
        }
        if self.degree == 0 {
            return Err(Error::Argument(
                "cannot differentiate a degree-0 polynomial".into(),
            ));
        }
        let shift = 4 * (15 - var);
        let mut terms = BTreeMap::new();
        for (&key, &c) in &self.terms {
            let e = nibble(key, var);
            if e > 0 {
                terms.insert(key - (1u64 << shift), c * e as f64);
            }
        }
        Ok(HomPoly {
            num_vars: self.num_vars,
            degree: self.degree - 1,
            terms,
        })
    }

    /// Sets variable `var` to zero and removes it, reindexing the remaining
    /// variables densely (variables above `var` shift down by one).
    pub fn restrict_zero(&self, var: usize) -> Result<HomPoly> {
        if var >= self.num_vars {
            return Err(Error::Argument(format!(
                "variable index {var} out of range for {} variables",
                self.num_vars
            )));
        }
        if self.num_vars == 1 {
            return Err(Error::Argument(
                "cannot remove the last remaining variable".into(),
            ));
        }
        let mut terms = BTreeMap::new();
        for (&key, &c) in &self.terms {
            if nibble(key, var) != 0 {
                continue;
            }
            let mut exps = unpack(key, self.num_vars);
            exps.remove(var);
            terms.insert(pack(&exps), c);
        }
        Ok(HomPoly {
            num_vars: self.num_vars - 1,
            degree: self.degree,
            terms,
        })
    }

    /// The mixed partial `d^n/dx_1..dx_n` at the origin for square
    /// polynomials (`num_vars == degree`); equals the coefficient of
    /// `x_1 x_2 .. x_n`.
    pub fn mixed_partial_at_zero(&self) -> Result<f64> {
        if self.num_vars as u32 != self.degree {
            return Err(Error::Argument(format!(
                "mixed partial needs a square polynomial, got {} variables of degree {}",
                self.num_vars, self.degree
            )));
        }
        Ok(self.coeff(&vec![1u32; self.num_vars]))
    }

    /// Maximum exponent of `var` over the support.
    pub fn max_degree(&self, var: usize) -> Result<u32> {
        if var >= self.num_vars {
            return Err(Error::Argument(format!(
                "variable index {var} out of range for {} variables",
                self.num_vars
            )));
        }
        Ok(self
            .terms
            .keys()
            .map(|&k| nibble(k, var))
            .max()
            .unwrap_or(0))
    }

    /// Maximal joint degree over the support for a subset of variables.
    pub fn rank_of_subset(&self, subset: &[usize]) -> Result<u32> {
        for &v in subset {
            if v >= self.num_vars {
                return Err(Error::Argument(format!(
                    "variable index {v} out of range for {} variables",
                    self.num_vars
                )));
            }
        }
        Ok(self
            .terms
            .keys()
            .map(|&k| subset.iter().map(|&v| nibble(k, v)).sum::<u32>())
            .max()
            .unwrap_or(0))
    }

    /// Whether the given exponent vector carries a positive coefficient.
    pub fn support_contains(&self, exps: &[u32]) -> Result<bool> {
        self.check_len(exps.len())?;
        let total: u32 = exps.iter().sum();
        if total != self.degree {
            return Err(Error::Argument(format!(
                "exponent vector of total degree {total} queried on a degree-{} polynomial",
                self.degree
            )));
        }
        Ok(self.terms.contains_key(&pack(exps)))
    }

    /// Verifies the rank characterization of the support: an exponent vector
    /// `r` with `sum r = degree` carries a positive coefficient iff
    /// `sum_{j in S} r_j <= rank(S)` for every subset `S`. True for H-stable
    /// polynomials; the scan is capped at [`SUPPORT_CHECK_MAX_VARS`]
    /// variables.
    pub fn check_support_characterization(&self) -> Result<bool> {
        let m = self.num_vars;
        if m > SUPPORT_CHECK_MAX_VARS {
            return Err(Error::Budget(format!(
                "support characterization scans 2^m subsets; m={m} exceeds {SUPPORT_CHECK_MAX_VARS}"
            )));
        }
        let masks = 1usize << m;
        let mut rank = vec![0u32; masks];
        for &key in self.terms.keys() {
            let exps = unpack(key, m);
            for (mask, r) in rank.iter_mut().enumerate() {
                let s: u32 = (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| exps[i]).sum();
                if s > *r {
                    *r = s;
                }
            }
        }
        // every candidate exponent vector of the right total degree
        let mut exps = vec![0u32; m];
        let mut ok = true;
        self.scan_candidates(&mut exps, 0, self.degree, &rank, &mut ok);
        Ok(ok)
    }

    fn scan_candidates(
        &self,
        exps: &mut Vec<u32>,
        var: usize,
        remaining: u32,
        rank: &[u32],
        ok: &mut bool,
    ) {
        if !*ok {
            return;
        }
        if var == self.num_vars - 1 {
            exps[var] = remaining;
            let member = self.terms.contains_key(&pack(exps));
            let admissible = (0..rank.len()).all(|mask| {
                let s: u32 = (0..self.num_vars)
                    .filter(|&i| mask >> i & 1 == 1)
                    .map(|i| exps[i])
                    .sum();
                s <= rank[mask]
            });
            if member != admissible {
                *ok = false;
            }
            exps[var] = 0;
            return;
        }
        for e in 0..=remaining.min(MAX_DEGREE) {
            exps[var] = e;
            self.scan_candidates(exps, var + 1, remaining - e, rank, ok);
            if !*ok {
                break;
            }
        }
        exps[var] = 0;
    }

    /// `sum_r a_r r_var`, i.e. the partial derivative with respect to `var`
    /// evaluated at the all-ones point.
    pub fn partial_at_ones(&self, var: usize) -> f64 {
        self.terms
            .iter()
            .map(|(&k, &c)| c * nibble(k, var) as f64)
            .sum()
    }

    /// Doubly-stochastic test for square polynomials: every partial
    /// derivative at the all-ones point equals 1 within `tol`, and the
    /// coefficient sum equals 1 within `tol`. Non-square polynomials are
    /// never doubly stochastic.
    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        if self.num_vars as u32 != self.degree {
            return false;
        }
        if (self.coefficient_sum() - 1.0).abs() > tol {
            return false;
        }
        (0..self.num_vars).all(|i| (self.partial_at_ones(i) - 1.0).abs() <= tol)
    }

    /// Product of two polynomials over the same variables.
    pub fn mul(&self, other: &HomPoly) -> Result<HomPoly> {
        if self.num_vars != other.num_vars {
            return Err(Error::Dimension(
                "polynomial product needs matching variable counts".into(),
            ));
        }
        let degree = self.degree + other.degree;
        if degree > MAX_DEGREE {
            return Err(Error::Budget(format!(
                "product degree {degree} exceeds the packed-representation cap {MAX_DEGREE}"
            )));
        }
        let mut terms = BTreeMap::new();
        for (&ka, &ca) in &self.terms {
            for (&kb, &cb) in &other.terms {
                // nibbles cannot carry: the totals already fit in one nibble
                *terms.entry(ka + kb).or_insert(0.0) += ca * cb;
            }
        }
        Ok(HomPoly {
            num_vars: self.num_vars,
            degree,
            terms,
        })
    }

    /// `k`-th power.
    pub fn pow(&self, k: u32) -> Result<HomPoly> {
        if k == 0 {
            return HomPoly::monomial(self.num_vars, &vec![0; self.num_vars], 1.0);
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Sum of two polynomials of identical shape.
    pub fn add(&self, other: &HomPoly) -> Result<HomPoly> {
        if self.num_vars != other.num_vars || self.degree != other.degree {
            return Err(Error::Dimension(
                "polynomial sum needs matching shapes".into(),
            ));
        }
        let mut terms = self.terms.clone();
        for (&k, &c) in &other.terms {
            *terms.entry(k).or_insert(0.0) += c;
        }
        Ok(HomPoly {
            num_vars: self.num_vars,
            degree: self.degree,
            terms,
        })
    }

    /// Multiplies all coefficients by `c >= 0`.
    pub fn scale(&self, c: f64) -> Result<HomPoly> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Validation(format!(
                "scale factor must be finite and nonnegative, got {c}"
            )));
        }
        if c == 0.0 {
            return HomPoly::zero(self.num_vars, self.degree);
        }
        Ok(HomPoly {
            num_vars: self.num_vars,
            degree: self.degree,
            terms: self.terms.iter().map(|(&k, &v)| (k, v * c)).collect(),
        })
    }

    /// The substituted polynomial `p(c_1 x_1, .., c_m x_m)` for positive `c`.
    pub fn scale_vars(&self, c: &[f64]) -> Result<HomPoly> {
        self.check_len(c.len())?;
        if c.iter().any(|&ci| !ci.is_finite() || ci <= 0.0) {
            return Err(Error::Argument(
                "variable scaling requires strictly positive factors".into(),
            ));
        }
        let mut terms = BTreeMap::new();
        for (&key, &coeff) in &self.terms {
            let mut v = coeff;
            for (i, &ci) in c.iter().enumerate() {
                let e = nibble(key, i);
                if e > 0 {
                    v *= ci.powi(e as i32);
                }
            }
            terms.insert(key, v);
        }
        Ok(HomPoly {
            num_vars: self.num_vars,
            degree: self.degree,
            terms,
        })
    }

    /// Relabels variables: the result `q` satisfies
    /// `q(x_0,..,x_{m-1}) = p(y)` with `y[order[i]] = x_i`; that is, position
    /// `i` of the result reads the exponent that `p` held at `order[i]`.
    /// `order` must be a permutation of `0..m`.
    pub fn permute_vars(&self, order: &[usize]) -> Result<HomPoly> {
        self.check_len(order.len())?;
        let mut seen = vec![false; self.num_vars];
        for &v in order {
            if v >= self.num_vars || seen[v] {
                return Err(Error::Argument("order must be a permutation".into()));
            }
            seen[v] = true;
        }
        let mut terms = BTreeMap::new();
        for (&key, &c) in &self.terms {
            let exps = unpack(key, self.num_vars);
            let new_exps: Vec<u32> = order.iter().map(|&v| exps[v]).collect();
            terms.insert(pack(&new_exps), c);
        }
        Ok(HomPoly {
            num_vars: self.num_vars,
            degree: self.degree,
            terms,
        })
    }

    /// Exponent vectors of the support, lexicographically ordered.
    pub fn support(&self) -> Vec<Vec<u32>> {
        self.terms.keys().map(|&k| unpack(k, self.num_vars)).collect()
    }
}

impl Serialize for HomPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            num_vars: usize,
            degree: u32,
            monomials: Vec<&'a MonomialRef>,
        }
        // serialize via owned monomials in deterministic key order
        #[derive(Serialize)]
        struct MonomialRef {
            exps: Vec<u32>,
            coeff: f64,
        }
        let monomials: Vec<MonomialRef> = self
            .terms()
            .map(|(exps, coeff)| MonomialRef { exps, coeff })
            .collect();
        let raw = Raw {
            num_vars: self.num_vars,
            degree: self.degree,
            monomials: monomials.iter().collect(),
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HomPoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num_vars: usize,
            degree: u32,
            monomials: Vec<Monomial>,
        }
        let raw = Raw::deserialize(deserializer)?;
        HomPoly::new(
            raw.num_vars,
            raw.degree,
            raw.monomials.into_iter().map(|m| (m.exps, m.coeff)),
        )
        .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::NonnegMatrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn xy() -> HomPoly {
        // x1 * x2
        HomPoly::monomial(2, &[1, 1], 1.0).unwrap()
    }

    fn square_sum() -> HomPoly {
        // (x1 + x2)^2
        HomPoly::new(2, 2, [(vec![2, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(xy().evaluate(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(square_sum().evaluate(&[1.0, 2.0]).unwrap(), 9.0);
        // product form for the constant 1/3 matrix: each row sums to 1
        let p = NonnegMatrix::constant(3, 1.0 / 3.0).prod_polynomial().unwrap();
        assert_relative_eq!(p.evaluate(&[1.0, 1.0, 1.0]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_complex_examples() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(xy().evaluate_complex(&[i, i]).unwrap(), Complex64::new(-1.0, 0.0));
        // x1^2 + x2^2 vanishes at (1, i): the standard non-stable witness
        let p = HomPoly::new(2, 2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap();
        let v = p.evaluate_complex(&[one, i]).unwrap();
        assert!(v.norm() < 1e-15);
        let w = square_sum().evaluate_complex(&[one, one]).unwrap();
        assert_eq!(w, Complex64::new(4.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(xy().evaluate(&[1.0]).is_err());
        assert!(xy().evaluate_complex(&[Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let d = xy().partial_derivative(1).unwrap();
        assert_eq!(d.coeff(&[1, 0]), 1.0);
        assert_eq!(d.num_terms(), 1);
        assert_eq!(d.degree(), 1);

        let d = square_sum().partial_derivative(0).unwrap();
        assert_eq!(d.coeff(&[1, 0]), 2.0);
        assert_eq!(d.coeff(&[0, 1]), 2.0);
    }

    #[test]
    fn derivative_then_restrict_matches_exact_expansion() {
        // d/dx3 of the constant-1/3 3x3 product polynomial, then x3 = 0,
        // cross-checked against the exact rational route
        let a = NonnegMatrix::constant(3, 1.0 / 3.0);
        let q2 = a
            .prod_polynomial()
            .unwrap()
            .partial_derivative(2)
            .unwrap()
            .restrict_zero(2)
            .unwrap();
        let exact = crate::ratpoly::RatPoly::prod_of_constant_matrix(3, (1, 3))
            .derivative(2)
            .restrict_zero(2);
        for (exps, c) in q2.terms() {
            let e = exact.coeff_f64(&exps);
            assert_relative_eq!(c, e, max_relative = 1e-12);
        }
        assert_eq!(q2.num_terms(), 3);
    }

    #[test]
    fn restrict_examples() {
        let p = HomPoly::new(2, 2, [(vec![2, 0], 1.0), (vec![1, 1], 1.0)]).unwrap();
        let r = p.restrict_zero(1).unwrap();
        assert_eq!(r.num_vars(), 1);
        assert_eq!(r.coeff(&[2]), 1.0);
        assert_eq!(r.num_terms(), 1);

        // (x1+x2+x3)^3 restricted at x3 = 0 equals (x1+x2)^3
        let p = HomPoly::linear_form(&[1.0, 1.0, 1.0]).unwrap().pow(3).unwrap();
        let r = p.restrict_zero(2).unwrap();
        let expect = HomPoly::linear_form(&[1.0, 1.0]).unwrap().pow(3).unwrap();
        assert_eq!(r, expect);
    }

    #[test]
    fn mixed_partial_examples() {
        assert_eq!(xy().mixed_partial_at_zero().unwrap(), 1.0);
        assert_eq!(square_sum().mixed_partial_at_zero().unwrap(), 2.0);
        let p = NonnegMatrix::constant(3, 1.0 / 3.0).prod_polynomial().unwrap();
        assert_relative_eq!(p.mixed_partial_at_zero().unwrap(), 6.0 / 27.0, epsilon = 1e-12);
        // non-square rejected
        let q = HomPoly::monomial(3, &[1, 1, 0], 1.0).unwrap();
        assert!(q.mixed_partial_at_zero().is_err());
    }

    #[test]
    fn max_degree_examples() {
        let p = HomPoly::new(2, 2, [(vec![2, 0], 1.0), (vec![1, 1], 1.0)]).unwrap();
        assert_eq!(p.max_degree(0).unwrap(), 2);
        let p = HomPoly::linear_form(&[1.0, 1.0, 1.0]).unwrap().pow(3).unwrap();
        assert_eq!(p.max_degree(1).unwrap(), 3);
    }

    #[test]
    fn max_degree_of_product_counts_column_nonzeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..=5);
            let entries: Vec<f64> = (0..n * n)
                .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(0.1..2.0) })
                .collect();
            let a = match NonnegMatrix::new(n, entries) {
                Ok(a) => a,
                Err(_) => continue,
            };
            if (0..n).any(|i| (0..n).all(|j| a.get(i, j) == 0.0)) {
                continue; // zero row makes the product identically zero
            }
            let p = a.prod_polynomial().unwrap();
            for j in 0..n {
                let nonzeros = (0..n).filter(|&i| a.get(i, j) != 0.0).count() as u32;
                assert_eq!(p.max_degree(j).unwrap(), nonzeros);
            }
        }
    }

    #[test]
    fn rank_of_subset_examples() {
        let p = HomPoly::new(2, 2, [(vec![1, 1], 1.0), (vec![0, 2], 1.0)]).unwrap();
        assert_eq!(p.rank_of_subset(&[0, 1]).unwrap(), 2);

        // product over the identity pattern: x1 x2 x3
        let p = NonnegMatrix::identity(3).prod_polynomial().unwrap();
        assert_eq!(p.rank_of_subset(&[0, 1]).unwrap(), 2);

        // dense product polynomial reaches the full degree on any pair
        let p = NonnegMatrix::constant(3, 1.0 / 3.0).prod_polynomial().unwrap();
        assert_eq!(p.rank_of_subset(&[0, 1]).unwrap(), 3);
    }

    #[test]
    fn rank_of_subset_is_submodular_on_stable_instances() {
        // exhaustive subset pairs on a small corpus of H-stable polynomials
        let mut polys = vec![
            NonnegMatrix::constant(4, 0.25).prod_polynomial().unwrap(),
            NonnegMatrix::identity(5).prod_polynomial().unwrap(),
            HomPoly::linear_form(&[0.3, 1.0, 2.0, 0.5]).unwrap().pow(4).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [4usize, 5] {
            let entries: Vec<f64> = (0..n * n)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.1..2.0) })
                .collect();
            let a = NonnegMatrix::new(n, entries).unwrap();
            if (0..n).any(|i| (0..n).all(|j| a.get(i, j) == 0.0)) {
                continue;
            }
            polys.push(a.prod_polynomial().unwrap());
        }
        for p in &polys {
            let m = p.num_vars();
            let subset = |mask: usize| -> Vec<usize> {
                (0..m).filter(|&i| mask >> i & 1 == 1).collect()
            };
            let rank: Vec<u32> = (0..1usize << m)
                .map(|mask| p.rank_of_subset(&subset(mask)).unwrap())
                .collect();
            for s in 0..1usize << m {
                for t in 0..1usize << m {
                    let union = s | t;
                    let inter = s & t;
                    assert!(
                        rank[union] + rank[inter] <= rank[s] + rank[t],
                        "submodularity violated on masks {s:b}, {t:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn support_examples() {
        assert!(square_sum().support_contains(&[1, 1]).unwrap());
        let p = HomPoly::monomial(2, &[2, 0], 1.0).unwrap();
        assert!(!p.support_contains(&[0, 2]).unwrap());
        assert!(p.support_contains(&[1, 0]).is_err()); // degree mismatch
    }

    #[test]
    fn multilinear_membership_matches_pattern_permanent() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let n = rng.random_range(2..=5);
            let entries: Vec<f64> = (0..n * n)
                .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.1..2.0) })
                .collect();
            let a = NonnegMatrix::new(n, entries).unwrap();
            if (0..n).any(|i| (0..n).all(|j| a.get(i, j) == 0.0)) {
                continue;
            }
            let p = a.prod_polynomial().unwrap();
            let pattern = NonnegMatrix::new(
                n,
                (0..n * n)
                    .map(|idx| if a.entries()[idx] > 0.0 { 1.0 } else { 0.0 })
                    .collect(),
            )
            .unwrap();
            let member = p.support_contains(&vec![1; n]).unwrap();
            let per = pattern.permanent_naive().unwrap();
            assert_eq!(member, per > 0.0);
        }
    }

    #[test]
    fn support_characterization_on_stable_instances() {
        let polys = [
            NonnegMatrix::constant(3, 1.0 / 3.0).prod_polynomial().unwrap(),
            NonnegMatrix::identity(4).prod_polynomial().unwrap(),
            HomPoly::linear_form(&[1.0, 2.0, 0.5]).unwrap().pow(3).unwrap(),
            NonnegMatrix::special_d(4, 2).unwrap().prod_polynomial().unwrap(),
        ];
        for p in &polys {
            assert!(p.check_support_characterization().unwrap());
        }
        let big = HomPoly::monomial(13, &[1; 13], 1.0).unwrap();
        assert!(matches!(
            big.check_support_characterization(),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn doubly_stochastic_examples() {
        let p = NonnegMatrix::constant(4, 0.25).prod_polynomial().unwrap();
        assert!(p.is_doubly_stochastic(1e-9));
        let q = square_sum().scale(0.25).unwrap();
        assert!(q.is_doubly_stochastic(1e-12));
        let two = HomPoly::monomial(3, &[1, 1, 1], 2.0).unwrap();
        assert!(!two.is_doubly_stochastic(1e-9));
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let p = square_sum();
        let s = serde_json::to_string(&p).unwrap();
        let q: HomPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);

        let inhomogeneous = r#"{"num_vars":2,"degree":2,"monomials":[{"exps":[1,0],"coeff":1.0}]}"#;
        assert!(serde_json::from_str::<HomPoly>(inhomogeneous).is_err());
        let negative = r#"{"num_vars":2,"degree":2,"monomials":[{"exps":[1,1],"coeff":-1.0}]}"#;
        assert!(serde_json::from_str::<HomPoly>(negative).is_err());
        let bad_len = r#"{"num_vars":2,"degree":2,"monomials":[{"exps":[1,1,0],"coeff":1.0}]}"#;
        assert!(serde_json::from_str::<HomPoly>(bad_len).is_err());
    }

    #[test]
    fn serialized_monomials_are_lexicographically_ordered() {
        let p = HomPoly::new(
            2,
            2,
            [(vec![0, 2], 3.0), (vec![2, 0], 1.0), (vec![1, 1], 2.0)],
        )
        .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let i1 = s.find("[0,2]").unwrap();
        let i2 = s.find("[1,1]").unwrap();
        let i3 = s.find("[2,0]").unwrap();
        assert!(i1 < i2 && i2 < i3);
    }

    fn random_poly(rng: &mut ChaCha8Rng) -> HomPoly {
        let m = rng.random_range(2..=5usize);
        let n = rng.random_range(1..=5u32);
        let mut monos = Vec::new();
        for _ in 0..rng.random_range(1..=8) {
            let mut exps = vec![0u32; m];
            let mut left = n;
            for e in exps.iter_mut().take(m - 1) {
                *e = rng.random_range(0..=left);
                left -= *e;
            }
            exps[m - 1] = left;
            monos.push((exps, rng.random_range(0.01..3.0)));
        }
        HomPoly::new(m, n, monos).unwrap()
    }

    #[test]
    fn euler_identity_holds() {
        // sum_i x_i dp/dx_i = n p at random positive points
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let p = random_poly(&mut rng);
            let m = p.num_vars();
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
            let lhs: f64 = (0..m)
                .map(|i| x[i] * p.partial_derivative(i).unwrap().evaluate(&x).unwrap())
                .sum();
            let rhs = p.degree() as f64 * p.evaluate(&x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_poly(&mut rng);
            let m = p.num_vars();
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
            let var = rng.random_range(0..m);
            let sym = p.partial_derivative(var).unwrap().evaluate(&x).unwrap();
            let h = 1e-5 * x[var];
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[var] += h;
            xm[var] -= h;
            let fd = (p.evaluate(&xp).unwrap() - p.evaluate(&xm).unwrap()) / (2.0 * h);
            assert_relative_eq!(sym, fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn mixed_partial_matches_permanent_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(2..=7usize);
            let a = NonnegMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect())
                .unwrap();
            let p = a.prod_polynomial().unwrap();
            let lhs = p.mixed_partial_at_zero().unwrap();
            let rhs = a.permanent().unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
        }
    }

    #[test]
    fn permute_vars_relabels_support() {
        let p = HomPoly::new(3, 2, [(vec![2, 0, 0], 1.0), (vec![0, 1, 1], 3.0)]).unwrap();
        let q = p.permute_vars(&[2, 0, 1]).unwrap();
        assert_eq!(q.coeff(&[0, 2, 0]), 1.0);
        assert_eq!(q.coeff(&[1, 0, 1]), 3.0);
        assert!(p.permute_vars(&[0, 0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn derivative_and_restrict_preserve_homogeneity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_poly(&mut rng);
            if p.degree() >= 1 {
                let var = rng.random_range(0..p.num_vars());
                let d = p.partial_derivative(var).unwrap();
                prop_assert_eq!(d.degree(), p.degree() - 1);
                for (exps, _) in d.terms() {
                    prop_assert_eq!(exps.iter().sum::<u32>(), d.degree());
                }
            }
            if p.num_vars() >= 2 {
                let var = rng.random_range(0..p.num_vars());
                let r = p.restrict_zero(var).unwrap();
                prop_assert_eq!(r.num_vars(), p.num_vars() - 1);
                for (exps, _) in r.terms() {
                    prop_assert_eq!(exps.iter().sum::<u32>(), p.degree());
                }
            }
        }

        #[test]
        fn evaluation_respects_homogeneity_scaling(seed in any::<u64>(), lambda in 0.2f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_poly(&mut rng);
            let m = p.num_vars();
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
            let lx: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let lhs = p.evaluate(&lx).unwrap();
            let rhs = lambda.powi(p.degree() as i32) * p.evaluate(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
