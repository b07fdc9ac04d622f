//! Exact-rational sparse polynomial arithmetic.
//!
//! This is the oracle-grade mirror of [`crate::poly::HomPoly`]: same packed
//! exponent keys, but `BigRational` coefficients and no sign restriction, so
//! it can expand determinants and reproduce coefficients exactly at small
//! sizes. Production code paths never depend on it; tests compare against it.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Signed, ToPrimitive, Zero};

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

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct RatPoly {
    pub num_vars: usize,
    terms: BTreeMap<u64, BigRational>,
}

impl RatPoly {
    pub fn zero(num_vars: usize) -> Self {
        RatPoly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(num_vars: usize, exps: &[u32], coeff: BigRational) -> Self {
        let mut p = RatPoly::zero(num_vars);
        p.add_term(exps, coeff);
        p
    }

    pub fn add_term(&mut self, exps: &[u32], coeff: BigRational) {
        assert_eq!(exps.len(), self.num_vars);
        if coeff.is_zero() {
            return;
        }
        let key = pack(exps);
        let entry = self.terms.entry(key).or_insert_with(BigRational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn linear_form(coeffs: &[BigRational]) -> Self {
        let m = coeffs.len();
        let mut p = RatPoly::zero(m);
        for (i, c) in coeffs.iter().enumerate() {
            let mut e = vec![0u32; m];
            e[i] = 1;
            p.add_term(&e, c.clone());
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> BigRational {
        self.terms.get(&pack(exps)).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn coeff_f64(&self, exps: &[u32]) -> f64 {
        self.coeff(exps).to_f64().unwrap_or(f64::NAN)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Vec<u32>, &BigRational)> + '_ {
        self.terms.iter().map(|(&k, c)| (unpack(k, self.num_vars), c))
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.num_vars, other.num_vars);
        let mut out = RatPoly::zero(self.num_vars);
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                let exps: Vec<u32> = ea.iter().zip(&eb).map(|(a, b)| a + b).collect();
                out.add_term(&exps, ca.clone() * cb);
            }
        }
        out
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.num_vars, other.num_vars);
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(&e, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> RatPoly {
        let mut out = RatPoly::zero(self.num_vars);
        for (e, v) in self.terms() {
            out.add_term(&e, v.clone() * c);
        }
        out
    }

    pub fn derivative(&self, var: usize) -> RatPoly {
        let mut out = RatPoly::zero(self.num_vars);
        for (mut exps, c) in self.terms().map(|(e, c)| (e, c.clone())) {
            if exps[var] == 0 {
                continue;
            }
            let e = exps[var];
            exps[var] -= 1;
            out.add_term(&exps, c * BigRational::from(BigInt::from(e)));
        }
        out
    }

    /// Sets `var` to zero and removes it, reindexing densely.
    pub fn restrict_zero(&self, var: usize) -> RatPoly {
        let mut out = RatPoly::zero(self.num_vars - 1);
        for (exps, c) in self.terms() {
            if exps[var] != 0 {
                continue;
            }
            let mut e = exps.clone();
            e.remove(var);
            out.add_term(&e, c.clone());
        }
        out
    }

    /// Coefficient of `x_1 x_2 .. x_n` for a square polynomial.
    pub fn mixed_partial_at_zero(&self) -> BigRational {
        self.coeff(&vec![1u32; self.num_vars])
    }

    /// All coefficients nonnegative?
    pub fn is_nonnegative(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    /// Exact expansion of the product of row linear forms of a rational
    /// matrix.
    pub fn prod_polynomial(entries: &[Vec<BigRational>]) -> RatPoly {
        let n = entries.len();
        let mut acc = RatPoly::monomial(n, &vec![0; n], BigRational::from(BigInt::from(1)));
        for row in entries {
            assert_eq!(row.len(), n);
            acc = acc.mul(&RatPoly::linear_form(row));
        }
        acc
    }

    /// Product polynomial of the n x n matrix with every entry `num/den`.
    pub fn prod_of_constant_matrix(n: usize, (num, den): (i64, i64)) -> RatPoly {
        let entries = vec![vec![rat(num, den); n]; n];
        RatPoly::prod_polynomial(&entries)
    }
}

/// Exact permanent of a rational matrix by the permutation-sum definition.
pub fn permanent_exact(entries: &[Vec<BigRational>]) -> BigRational {
    let n = entries.len();
    let mut used = vec![false; n];
    fn go(
        entries: &[Vec<BigRational>],
        row: usize,
        used: &mut [bool],
    ) -> BigRational {
        let n = entries.len();
        if row == n {
            return BigRational::from(BigInt::from(1));
        }
        let mut acc = BigRational::zero();
        for j in 0..n {
            if used[j] || entries[row][j].is_zero() {
                continue;
            }
            used[j] = true;
            acc += entries[row][j].clone() * go(entries, row + 1, used);
            used[j] = false;
        }
        acc
    }
    go(entries, 0, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_of_constant_matrix() {
        // ((x1+x2)/2)^2 -> coefficients 1/4, 1/2, 1/4
        let p = RatPoly::prod_of_constant_matrix(2, (1, 2));
        assert_eq!(p.coeff(&[2, 0]), rat(1, 4));
        assert_eq!(p.coeff(&[1, 1]), rat(1, 2));
        assert_eq!(p.coeff(&[0, 2]), rat(1, 4));
    }

    #[test]
    fn derivative_and_restrict() {
        let p = RatPoly::prod_of_constant_matrix(3, (1, 3));
        let q2 = p.derivative(2).restrict_zero(2);
        // q2 = d/dx3 ((x1+x2+x3)/3)^3 at x3=0 = (x1+x2)^2 / 9
        assert_eq!(q2.coeff(&[2, 0]), rat(1, 9));
        assert_eq!(q2.coeff(&[1, 1]), rat(2, 9));
        assert_eq!(q2.coeff(&[0, 2]), rat(1, 9));
    }

    #[test]
    fn permanent_matches_hand_values() {
        let j3 = vec![vec![rat(1, 3); 3]; 3];
        assert_eq!(permanent_exact(&j3), rat(6, 27));
        let id = vec![
            vec![rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(1, 1)],
        ];
        assert_eq!(permanent_exact(&id), rat(1, 1));
    }

    #[test]
    fn signed_cancellation_is_exact() {
        // (x1 - x2)(x1 + x2) = x1^2 - x2^2
        let a = RatPoly::linear_form(&[rat(1, 1), rat(-1, 1)]);
        let b = RatPoly::linear_form(&[rat(1, 1), rat(1, 1)]);
        let p = a.mul(&b);
        assert_eq!(p.coeff(&[1, 1]), rat(0, 1));
        assert_eq!(p.coeff(&[2, 0]), rat(1, 1));
        assert_eq!(p.coeff(&[0, 2]), rat(-1, 1));
        assert!(!p.is_nonnegative());
    }
}
