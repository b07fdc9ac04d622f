//! Shared deterministic generators for the integration suites.
#![allow(dead_code)] // each test target uses its own subset

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use polycap::matrix::{NonnegMatrix, PsdTuple};
use polycap::poly::HomPoly;
use polycap::univariate::UnivariatePoly;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random doubly stochastic matrix: positive entries balanced by Sinkhorn
/// iteration to 1e-12.
pub fn random_doubly_stochastic(rng: &mut ChaCha8Rng, n: usize) -> NonnegMatrix {
    let raw = NonnegMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.1..1.0)).collect())
        .expect("positive entries");
    raw.sinkhorn_balance(1e-12, 100_000).expect("positive matrices balance")
}

/// Exactly doubly stochastic matrix with at least one zero entry: a convex
/// combination of at most `n-1` distinct permutation matrices with weights
/// bounded away from zero. The sparse union of supports guarantees a zero.
pub fn random_birkhoff_with_zero(rng: &mut ChaCha8Rng, n: usize) -> NonnegMatrix {
    assert!(n >= 3);
    let count = rng.random_range(2..n);
    let mut perms: Vec<Vec<usize>> = Vec::new();
    while perms.len() < count {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, rng.random_range(0..=i));
        }
        if !perms.contains(&p) {
            perms.push(p);
        }
    }
    let mut weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut entries = vec![0.0; n * n];
    for (p, w) in perms.iter().zip(&weights) {
        for (i, &j) in p.iter().enumerate() {
            entries[i * n + j] += w;
        }
    }
    let a = NonnegMatrix::new(n, entries).expect("convex combination");
    assert!(a.entries().contains(&0.0), "union of supports too dense");
    a
}

/// Nonnegative matrix with independent zeros and no zero row.
pub fn random_sparse_no_zero_row(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> NonnegMatrix {
    loop {
        let entries: Vec<f64> = (0..n * n)
            .map(|_| {
                if rng.random_bool(zero_prob) {
                    0.0
                } else {
                    rng.random_range(0.05..1.5)
                }
            })
            .collect();
        let a = NonnegMatrix::new(n, entries).expect("nonnegative entries");
        if !a.has_zero_row() {
            return a;
        }
    }
}

/// Random PSD tuple with positive definite sum (H-stable determinantal
/// polynomial).
pub fn random_psd_tuple_pd_sum(rng: &mut ChaCha8Rng, n: usize) -> PsdTuple {
    let mats: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            &r * r.transpose() / n as f64 + DMatrix::<f64>::identity(n, n) * 0.02
        })
        .collect();
    PsdTuple::new(mats).expect("PSD by construction")
}

/// `(A/2) x1^2 + C x1 x2 + (B/2) x2^2`.
pub fn quadratic(a: f64, c: f64, b: f64) -> HomPoly {
    HomPoly::new(
        2,
        2,
        [
            (vec![2, 0], a / 2.0),
            (vec![1, 1], c),
            (vec![0, 2], b / 2.0),
        ],
    )
    .expect("valid quadratic")
}

/// `(x_1 + .. + x_n)^n`.
pub fn power_sum(n: usize) -> HomPoly {
    HomPoly::linear_form(&vec![1.0; n])
        .expect("linear form")
        .pow(n as u32)
        .expect("within degree cap")
}

/// Random Hurwitz polynomial of degree >= 2 (mix of real-negative roots and
/// conjugate pairs with real part at most -0.05).
pub fn random_hurwitz(rng: &mut ChaCha8Rng) -> UnivariatePoly {
    let re: f64 = rng.random_range(0.05..2.0);
    let im: f64 = rng.random_range(0.05..2.0);
    let mut q = UnivariatePoly::new(vec![re * re + im * im, 2.0 * re, 1.0]);
    for _ in 0..rng.random_range(0..=3usize) {
        if rng.random_bool(0.5) {
            let a: f64 = rng.random_range(0.05..3.0);
            q = q.mul(&UnivariatePoly::new(vec![a, 1.0]));
        } else {
            let re: f64 = rng.random_range(0.05..2.0);
            let im: f64 = rng.random_range(0.05..2.0);
            q = q.mul(&UnivariatePoly::new(vec![re * re + im * im, 2.0 * re, 1.0]));
        }
    }
    q
}

/// Monic real-rooted polynomial from negative roots, rescaled so the linear
/// coefficient is 1 (keeps the slack of the derivative bound at unit scale).
pub fn normalized_from_negative_roots(leading: f64, roots_abs: &[f64]) -> UnivariatePoly {
    let roots: Vec<f64> = roots_abs.iter().map(|&a| -a).collect();
    let q = UnivariatePoly::from_roots(leading, &roots);
    let a1 = q.coeffs()[1];
    UnivariatePoly::new(q.coeffs().iter().map(|c| c / a1).collect())
}
