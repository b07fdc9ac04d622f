//! Named capacity lower bounds behind a common strategy trait.
//!
//! Every bound certifies `target >= lower_bound` where `target` is the
//! multilinear coefficient (the permanent, for product polynomials) and
//! `lower_bound` is the capacity times a product of `G` factors. The four
//! built-in strategies differ only in the factor schedule:
//!
//! * `vdw` — `G(2)..G(n)`, telescoping to `n!/n^n`; the Van der Waerden /
//!   Falikman regime, valid for any H-stable input;
//! * `schrijver_general` — `G(min(i, deg_p(i)))`, the degree-aware product
//!   that sharpens `vdw` on sparse inputs;
//! * `schrijver_sparse` — for matrix inputs whose columns beyond the `k`-th
//!   have at most `k` nonzeros: `vdw(k) * G(k)^(n-k)`;
//! * `improved_lambda` — for integer matrices with constant line sums `k`,
//!   where the capacity is exactly `k^n`: `k^n G(k)^(n-k) k!/k^k`.
//!
//! Strategies are registered by name in a [`BoundRegistry`] and selected at
//! runtime; external code can register its own implementations.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::capacity::{capacity_with, CapacityOptions};
use crate::constants;
use crate::error::{Error, Result};
use crate::matrix::{LambdaMatrix, NonnegMatrix};
use crate::poly::HomPoly;

/// Input to a bound strategy: the polynomial, plus the source matrix when the
/// polynomial is a product form (required by the matrix-shaped bounds).
#[derive(Clone, Copy)]
pub struct BoundInput<'a> {
    pub poly: &'a HomPoly,
    pub matrix: Option<&'a NonnegMatrix>,
}

/// A certified lower bound. `factors` lists `(level, G-value)` pairs; a
/// factor recorded as `0.0` marks a degenerate level (a variable missing
/// from the support), which forces the lower bound to zero.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCertificate {
    pub bound_name: String,
    pub target: f64,
    pub lower_bound: f64,
    pub capacity: f64,
    pub factors: Vec<(u32, f64)>,
    pub slack: f64,
    /// 1-based variable order the certificate was computed under.
    pub order: Vec<usize>,
}

impl BoundCertificate {
    /// Nonnegative slack up to `tol` relative to the target scale.
    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol * (1.0 + self.target.abs())
    }
}

fn assemble(
    name: &str,
    target: f64,
    capacity: f64,
    factors: Vec<(u32, f64)>,
    order: Vec<usize>,
) -> BoundCertificate {
    let product: f64 = factors.iter().map(|&(_, g)| g).product();
    let lower_bound = capacity * product;
    BoundCertificate {
        bound_name: name.to_string(),
        target,
        lower_bound,
        capacity,
        factors,
        slack: target - lower_bound,
        order,
    }
}

fn require_square_nonzero(p: &HomPoly) -> Result<usize> {
    let n = p.num_vars();
    if n as u32 != p.degree() {
        return Err(Error::Argument(format!(
            "bounds apply to square polynomials; got {} variables of degree {}",
            n,
            p.degree()
        )));
    }
    if p.is_zero() {
        return Err(Error::Argument("bound on the zero polynomial".into()));
    }
    Ok(n)
}

fn identity_order(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

/// A named lower-bound strategy.
pub trait BoundStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn certify(&self, input: &BoundInput, opts: &CapacityOptions) -> Result<BoundCertificate>;
}

/// `target >= n!/n^n * Cap(p)`.
pub struct VdwBound;

impl BoundStrategy for VdwBound {
    fn name(&self) -> &'static str {
        "vdw"
    }

    fn certify(&self, input: &BoundInput, opts: &CapacityOptions) -> Result<BoundCertificate> {
        let n = require_square_nonzero(input.poly)?;
        let target = input.poly.mixed_partial_at_zero()?;
        let cap = capacity_with(input.poly, opts)?.value;
        let factors: Vec<(u32, f64)> = (2..=n as u32).map(|i| (i, constants::g(i))).collect();
        Ok(assemble(self.name(), target, cap, factors, identity_order(n)))
    }
}

/// `target >= prod_i G(min(i, deg_p(i))) * Cap(p)`.
pub struct SchrijverGeneralBound;

impl BoundStrategy for SchrijverGeneralBound {
    fn name(&self) -> &'static str {
        "schrijver_general"
    }

    fn certify(&self, input: &BoundInput, opts: &CapacityOptions) -> Result<BoundCertificate> {
        let n = require_square_nonzero(input.poly)?;
        let target = input.poly.mixed_partial_at_zero()?;
        let cap = capacity_with(input.poly, opts)?.value;
        let mut factors = Vec::with_capacity(n.saturating_sub(1));
        for i in 2..=n as u32 {
            let d = input.poly.max_degree(i as usize - 1)?.min(i);
            factors.push((i, if d == 0 { 0.0 } else { constants::g(d) }));
        }
        Ok(assemble(self.name(), target, cap, factors, identity_order(n)))
    }
}

/// Smallest `k` such that every column past the `k`-th has at most `k`
/// nonzero entries (`k = n` always works).
fn sparse_column_threshold(a: &NonnegMatrix) -> usize {
    let n = a.n();
    let counts: Vec<usize> = (0..n).map(|j| a.column_nonzeros(j)).collect();
    (1..=n)
        .find(|&k| counts[k..].iter().all(|&c| c <= k))
        .unwrap_or(n)
}

/// `per(A) >= vdw(k) * G(k)^(n-k) * Cap(Prod_A)` for matrices whose columns
/// beyond the `k`-th have at most `k` nonzeros.
pub struct SchrijverSparseBound;

impl BoundStrategy for SchrijverSparseBound {
    fn name(&self) -> &'static str {
        "schrijver_sparse"
    }

    fn certify(&self, input: &BoundInput, opts: &CapacityOptions) -> Result<BoundCertificate> {
        let a = input.matrix.ok_or_else(|| {
            Error::Argument("schrijver_sparse applies to product polynomials of a matrix".into())
        })?;
        let n = require_square_nonzero(input.poly)?;
        let target = input.poly.mixed_partial_at_zero()?;
        let cap = capacity_with(input.poly, opts)?.value;
        let k = sparse_column_threshold(a) as u32;
        let factors = sparse_factor_schedule(n as u32, k, a);
        Ok(assemble(self.name(), target, cap, factors, identity_order(n)))
    }
}

fn sparse_factor_schedule(n: u32, k: u32, a: &NonnegMatrix) -> Vec<(u32, f64)> {
    let mut factors = Vec::new();
    for j in 2..=n {
        let value = if a.column_nonzeros(j as usize - 1) == 0 {
            0.0
        } else if j <= k {
            constants::g(j)
        } else {
            constants::g(k)
        };
        factors.push((j, value));
    }
    factors
}

/// `per(A) >= k^n * G(k)^(n-k) * k!/k^k` for integer matrices with constant
/// line sums `k`; uses the exact capacity `k^n` instead of the solver.
pub struct ImprovedLambdaBound;

impl BoundStrategy for ImprovedLambdaBound {
    fn name(&self) -> &'static str {
        "improved_lambda"
    }

    fn certify(&self, input: &BoundInput, _opts: &CapacityOptions) -> Result<BoundCertificate> {
        let a = input.matrix.ok_or_else(|| {
            Error::Argument("improved_lambda applies to product polynomials of a matrix".into())
        })?;
        let n = require_square_nonzero(input.poly)?;
        let entries: Vec<u32> = a
            .entries()
            .iter()
            .map(|&v| {
                let r = v.round();
                if (v - r).abs() <= 1e-9 && r >= 0.0 {
                    Ok(r as u32)
                } else {
                    Err(Error::Argument(format!(
                        "improved_lambda needs integer entries, got {v}"
                    )))
                }
            })
            .collect::<Result<_>>()?;
        let k = entries[..a.n()].iter().sum::<u32>();
        if k == 0 {
            return Err(Error::Argument("zero line sums".into()));
        }
        let lambda = LambdaMatrix::new(a.n(), k, entries).map_err(|e| {
            Error::Argument(format!("improved_lambda needs constant line sums: {e}"))
        })?;
        let target = input.poly.mixed_partial_at_zero()?;
        let capacity = (k as f64).powi(n as i32);
        let factors = sparse_factor_schedule(n as u32, k.min(n as u32), &lambda.as_nonneg());
        Ok(assemble(self.name(), target, capacity, factors, identity_order(n)))
    }
}

/// Name-keyed registry of bound strategies.
pub struct BoundRegistry {
    strategies: BTreeMap<&'static str, Box<dyn BoundStrategy>>,
}

impl BoundRegistry {
    pub fn new() -> Self {
        BoundRegistry {
            strategies: BTreeMap::new(),
        }
    }

    /// Registry pre-loaded with the four built-in bounds.
    pub fn with_builtin() -> Self {
        let mut r = BoundRegistry::new();
        r.register(Box::new(VdwBound)).expect("fresh registry");
        r.register(Box::new(SchrijverGeneralBound)).expect("fresh registry");
        r.register(Box::new(SchrijverSparseBound)).expect("fresh registry");
        r.register(Box::new(ImprovedLambdaBound)).expect("fresh registry");
        r
    }

    pub fn register(&mut self, strategy: Box<dyn BoundStrategy>) -> Result<()> {
        let name = strategy.name();
        if self.strategies.contains_key(name) {
            return Err(Error::Argument(format!("bound {name:?} already registered")));
        }
        self.strategies.insert(name, strategy);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn BoundStrategy> {
        self.strategies.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

impl Default for BoundRegistry {
    fn default() -> Self {
        BoundRegistry::with_builtin()
    }
}

/// The process-wide registry with the built-in bounds.
pub fn default_registry() -> &'static BoundRegistry {
    static REGISTRY: OnceLock<BoundRegistry> = OnceLock::new();
    REGISTRY.get_or_init(BoundRegistry::with_builtin)
}

fn lookup(name: &str) -> Result<&'static dyn BoundStrategy> {
    default_registry().get(name).ok_or_else(|| {
        Error::Argument(format!(
            "unknown bound {name:?}; available: {}",
            default_registry().names().join(", ")
        ))
    })
}

/// Certifies a polynomial against a registered bound under the identity
/// variable order.
pub fn certify_bound(p: &HomPoly, name: &str, opts: &CapacityOptions) -> Result<BoundCertificate> {
    lookup(name)?.certify(
        &BoundInput {
            poly: p,
            matrix: None,
        },
        opts,
    )
}

/// Certifies the product polynomial of a matrix, making the matrix available
/// to the matrix-shaped bounds.
pub fn certify_matrix_bound(
    a: &NonnegMatrix,
    name: &str,
    opts: &CapacityOptions,
) -> Result<BoundCertificate> {
    let p = a.prod_polynomial()?;
    lookup(name)?.certify(
        &BoundInput {
            poly: &p,
            matrix: Some(a),
        },
        opts,
    )
}

/// Certifies under an explicit variable order (`order` is 1-based and must be
/// a permutation of `1..=n`); the certificate records the order used.
pub fn certify_bound_with_order(
    p: &HomPoly,
    matrix: Option<&NonnegMatrix>,
    name: &str,
    order: &[usize],
    opts: &CapacityOptions,
) -> Result<BoundCertificate> {
    let n = p.num_vars();
    let zero_based: Vec<usize> = order
        .iter()
        .map(|&v| {
            v.checked_sub(1)
                .filter(|&i| i < n)
                .ok_or_else(|| Error::Argument(format!("order entry {v} out of range 1..={n}")))
        })
        .collect::<Result<_>>()?;
    let permuted_poly = p.permute_vars(&zero_based)?;
    let permuted_matrix = match matrix {
        Some(a) => {
            let mut entries = Vec::with_capacity(n * n);
            for i in 0..n {
                for &j in &zero_based {
                    entries.push(a.get(i, j));
                }
            }
            Some(NonnegMatrix::new(n, entries)?)
        }
        None => None,
    };
    let mut cert = lookup(name)?.certify(
        &BoundInput {
            poly: &permuted_poly,
            matrix: permuted_matrix.as_ref(),
        },
        opts,
    )?;
    cert.order = order.to_vec();
    Ok(cert)
}

/// Certifies over several variable orders and keeps the certificate with the
/// largest lower bound (first such order on ties).
pub fn certify_best_order<I>(
    p: &HomPoly,
    matrix: Option<&NonnegMatrix>,
    name: &str,
    orders: I,
    opts: &CapacityOptions,
) -> Result<BoundCertificate>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut best: Option<BoundCertificate> = None;
    for order in orders {
        let cert = certify_bound_with_order(p, matrix, name, &order, opts)?;
        if best
            .as_ref()
            .map(|b| cert.lower_bound > b.lower_bound)
            .unwrap_or(true)
        {
            best = Some(cert);
        }
    }
    best.ok_or_else(|| Error::Argument("no variable orders supplied".into()))
}
