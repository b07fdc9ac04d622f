//! Capacity of a square polynomial with nonnegative coefficients:
//! `Cap(p) = inf p(x)/prod(x)` over positive `x`, equivalently the infimum of
//! the convex function `f(y) = log p(e^y) - sum(y)` over the hyperplane
//! `sum(y) = 0`.
//!
//! The solve proceeds in three stages:
//!
//! 1. classify the all-ones vector against the Newton polytope (exact LP, or
//!    the polynomial's own coefficients when it is doubly stochastic) —
//!    outside means the capacity is zero and no optimization runs;
//! 2. damped Newton with Armijo backtracking on the reduced `(n-1)`-dim
//!    coordinates, starting from `y = 0`;
//! 3. a divergence watchdog: boundary instances have a finite infimum that is
//!    not attained, so once the iterate leaves a large ball the best value so
//!    far is reported with `attained = false`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::HomPoly;
use crate::simplex::{locate_in_hull, HullLocation};

/// Support-size cap for the exact-rational membership LP exposed by
/// [`positivity_certificate`].
pub const POSITIVITY_LP_MAX_SUPPORT: usize = 200;

/// Location of the all-ones vector relative to the Newton polytope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolytopeVerdict {
    /// Relative interior: capacity positive and the infimum is attained.
    Interior,
    /// On the boundary: capacity positive but the infimum may be unattained.
    Boundary,
    /// Outside: capacity is zero.
    Outside,
}

/// Outcome of a capacity solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityResult {
    pub value: f64,
    /// Point with unit coordinate product where the value is (approximately)
    /// taken; empty when the certificate is `Outside`.
    pub minimizer: Vec<f64>,
    pub attained: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub certificate: PolytopeVerdict,
}

/// Solver knobs. The defaults are the contract used by every caller in this
/// crate: gradient tolerance `1e-10` relative to `1 + |f|`, 500 iterations,
/// divergence radius 50 in log coordinates, Newton steps clipped to length 6.
///
/// The step clip matters on boundary instances: the damped Newton direction
/// along a flat ray is arbitrarily long, and a single accepted jump past the
/// divergence radius would stop the solve before the value has converged.
/// Walking outward at most `max_step` per iteration lets the vanishing terms
/// decay to `exp(-radius)` scale before the watchdog reports.
#[derive(Clone, Copy, Debug)]
pub struct CapacityOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub divergence_radius: f64,
    pub max_step: f64,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            tol: 1e-10,
            max_iterations: 500,
            divergence_radius: 50.0,
            max_step: 6.0,
        }
    }
}

impl CapacityOptions {
    pub fn with_tol(tol: f64) -> Self {
        CapacityOptions {
            tol,
            ..Default::default()
        }
    }
}

fn require_square(p: &HomPoly) -> Result<usize> {
    let n = p.num_vars();
    if n as u32 != p.degree() {
        return Err(Error::Argument(format!(
            "capacity is defined for square polynomials; got {} variables of degree {}",
            n,
            p.degree()
        )));
    }
    if p.is_zero() {
        return Err(Error::Argument("capacity of the zero polynomial".into()));
    }
    Ok(n)
}

/// Decides whether the all-ones vector lies in the Newton polytope, by exact
/// rational linear feasibility. Guarded at [`POSITIVITY_LP_MAX_SUPPORT`]
/// support monomials.
pub fn positivity_certificate(p: &HomPoly) -> Result<PolytopeVerdict> {
    let n = require_square(p)?;
    if p.num_terms() > POSITIVITY_LP_MAX_SUPPORT {
        return Err(Error::Budget(format!(
            "membership LP is capped at {POSITIVITY_LP_MAX_SUPPORT} support monomials, got {}",
            p.num_terms()
        )));
    }
    Ok(match locate_in_hull(&p.support(), &vec![1u32; n]) {
        HullLocation::Interior => PolytopeVerdict::Interior,
        HullLocation::Boundary => PolytopeVerdict::Boundary,
        HullLocation::Outside => PolytopeVerdict::Outside,
    })
}

/// Internal verdict used by the solver. A doubly stochastic polynomial is its
/// own interiority witness (its coefficients are a positive convex
/// representation of the all-ones vector), which skips the LP for the large
/// dense supports that arise from products of doubly stochastic rows; all
/// other inputs go through the exact LP without a size cap.
fn solver_verdict(p: &HomPoly) -> PolytopeVerdict {
    if p.is_doubly_stochastic(1e-9) {
        return PolytopeVerdict::Interior;
    }
    match locate_in_hull(&p.support(), &vec![1u32; p.num_vars()]) {
        HullLocation::Interior => PolytopeVerdict::Interior,
        HullLocation::Boundary => PolytopeVerdict::Boundary,
        HullLocation::Outside => PolytopeVerdict::Outside,
    }
}

struct LogObjective {
    exps: Vec<Vec<f64>>,
    log_coeffs: Vec<f64>,
    n: usize,
}

impl LogObjective {
    fn new(p: &HomPoly) -> Self {
        let mut exps = Vec::with_capacity(p.num_terms());
        let mut log_coeffs = Vec::with_capacity(p.num_terms());
        for (e, c) in p.terms() {
            exps.push(e.iter().map(|&v| v as f64).collect());
            log_coeffs.push(c.ln());
        }
        LogObjective {
            exps,
            log_coeffs,
            n: p.num_vars(),
        }
    }

    /// `log p(e^y) - sum(y)` with a max-shifted exponent sum.
    fn value(&self, y: &[f64]) -> f64 {
        let mut shift = f64::NEG_INFINITY;
        let terms: Vec<f64> = self
            .exps
            .iter()
            .zip(&self.log_coeffs)
            .map(|(r, lc)| {
                let t = lc + r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                shift = shift.max(t);
                t
            })
            .collect();
        let s: f64 = terms.iter().map(|t| (t - shift).exp()).sum();
        shift + s.ln() - y.iter().sum::<f64>()
    }

    /// Value, gradient and Hessian in the full `y` coordinates. The gradient
    /// is `sum_r w_r r - 1` and the Hessian the covariance of the exponent
    /// vectors under the softmax weights `w`.
    fn value_grad_hess(&self, y: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut shift = f64::NEG_INFINITY;
        let terms: Vec<f64> = self
            .exps
            .iter()
            .zip(&self.log_coeffs)
            .map(|(r, lc)| {
                let t = lc + r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                shift = shift.max(t);
                t
            })
            .collect();
        let weights: Vec<f64> = terms.iter().map(|t| (t - shift).exp()).collect();
        let total: f64 = weights.iter().sum();
        let f = shift + total.ln() - y.iter().sum::<f64>();

        let mut mean = vec![0.0; n];
        for (w, r) in weights.iter().zip(&self.exps) {
            for i in 0..n {
                mean[i] += w / total * r[i];
            }
        }
        let grad = DVector::from_fn(n, |i, _| mean[i] - 1.0);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for (w, r) in weights.iter().zip(&self.exps) {
            let wn = w / total;
            for i in 0..n {
                let di = r[i] - mean[i];
                for j in 0..=i {
                    hess[(i, j)] += wn * di * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                hess[(j, i)] = hess[(i, j)];
            }
        }
        (f, grad, hess)
    }
}

/// `log p(e^y) - sum(y)` — exposed so invariants (convexity, translation
/// invariance, finite-difference gradients) can be tested against the exact
/// implementation the solver uses.
pub fn log_objective(p: &HomPoly, y: &[f64]) -> Result<f64> {
    require_square(p)?;
    if y.len() != p.num_vars() {
        return Err(Error::Dimension("point has wrong length".into()));
    }
    Ok(LogObjective::new(p).value(y))
}

/// Analytic gradient of [`log_objective`] in the full `y` coordinates.
pub fn log_objective_gradient(p: &HomPoly, y: &[f64]) -> Result<Vec<f64>> {
    require_square(p)?;
    if y.len() != p.num_vars() {
        return Err(Error::Dimension("point has wrong length".into()));
    }
    let (_, g, _) = LogObjective::new(p).value_grad_hess(y);
    Ok(g.iter().copied().collect())
}

fn embed(z: &DVector<f64>, n: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(n);
    y.extend(z.iter().copied());
    y.push(-z.iter().sum::<f64>());
    y
}

/// Capacity with default options except the gradient tolerance.
pub fn capacity(p: &HomPoly, tol: f64) -> Result<CapacityResult> {
    capacity_with(p, &CapacityOptions::with_tol(tol))
}

/// Full capacity solve.
pub fn capacity_with(p: &HomPoly, opts: &CapacityOptions) -> Result<CapacityResult> {
    let n = require_square(p)?;
    let certificate = solver_verdict(p);
    if certificate == PolytopeVerdict::Outside {
        return Ok(CapacityResult {
            value: 0.0,
            minimizer: Vec::new(),
            attained: false,
            iterations: 0,
            gradient_norm: 0.0,
            certificate,
        });
    }
    if n == 1 {
        return Ok(CapacityResult {
            value: p.coefficient_sum(),
            minimizer: vec![1.0],
            attained: true,
            iterations: 0,
            gradient_norm: 0.0,
            certificate,
        });
    }

    let obj = LogObjective::new(p);
    let dim = n - 1;
    let mut z = DVector::<f64>::zeros(dim);
    let mut best_f = f64::INFINITY;
    let mut best_y = embed(&z, n);

    for iter in 0..opts.max_iterations {
        let y = embed(&z, n);
        let (f, g_y, h_y) = obj.value_grad_hess(&y);
        if f < best_f {
            best_f = f;
            best_y = y.clone();
        }

        let g = DVector::from_fn(dim, |i, _| g_y[i] - g_y[n - 1]);
        let gnorm = g.norm();
        if gnorm <= opts.tol * (1.0 + f.abs()) {
            let minimizer: Vec<f64> = y.iter().map(|v| v.exp()).collect();
            return Ok(CapacityResult {
                value: f.exp(),
                minimizer,
                attained: certificate == PolytopeVerdict::Interior,
                iterations: iter,
                gradient_norm: gnorm,
                certificate,
            });
        }

        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                h[(i, j)] =
                    h_y[(i, j)] - h_y[(i, n - 1)] - h_y[(n - 1, j)] + h_y[(n - 1, n - 1)];
            }
        }

        // damped Newton: bump the diagonal until the factorization succeeds
        let trace = h.trace();
        let mut mu = 0.0f64;
        let direction = loop {
            let mut damped = h.clone();
            for i in 0..dim {
                damped[(i, i)] += mu;
            }
            if let Some(chol) = damped.cholesky() {
                let d = chol.solve(&(-&g));
                if d.iter().all(|v| v.is_finite()) {
                    break d;
                }
            }
            mu = if mu == 0.0 {
                1e-12 * (1.0 + trace.abs() / dim as f64)
            } else {
                mu * 10.0
            };
            if mu > 1e12 {
                break -g.clone();
            }
        };
        let mut direction = if direction.dot(&g) < 0.0 {
            direction
        } else {
            -g.clone()
        };
        let dnorm = direction.norm();
        if dnorm > opts.max_step {
            direction *= opts.max_step / dnorm;
        }

        if gnorm <= 1e-6 * (1.0 + f.abs()) {
            // pure Newton phase: this close to the optimum an Armijo test on
            // f is noise-limited (resolving a 1e-10 gradient needs f
            // differences near 1e-20), while the unit Newton step on a convex
            // objective converges quadratically
            z += &direction;
        } else {
            // Armijo backtracking
            let slope = direction.dot(&g);
            let mut step = 1.0f64;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &z + &direction * step;
                let fc = obj.value(&embed(&cand, n));
                if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                    z = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    gradient_norm: gnorm,
                    value: best_f.exp(),
                    point: best_y,
                });
            }
        }

        let y_now = embed(&z, n);
        let r2: f64 = y_now.iter().map(|v| v * v).sum();
        if r2.sqrt() > opts.divergence_radius {
            let f_now = obj.value(&y_now);
            if f_now < best_f {
                best_f = f_now;
                best_y = y_now;
            }
            let (_, g_y, _) = obj.value_grad_hess(&best_y);
            let g = DVector::from_fn(dim, |i, _| g_y[i] - g_y[n - 1]);
            return Ok(CapacityResult {
                value: best_f.exp(),
                minimizer: best_y.iter().map(|v| v.exp()).collect(),
                attained: false,
                iterations: iter + 1,
                gradient_norm: g.norm(),
                certificate,
            });
        }
    }

    let (_, g_y, _) = obj.value_grad_hess(&best_y);
    let g = DVector::from_fn(dim, |i, _| g_y[i] - g_y[n - 1]);
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        gradient_norm: g.norm(),
        value: best_f.exp(),
        point: best_y,
    })
}

/// A polynomial together with the positive variable scaling and normalization
/// that make it doubly stochastic.
#[derive(Clone, Debug, Serialize)]
pub struct ScaledPolynomial {
    pub base: HomPoly,
    pub scale_vector: Vec<f64>,
    pub normalization: f64,
}

impl ScaledPolynomial {
    /// `p(t . x) / p(t)` — the doubly stochastic scaling of the base.
    pub fn scaled_poly(&self) -> Result<HomPoly> {
        self.base
            .scale_vars(&self.scale_vector)?
            .scale(1.0 / self.normalization)
    }
}

/// Scales `p` by its capacity minimizer so that the normalized polynomial is
/// doubly stochastic within `tol`. Requires the capacity infimum to be
/// attained (all-ones strictly inside the Newton polytope).
pub fn scale_to_doubly_stochastic(p: &HomPoly, tol: f64) -> Result<ScaledPolynomial> {
    let result = capacity_with(p, &CapacityOptions::default())?;
    if !result.attained {
        return Err(Error::NotAttained(format!(
            "capacity minimum not attained (certificate {:?})",
            result.certificate
        )));
    }
    let normalization = p.evaluate(&result.minimizer)?;
    let scaled = ScaledPolynomial {
        base: p.clone(),
        scale_vector: result.minimizer,
        normalization,
    };
    let q = scaled.scaled_poly()?;
    if !q.is_doubly_stochastic(tol) {
        return Err(Error::Numeric(format!(
            "scaled polynomial misses the doubly stochastic condition at tolerance {tol}"
        )));
    }
    Ok(scaled)
}

/// Uniqueness certificate for the capacity minimizer: every mixed partial
/// that replaces one multilinear factor `x_i` by `x_j^2` must carry a positive
/// coefficient. Reports all failing ordered pairs `(i, j)`.
#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport {
    pub unique: bool,
    pub failing_pairs: Vec<(usize, usize)>,
}

/// Checks the second-order positivity conditions that certify a unique
/// capacity minimizer. Capped at `n <= 6`.
pub fn capacity_exactness_check(p: &HomPoly) -> Result<ExactnessReport> {
    let n = require_square(p)?;
    if n > 6 {
        return Err(Error::Budget(format!(
            "exactness check is capped at n=6, got {n}"
        )));
    }
    let mut failing = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut exps = vec![1u32; n];
            exps[i] = 0;
            exps[j] = 2;
            if p.coeff(&exps) <= 0.0 {
                failing.push((i, j));
            }
        }
    }
    Ok(ExactnessReport {
        unique: failing.is_empty(),
        failing_pairs: failing,
    })
}
