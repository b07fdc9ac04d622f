//! The polynomial cascade: starting from a square polynomial `p` in `n`
//! variables, repeatedly differentiate in the last variable and set it to
//! zero, producing `q_i` in `i` variables for `i = n, n-1, .., 1`. The last
//! polynomial is `q_1 = c x_1` where `c` is the multilinear coefficient of
//! `p`, and each step obeys `Cap(q_{i-1}) >= G(deg_{q_i}(i)) Cap(q_i)` when
//! `p` is H-stable; chaining the steps yields the capacity lower bound on the
//! multilinear coefficient.

use serde::Serialize;

use crate::capacity::{capacity_with, CapacityOptions, CapacityResult, PolytopeVerdict};
use crate::constants;
use crate::error::{Error, Result};
use crate::poly::HomPoly;

/// Cascade size guard.
pub const CASCADE_MAX_N: usize = 9;

/// One level of the cascade: the polynomial `q_level` in `level` variables,
/// its capacity, and the degree of its own top variable.
#[derive(Clone, Debug, Serialize)]
pub struct CascadeStep {
    pub level: usize,
    pub polynomial: HomPoly,
    pub capacity: CapacityResult,
    /// `deg_{q_level}(level)`, the maximum exponent of the last variable.
    pub top_degree: u32,
    /// `G(max(1, top_degree))`; the step inequality reads
    /// `Cap(q_{level-1}) >= step_factor * Cap(q_level)` (when the top degree
    /// is zero the upper capacity vanishes, so the clamped factor is inert).
    pub step_factor: f64,
    /// Zero polynomial at this level (possible for sparse inputs).
    pub degenerate: bool,
}

/// Per-step slack report. `slack_degree_aware` uses `G(deg_{q_i}(i))` and
/// `slack_uniform` the weaker `G(i)`; both inequalities are part of the
/// contract and both slacks are emitted.
#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub level: usize,
    pub cap_lower: f64,
    pub cap_upper: f64,
    pub factor_degree_aware: f64,
    pub factor_uniform: f64,
    pub slack_degree_aware: f64,
    pub slack_uniform: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Cascade {
    /// Steps ordered from level `n` down to level 1.
    pub steps: Vec<CascadeStep>,
    /// `deg_p(i)` of the input polynomial, 0-indexed by variable.
    pub input_degrees: Vec<u32>,
}

fn degenerate_capacity() -> CapacityResult {
    CapacityResult {
        value: 0.0,
        minimizer: Vec::new(),
        attained: false,
        iterations: 0,
        gradient_norm: 0.0,
        certificate: PolytopeVerdict::Outside,
    }
}

/// Builds the full cascade, solving one capacity per level. Zero intermediate
/// polynomials are recorded as degenerate steps with capacity 0.
pub fn build_cascade(p: &HomPoly, opts: &CapacityOptions) -> Result<Cascade> {
    let n = p.num_vars();
    if n as u32 != p.degree() {
        return Err(Error::Argument(format!(
            "cascade needs a square polynomial, got {} variables of degree {}",
            n,
            p.degree()
        )));
    }
    if n > CASCADE_MAX_N {
        return Err(Error::Budget(format!(
            "cascade is capped at n={CASCADE_MAX_N}, got {n}"
        )));
    }
    if p.is_zero() {
        return Err(Error::Argument("cascade of the zero polynomial".into()));
    }
    let input_degrees: Vec<u32> = (0..n).map(|i| p.max_degree(i).unwrap_or(0)).collect();

    let mut steps = Vec::with_capacity(n);
    let mut current = p.clone();
    for level in (1..=n).rev() {
        let top_degree = if current.is_zero() {
            0
        } else {
            current.max_degree(level - 1)?
        };
        let capacity = if current.is_zero() {
            degenerate_capacity()
        } else {
            capacity_with(&current, opts)?
        };
        steps.push(CascadeStep {
            level,
            polynomial: current.clone(),
            capacity,
            top_degree,
            step_factor: constants::g(top_degree.max(1)),
            degenerate: current.is_zero(),
        });
        if level > 1 {
            current = if current.is_zero() || top_degree == 0 {
                HomPoly::zero(level - 1, level as u32 - 1)?
            } else {
                current
                    .partial_derivative(level - 1)?
                    .restrict_zero(level - 1)?
            };
        }
    }
    Ok(Cascade {
        steps,
        input_degrees,
    })
}

impl Cascade {
    pub fn num_levels(&self) -> usize {
        self.steps.len()
    }

    /// The step at a given level (`level` variables).
    pub fn step(&self, level: usize) -> Option<&CascadeStep> {
        let n = self.steps.len();
        if level == 0 || level > n {
            return None;
        }
        Some(&self.steps[n - level])
    }

    /// Multilinear coefficient of the input, read off the bottom of the
    /// cascade (`q_1 = c x_1`).
    pub fn mixed_partial(&self) -> f64 {
        self.step(1)
            .map(|s| s.polynomial.coeff(&[1]))
            .unwrap_or(0.0)
    }

    /// Capacity of the input polynomial.
    pub fn input_capacity(&self) -> f64 {
        self.steps.first().map(|s| s.capacity.value).unwrap_or(0.0)
    }

    /// `prod_{i=2..n} G(min(i, deg_p(i)))` over the input degrees; a level
    /// with `deg_p(i) = 0` contributes a factor 0 (the capacity vanishes
    /// there, so the chained bound degenerates to 0).
    pub fn schr_product(&self) -> f64 {
        let n = self.steps.len();
        (2..=n)
            .map(|i| {
                let d = self.input_degrees[i - 1].min(i as u32);
                if d == 0 {
                    0.0
                } else {
                    constants::g(d)
                }
            })
            .product()
    }

    /// Slack report for the step from level `i` down to `i-1` (`2 <= i <= n`).
    pub fn verify_step(&self, level: usize) -> Result<StepReport> {
        if level < 2 || level > self.steps.len() {
            return Err(Error::Argument(format!(
                "step level must be in 2..={}, got {level}",
                self.steps.len()
            )));
        }
        let upper = self.step(level).expect("level checked");
        let lower = self.step(level - 1).expect("level checked");
        let cap_upper = upper.capacity.value;
        let cap_lower = lower.capacity.value;
        let factor_degree_aware = upper.step_factor;
        let factor_uniform = constants::g(level as u32);
        Ok(StepReport {
            level,
            cap_lower,
            cap_upper,
            factor_degree_aware,
            factor_uniform,
            slack_degree_aware: cap_lower - factor_degree_aware * cap_upper,
            slack_uniform: cap_lower - factor_uniform * cap_upper,
        })
    }

    pub fn verify_all_steps(&self) -> Result<Vec<StepReport>> {
        (2..=self.steps.len()).map(|i| self.verify_step(i)).collect()
    }
}

/// Closed-form capacity of a two-variable quadratic
/// `a20 x1^2 + a11 x1 x2 + a02 x2^2`: the cross coefficient plus twice the
/// geometric mean of the squares' coefficients.
pub fn two_var_capacity_closed_form(q2: &HomPoly) -> Result<f64> {
    if q2.num_vars() != 2 || q2.degree() != 2 {
        return Err(Error::Argument(
            "closed form applies to two-variable quadratics".into(),
        ));
    }
    let a20 = q2.coeff(&[2, 0]);
    let a11 = q2.coeff(&[1, 1]);
    let a02 = q2.coeff(&[0, 2]);
    Ok(a11 + 2.0 * (a20 * a02).sqrt())
}
