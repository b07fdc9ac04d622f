//! Numeric H-stability verdicts for homogeneous polynomials with nonnegative
//! coefficients.
//!
//! A polynomial is H-stable when it has no zero with all variables in the
//! open right half-plane; equivalently, it is positive on the open positive
//! orthant and every line restriction `p(tX - Y)` with `X, Y > 0` has only
//! real positive roots. The test samples such lines: a failing trial is a
//! hard, re-verifiable certificate of instability, while all-pass only means
//! "probably stable".

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::HomPoly;
use crate::univariate::{splitting_allowance, UnivariatePoly};

/// Restricts `p` to the line `t -> p(t X + Y)`; `X` must be strictly
/// positive, so the restriction has degree exactly `deg p` with leading
/// coefficient `p(X)`.
///
/// Coefficients are recovered by sampling at Chebyshev nodes and solving the
/// Vandermonde system; the variable is pre-scaled by the ratio of the `Y` and
/// `X` evaluation scales so the fitted coefficients stay balanced. The fit is
/// validated at off-node checkpoints and rejected beyond `1e-6` of the sample
/// scale.
pub fn restrict_to_line(p: &HomPoly, x: &[f64], y: &[f64]) -> Result<UnivariatePoly> {
    let m = p.num_vars();
    if x.len() != m || y.len() != m {
        return Err(Error::Dimension(format!(
            "line restriction expects vectors of length {m}"
        )));
    }
    if x.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::Argument("direction X must be strictly positive".into()));
    }
    if p.is_zero() {
        return Err(Error::Argument("line restriction of the zero polynomial".into()));
    }
    let n = p.degree() as usize;
    let px = p.evaluate(x)?;
    let y_abs: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let py = p.evaluate(&y_abs)?;
    let alpha = if py > 0.0 && px > 0.0 {
        (py / px).powf(1.0 / n as f64).clamp(1e-6, 1e6)
    } else {
        let nx = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let ny = y.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if ny > 0.0 {
            (ny / nx).clamp(1e-6, 1e6)
        } else {
            1.0
        }
    };

    let eval_at = |s: f64| -> Result<f64> {
        let point: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| alpha * s * xi + yi)
            .collect();
        p.evaluate(&point)
    };

    let nodes: Vec<f64> = (0..=n)
        .map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * (n + 1)) as f64).cos())
        .collect();
    let samples: Vec<f64> = nodes.iter().map(|&s| eval_at(s)).collect::<Result<_>>()?;

    let coeffs = if n == 0 {
        vec![samples[0]]
    } else {
        let vand = nalgebra::DMatrix::from_fn(n + 1, n + 1, |r, c| nodes[r].powi(c as i32));
        let rhs = nalgebra::DVector::from_column_slice(&samples);
        let sol = vand
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular Vandermonde system in line fit".into()))?;
        sol.iter().copied().collect::<Vec<f64>>()
    };

    // off-node validation
    let scale = samples.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    for &s in &[-0.83, 0.11, 0.67] {
        let fitted = coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c);
        let direct = eval_at(s)?;
        if (fitted - direct).abs() > 1e-6 * scale {
            return Err(Error::Numeric(format!(
                "ill-conditioned line fit (residual {:.3e} at scale {:.3e})",
                (fitted - direct).abs(),
                scale
            )));
        }
    }

    // undo the variable scaling: coefficient of t^i is c_i / alpha^i
    Ok(UnivariatePoly::new(
        coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c / alpha.powi(i as i32))
            .collect(),
    ))
}

/// Verdict status of the numeric H-stability test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityStatus {
    Refuted,
    ProbablyStable,
}

/// Counterexample data for a refuted polynomial: `root` is a non-real root of
/// `p(t X - Y)`, re-verifiable by evaluating `p` at `root * X - Y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub root_re: f64,
    pub root_im: f64,
}

impl StabilityWitness {
    pub fn root(&self) -> Complex64 {
        Complex64::new(self.root_re, self.root_im)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub trials: usize,
    pub witness: Option<StabilityWitness>,
    /// Largest `|Im z| / (1 + |z|)` seen across all trial roots.
    pub max_imag_residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StabilityOptions {
    pub trials: usize,
    /// Root-reality tolerance; widened per trial by the repeated-root
    /// splitting allowance of the restriction degree.
    pub tol: f64,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            trials: 200,
            tol: 1e-7,
            seed: crate::DEFAULT_SEED,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

enum TrialOutcome {
    Pass { max_res: f64 },
    Fail { witness: StabilityWitness, max_res: f64 },
    Error(Error),
}

fn run_trial(p: &HomPoly, seed: u64, trial: usize, tol: f64) -> TrialOutcome {
    let m = p.num_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let x: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, 1e-2, 1e2)).collect();
    let y: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, 1e-2, 1e2)).collect();
    let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
    let line = match restrict_to_line(p, &x, &neg_y) {
        Ok(l) => l,
        Err(e) => return TrialOutcome::Error(e),
    };
    let k = line.degree();
    let roots = match line.roots() {
        Ok(r) => r,
        Err(e) => return TrialOutcome::Error(e),
    };
    let mut max_res: f64 = 0.0;
    for root in roots {
        // polish the eigenvalue with a couple of complex Newton steps so the
        // witness is sharp before judging it
        let mut z = root;
        let dline = line.derivative();
        for _ in 0..3 {
            let d = dline.eval_complex(z);
            if d.norm() == 0.0 {
                break;
            }
            let step = line.eval_complex(z) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            z -= step;
        }
        max_res = max_res.max(z.im.abs() / (1.0 + z.norm()));
        let allowed = splitting_allowance(k, z.norm(), tol);
        // X, Y > 0: roots of p(tX - Y) must be real and positive
        if z.im.abs() > allowed || z.re < -allowed {
            return TrialOutcome::Fail {
                witness: StabilityWitness {
                    x,
                    y: neg_y,
                    root_re: z.re,
                    root_im: z.im,
                },
                max_res,
            };
        }
    }
    TrialOutcome::Pass { max_res }
}

/// Samples `trials` strictly positive pairs `(X, Y)` log-uniform on
/// `[1e-2, 1e2]` and checks that every root of `p(tX - Y)` is real and
/// positive. Any failure refutes H-stability with a witness; all passes
/// yield `ProbablyStable`. Deterministic for a given seed; trials run
/// concurrently.
pub fn h_stable_test(p: &HomPoly, opts: &StabilityOptions) -> Result<StabilityVerdict> {
    if p.is_zero() {
        return Err(Error::Argument("stability of the zero polynomial".into()));
    }
    let outcomes: Vec<(usize, TrialOutcome)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| (t, run_trial(p, opts.seed, t, opts.tol)))
        .collect();

    let mut max_res: f64 = 0.0;
    let mut failure: Option<(usize, StabilityWitness)> = None;
    for (t, outcome) in outcomes {
        match outcome {
            TrialOutcome::Pass { max_res: r } => max_res = max_res.max(r),
            TrialOutcome::Fail { witness, max_res: r } => {
                max_res = max_res.max(r);
                if failure.as_ref().map(|(ft, _)| t < *ft).unwrap_or(true) {
                    failure = Some((t, witness));
                }
            }
            TrialOutcome::Error(e) => return Err(e),
        }
    }
    Ok(match failure {
        Some((_, witness)) => StabilityVerdict {
            status: StabilityStatus::Refuted,
            trials: opts.trials,
            witness: Some(witness),
            max_imag_residual: max_res,
        },
        None => StabilityVerdict {
            status: StabilityStatus::ProbablyStable,
            trials: opts.trials,
            witness: None,
            max_imag_residual: max_res,
        },
    })
}

/// Re-verifies a refutation witness independently of the line-fit machinery:
/// `p` must (nearly) vanish at `root * X + Y` and the root must be
/// significantly non-real or negative.
pub fn verify_witness(p: &HomPoly, w: &StabilityWitness, tol: f64) -> Result<bool> {
    let root = w.root();
    let z: Vec<Complex64> = w
        .x
        .iter()
        .zip(&w.y)
        .map(|(&xi, &yi)| root * xi + yi)
        .collect();
    let value = p.evaluate_complex(&z)?;
    let abs_point: Vec<f64> = z.iter().map(|v| v.norm()).collect();
    let scale = p.evaluate(&abs_point)?.max(f64::MIN_POSITIVE);
    let vanishes = value.norm() <= 1e-6 * scale;
    let allowed = splitting_allowance(p.degree() as usize, root.norm(), tol);
    let significant = root.im.abs() > allowed || root.re < -allowed;
    Ok(vanishes && significant)
}
