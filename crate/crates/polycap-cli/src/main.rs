//! Command-line front end: loads matrices and polynomials, runs the solvers
//! and certifiers, and emits machine-readable reports.
//!
//! Exit codes: 0 success (and bound holds), 1 bound violated, 2 input error,
//! 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polycap::bounds::{certify_bound_with_order, BoundCertificate};
use polycap::capacity::{
    capacity_with, scale_to_doubly_stochastic, CapacityOptions, CapacityResult,
};
use polycap::cascade::{build_cascade, Cascade, StepReport};
use polycap::error::Error;
use polycap::matrix::{enumerate_lambda, LambdaBudget, LambdaMatrix, NonnegMatrix, PsdTuple};
use polycap::poly::HomPoly;
use polycap::stability::{h_stable_test, StabilityOptions, StabilityVerdict};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Parser)]
#[command(
    name = "polycap",
    version,
    about = "Capacities, permanents, mixed discriminants and certified lower bounds"
)]
struct Cli {
    /// Seed for randomized procedures (stability sampling).
    #[arg(long, global = true, default_value_t = polycap::DEFAULT_SEED)]
    seed: u64,
    /// Tolerance override; defaults depend on the subcommand.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Cap the number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Permanent of a CSV matrix (Ryser).
    Permanent { input: PathBuf },
    /// Mixed discriminant of a PSD tuple JSON.
    MixedDisc { input: PathBuf },
    /// Capacity of a polynomial JSON.
    Capacity { input: PathBuf },
    /// Scale a polynomial to doubly stochastic form.
    Scale { input: PathBuf },
    /// Certify a named lower bound for a matrix CSV or polynomial JSON.
    Certify {
        input: PathBuf,
        #[arg(long)]
        bound: String,
        /// Optional 1-based variable order (comma separated).
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
    /// Exhaustive minimum permanent over matrices with constant line sums.
    LambdaMin {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        k_max: u32,
        #[arg(long, default_value_t = 5)]
        n_max: usize,
        /// Stream every enumerated matrix as a JSON line
        /// {"matrix": [[..]], "permanent": p} instead of the summary.
        #[arg(long)]
        list: bool,
    },
    /// Numeric H-stability verdict for a polynomial JSON.
    Stability {
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Build the differentiate-and-restrict cascade and verify each step.
    Cascade { input: PathBuf },
}

#[derive(Serialize)]
struct PermanentReport {
    n: usize,
    permanent: f64,
}

#[derive(Serialize)]
struct MixedDiscReport {
    n: usize,
    mixed_discriminant: f64,
}

#[derive(Serialize)]
struct ScaleReport {
    scale_vector: Vec<f64>,
    normalization: f64,
    polynomial: HomPoly,
    doubly_stochastic: bool,
}

#[derive(Serialize)]
struct LambdaMinReport {
    k: u32,
    n: usize,
    count: u64,
    min_per: u64,
    argmin: LambdaMatrix,
    bound: f64,
    slack: f64,
}

#[derive(Serialize)]
struct CascadeReport {
    cascade: Cascade,
    steps: Vec<StepReport>,
    mixed_partial: f64,
    input_capacity: f64,
    schr_product: f64,
    end_to_end_slack: f64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse(_)
        | Error::Validation(_)
        | Error::Dimension(_)
        | Error::Argument(_)
        | Error::Budget(_)
        | Error::Io(_) => 2,
        Error::Numeric(_) | Error::NotAttained(_) | Error::NoConvergence { .. } => 3,
    }
}

fn read_poly(path: &Path) -> Result<HomPoly, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<NonnegMatrix, Error> {
    let text = std::fs::read_to_string(path)?;
    NonnegMatrix::from_csv_str(&text)
}

fn read_tuple(path: &Path) -> Result<PsdTuple, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn is_csv(path: &Path) -> bool {
    path.extension().map(|e| e == "csv").unwrap_or(false)
}

fn emit<T: Serialize>(format: Format, value: &T, table: impl FnOnce(&T) -> String) -> Result<(), Error> {
    match format {
        Format::Json => {
            let line = serde_json::to_string(value)
                .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
            println!("{line}");
        }
        Format::Table => println!("{}", table(value)),
    }
    Ok(())
}

fn capacity_table(r: &CapacityResult) -> String {
    format!(
        "capacity      {:.12e}\nattained      {}\ncertificate   {:?}\niterations    {}\ngradient norm {:.3e}\nminimizer     {:?}",
        r.value, r.attained, r.certificate, r.iterations, r.gradient_norm, r.minimizer
    )
}

fn certificate_table(c: &BoundCertificate) -> String {
    let factors: Vec<String> = c
        .factors
        .iter()
        .map(|(i, g)| format!("G[{i}]={g:.6}"))
        .collect();
    format!(
        "bound        {}\ntarget       {:.12e}\nlower bound  {:.12e}\ncapacity     {:.12e}\nslack        {:.3e}\nfactors      {}\norder        {:?}",
        c.bound_name,
        c.target,
        c.lower_bound,
        c.capacity,
        c.slack,
        factors.join(" "),
        c.order
    )
}

fn verdict_table(v: &StabilityVerdict) -> String {
    match &v.witness {
        Some(w) => format!(
            "status    refuted\ntrials    {}\nroot      {:.6e} + {:.6e}i\nX         {:?}\nY         {:?}",
            v.trials, w.root_re, w.root_im, w.x, w.y
        ),
        None => format!(
            "status              probably_stable\ntrials              {}\nmax imag residual   {:.3e}",
            v.trials, v.max_imag_residual
        ),
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    if let Some(jobs) = cli.jobs {
        // ignore failure when a pool exists already (e.g. repeat invocations in tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.command {
        Command::Permanent { input } => {
            let a = read_matrix(input)?;
            let report = PermanentReport {
                n: a.n(),
                permanent: a.permanent()?,
            };
            emit(cli.format, &report, |r| format!("{:.10}", r.permanent))?;
            Ok(0)
        }
        Command::MixedDisc { input } => {
            let t = read_tuple(input)?;
            let report = MixedDiscReport {
                n: t.n(),
                mixed_discriminant: t.mixed_discriminant()?,
            };
            emit(cli.format, &report, |r| format!("{:.10}", r.mixed_discriminant))?;
            Ok(0)
        }
        Command::Capacity { input } => {
            let p = read_poly(input)?;
            let opts = CapacityOptions::with_tol(cli.tol.unwrap_or(1e-10));
            let result = capacity_with(&p, &opts)?;
            emit(cli.format, &result, capacity_table)?;
            Ok(0)
        }
        Command::Scale { input } => {
            let p = read_poly(input)?;
            let tol = cli.tol.unwrap_or(1e-7);
            let scaled = scale_to_doubly_stochastic(&p, tol)?;
            let poly = scaled.scaled_poly()?;
            let report = ScaleReport {
                doubly_stochastic: poly.is_doubly_stochastic(tol),
                scale_vector: scaled.scale_vector.clone(),
                normalization: scaled.normalization,
                polynomial: poly,
            };
            emit(cli.format, &report, |r| {
                format!(
                    "scale vector   {:?}\nnormalization  {:.12e}\ndoubly stochastic within {tol:e}: {}",
                    r.scale_vector, r.normalization, r.doubly_stochastic
                )
            })?;
            Ok(0)
        }
        Command::Certify { input, bound, order } => {
            let opts = CapacityOptions::default();
            let (poly, matrix) = if is_csv(input) {
                let a = read_matrix(input)?;
                (a.prod_polynomial()?, Some(a))
            } else {
                (read_poly(input)?, None)
            };
            let n = poly.num_vars();
            let order = order.clone().unwrap_or_else(|| (1..=n).collect());
            let cert = certify_bound_with_order(&poly, matrix.as_ref(), bound, &order, &opts)?;
            emit(cli.format, &cert, certificate_table)?;
            let tol = cli.tol.unwrap_or(1e-9);
            Ok(if cert.holds(tol) { 0 } else { 1 })
        }
        Command::LambdaMin {
            k,
            n,
            k_max,
            n_max,
            list,
        } => {
            let budget = LambdaBudget {
                k_max: *k_max,
                n_max: *n_max,
            };
            let mut count = 0u64;
            let mut best: Option<(u64, LambdaMatrix)> = None;
            for m in enumerate_lambda(*k, *n, budget)? {
                let per = m.permanent_exact();
                if *list {
                    let rows: Vec<Vec<u32>> =
                        (0..*n).map(|i| (0..*n).map(|j| m.get(i, j)).collect()).collect();
                    println!(
                        "{}",
                        serde_json::json!({ "matrix": rows, "permanent": per })
                    );
                }
                count += 1;
                if best.as_ref().map(|(b, _)| per < *b).unwrap_or(true) {
                    best = Some((per, m));
                }
            }
            if *list {
                return Ok(0);
            }
            let (min_per, argmin) =
                best.ok_or_else(|| Error::Numeric("empty enumeration".into()))?;
            let bound = improved_lambda_bound(*k, *n);
            let report = LambdaMinReport {
                k: *k,
                n: *n,
                count,
                min_per,
                argmin,
                bound,
                slack: min_per as f64 - bound,
            };
            emit(cli.format, &report, |r| {
                format!(
                    "count    {}\nmin per  {}\nbound    {:.9}\nslack    {:.3e}\nargmin   {:?}",
                    r.count, r.min_per, r.bound, r.slack, r.argmin.entries
                )
            })?;
            let tol = cli.tol.unwrap_or(1e-9);
            Ok(if report.slack >= -tol { 0 } else { 1 })
        }
        Command::Stability { input, trials } => {
            let p = read_poly(input)?;
            let opts = StabilityOptions {
                trials: *trials,
                tol: cli.tol.unwrap_or(1e-7),
                seed: cli.seed,
            };
            let verdict = h_stable_test(&p, &opts)?;
            emit(cli.format, &verdict, verdict_table)?;
            Ok(0)
        }
        Command::Cascade { input } => {
            let poly = if is_csv(input) {
                read_matrix(input)?.prod_polynomial()?
            } else {
                read_poly(input)?
            };
            let opts = CapacityOptions::with_tol(cli.tol.unwrap_or(1e-10));
            let cascade = build_cascade(&poly, &opts)?;
            let steps = cascade.verify_all_steps()?;
            let report = CascadeReport {
                mixed_partial: cascade.mixed_partial(),
                input_capacity: cascade.input_capacity(),
                schr_product: cascade.schr_product(),
                end_to_end_slack: cascade.mixed_partial()
                    - cascade.input_capacity() * cascade.schr_product(),
                steps,
                cascade,
            };
            emit(cli.format, &report, |r| {
                let mut lines = vec![format!(
                    "mixed partial  {:.12e}\ncapacity       {:.12e}\nG product      {:.12e}\nend-to-end     {:.3e}",
                    r.mixed_partial, r.input_capacity, r.schr_product, r.end_to_end_slack
                )];
                for s in &r.steps {
                    lines.push(format!(
                        "level {}: Cap(q{}) = {:.6e}, factor {:.6}, slack {:.3e}",
                        s.level,
                        s.level - 1,
                        s.cap_upper,
                        s.factor_degree_aware,
                        s.slack_degree_aware
                    ));
                }
                lines.join("\n")
            })?;
            Ok(0)
        }
    }
}

/// `k^n G(k)^(n-k) k!/k^k` evaluated through the exact constants.
fn improved_lambda_bound(k: u32, n: usize) -> f64 {
    let kk = k.min(n as u32);
    let g = polycap::constants::g(kk);
    (k as f64).powi(n as i32) * g.powi(n as i32 - kk as i32) * polycap::constants::vdw(kk)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
