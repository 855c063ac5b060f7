//! Command-line harness: solve catalogued or JSON-described problems,
//! run the seeded verification suites, and tabulate empirical convergence
//! orders.
//!
//! Exit codes: 0 success/converged, 1 configuration or IO error,
//! 2 iteration budget exhausted or identification stalled,
//! 3 transversality failure, 4 verification failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use asnewton::checks;
use asnewton::problems::{build, builtin, default_start, ProblemSpec};
use asnewton::solver::{
    known_active_manifold, restore, run_newton_phase, solve_two_phase, IterateRecord,
    NewtonOptions, SolveStatus, SolverReport,
};

#[derive(Parser)]
#[command(
    name = "asnewton",
    version,
    about = "Two-phase active-set Newton solver for variational inequalities and generalized equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write the iterate trace and a JSON summary.
    Solve(SolveArgs),
    /// Run the seeded verification suites and print a pass/fail table.
    Verify(VerifyArgs),
    /// Convergence-order table for a problem with a known solution.
    Rates(RatesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    /// Built-in name (disk-nlp, sphere-vi, orthant-vi, scalar-root,
    /// subspace-newton, singular-demo) or a path to a problem JSON file.
    #[arg(long)]
    problem: String,
    /// Residual tolerance for the Newton phase.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration budget per phase.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Phase-1 step parameter (the projection map uses step 1/a).
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Seed for problems that are generated randomly.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace output path; defaults to trace.csv or trace.json.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
    format: TraceFormat,
    /// Starting point as comma-separated values (defaults per problem).
    #[arg(long)]
    u0: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: geometry, varcalc, geneq, solver, or all.
    #[arg(default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Self-test hook: deliberately break the derivative-coderivative
    /// equality so the harness demonstrably detects failures.
    #[arg(long, hide = true, default_value_t = false)]
    break_equality: bool,
}

#[derive(Args)]
struct RatesArgs {
    /// Built-in name or problem JSON path; must carry a known solution.
    #[arg(long)]
    problem: String,
    /// Comma-separated starting distances along the active manifold.
    #[arg(long, default_value = "1e-1,1e-2")]
    distances: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Rates(args) => cmd_rates(args),
    }
}

fn load_spec(problem: &str, seed: u64) -> Result<ProblemSpec> {
    let mut spec = match builtin(problem) {
        Ok(spec) => spec,
        Err(_) => {
            let text = fs::read_to_string(problem)
                .with_context(|| format!("cannot read problem file '{problem}'"))?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse problem file '{problem}'"))?
        }
    };
    if spec.seed.is_none() {
        spec.seed = Some(seed);
    }
    Ok(spec)
}

fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .context("cannot parse vector of comma-separated floats")?;
    Ok(DVector::from_vec(values))
}

/// Round-trip exact decimal rendering (17 significant digits).
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn active_set_field(active: &[usize]) -> String {
    active
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn trace_csv(history: &[IterateRecord]) -> String {
    let n = history.first().map_or(0, |r| r.u.len());
    let lam_width = history.iter().map(|r| r.lambda.len()).max().unwrap_or(0);
    let mut out = String::new();
    let mut header = vec!["k".to_string(), "phase".to_string()];
    header.extend((0..n).map(|i| format!("u_{i}")));
    header.extend((0..lam_width).map(|i| format!("lam_{i}")));
    header.extend([
        "residual".to_string(),
        "active_set".to_string(),
        "dist_to_solution".to_string(),
    ]);
    out.push_str(&header.join(","));
    out.push('\n');
    for rec in history {
        let mut row = vec![rec.k.to_string(), rec.phase.as_str().to_string()];
        row.extend(rec.u.iter().map(|v| fmt17(*v)));
        for i in 0..lam_width {
            row.push(rec.lambda.get(i).map(|v| fmt17(*v)).unwrap_or_default());
        }
        row.push(fmt17(rec.residual));
        row.push(active_set_field(&rec.active_set));
        row.push(rec.dist_to_solution.map(fmt17).unwrap_or_default());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn record_json(rec: &IterateRecord) -> serde_json::Value {
    serde_json::json!({
        "k": rec.k,
        "phase": rec.phase.as_str(),
        "u": rec.u.iter().copied().collect::<Vec<f64>>(),
        "lambda": rec.lambda.iter().copied().collect::<Vec<f64>>(),
        "residual": rec.residual,
        "active_set": rec.active_set,
        "dist_to_solution": rec.dist_to_solution,
    })
}

fn summary_json(name: &str, report: &SolverReport) -> serde_json::Value {
    let last = report.history.last();
    serde_json::json!({
        "problem": name,
        "status": report.status.as_str(),
        "iterations": report.history.len(),
        "switch_iteration": report.switch_iteration,
        "fitted_order": report.fitted_order,
        "final_residual": last.map(|r| r.residual),
        "final_u": last.map(|r| r.u.iter().copied().collect::<Vec<f64>>()),
        "dist_to_solution": last.and_then(|r| r.dist_to_solution),
    })
}

fn status_exit(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Converged => ExitCode::from(0),
        SolveStatus::MaxIter | SolveStatus::IdentificationStall => ExitCode::from(2),
        SolveStatus::TransversalityFail => ExitCode::from(3),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    if args.a <= 0.0 {
        return Err(anyhow!("--a must be positive"));
    }
    if args.tol <= 0.0 {
        return Err(anyhow!("--tol must be positive"));
    }
    let spec = load_spec(&args.problem, args.seed)?;
    let problem = build(&spec)?;
    let u0 = match &args.u0 {
        Some(text) => parse_vector(text)?,
        None => default_start(&spec)?,
    };
    let opts = NewtonOptions {
        tol_residual: args.tol,
        max_iter: args.max_iter,
        ..NewtonOptions::default()
    };

    let report = match solve_two_phase(&problem, &u0, args.a, &opts) {
        Ok(report) => report,
        Err(asnewton::Error::SingularLinearization { .. }) => {
            eprintln!("transversality failure before any iterate was recorded");
            return Ok(ExitCode::from(3));
        }
        Err(e) => {
            eprintln!("solver error: {e}");
            return Ok(ExitCode::from(2));
        }
    };

    let output = args.output.unwrap_or_else(|| match args.format {
        TraceFormat::Csv => PathBuf::from("trace.csv"),
        TraceFormat::Json => PathBuf::from("trace.json"),
    });
    let summary = summary_json(&spec.name, &report);
    match args.format {
        TraceFormat::Csv => {
            fs::write(&output, trace_csv(&report.history))
                .with_context(|| format!("cannot write {}", output.display()))?;
        }
        TraceFormat::Json => {
            let doc = serde_json::json!({
                "summary": summary,
                "trace": report.history.iter().map(record_json).collect::<Vec<_>>(),
            });
            fs::write(&output, format!("{doc:#}\n"))
                .with_context(|| format!("cannot write {}", output.display()))?;
        }
    }
    println!("{summary:#}");
    Ok(status_exit(report.status))
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let results = checks::run_suite(&args.suite, args.seed, args.break_equality)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut failures = 0;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{verdict}  {:width$}  {}", r.name, r.detail, width = width);
        if !r.passed {
            failures += 1;
        }
    }
    println!(
        "{} properties, {} passed, {} failed (seed {})",
        results.len(),
        results.len() - failures,
        failures,
        args.seed
    );
    Ok(if failures == 0 {
        ExitCode::from(0)
    } else {
        ExitCode::from(4)
    })
}

fn cmd_rates(args: RatesArgs) -> Result<ExitCode> {
    let spec = load_spec(&args.problem, args.seed)?;
    let problem = build(&spec)?;
    let Some(known) = problem.known_solution.clone() else {
        return Err(anyhow!(
            "problem '{}' has no known solution; rates need one",
            spec.name
        ));
    };
    let manifold = known_active_manifold(&problem)?;
    if manifold.dim() == 0 {
        return Err(anyhow!("the active manifold is a single point"));
    }
    let distances = args
        .distances
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .context("cannot parse --distances")?;
    if distances.iter().any(|&d| d <= 0.0) {
        return Err(anyhow!("--distances must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let opts = NewtonOptions {
        tol_residual: 1e-13,
        max_iter: args.max_iter,
        ..NewtonOptions::default()
    };

    println!(
        "{:>10}  {:>18}  {:>12}  {:>14}",
        "distance", "iters_to_1e-12", "fitted_order", "max_e1_over_e0sq"
    );
    for d in distances {
        let basis = manifold.tangent_basis(&known.u)?;
        let g = DVector::from_fn(basis.ncols(), |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let dir = (&basis * g).normalize();
        // step slightly inside the requested distance so curvature keeps the
        // realized error within the asymptotic fit window
        let trial = &known.u + dir * (0.999 * d);
        let u0 = manifold.project_default(&trial)?;
        let (u_start, lambda0) = restore(&problem, &manifold, &u0)?;
        let report = run_newton_phase(&problem, &manifold, &u_start, &lambda0, &opts)?;

        let errors: Vec<f64> = report
            .history
            .iter()
            .filter_map(|r| r.dist_to_solution)
            .collect();
        let iters = errors.iter().position(|&e| e <= 1e-12);
        let mut max_ratio: Option<f64> = None;
        for w in errors.windows(2) {
            if w[0] > 1e-11 && w[1] > 1e-11 {
                let c = w[1] / (w[0] * w[0]);
                max_ratio = Some(max_ratio.map_or(c, |p: f64| p.max(c)));
            }
        }
        let iters_text = iters.map_or("-".to_string(), |k| k.to_string());
        let order_text = report
            .fitted_order
            .map_or("-".to_string(), |o| format!("{o:.3}"));
        let ratio_text = max_ratio.map_or("-".to_string(), |c| format!("{c:.3e}"));
        println!("{d:>10.1e}  {iters_text:>18}  {order_text:>12}  {ratio_text:>14}");
    }
    Ok(ExitCode::from(0))
}
