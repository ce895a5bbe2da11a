//! `spiral`: feasibility trajectories, Lyapunov checks and basis pursuit
//! benchmarks from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 iteration cap exceeded,
//! 3 a Lyapunov check failed.

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spiral_core::bench::{run_bench, run_feasibility, write_trajectory_csv, BenchConfig, FeasMethod, FeasProblem};
use spiral_core::geometry::Point;
use spiral_core::lyapunov::{run_sweep, Checker, GraphInstance};
use spiral_core::splitting::{bp_solve, Accel, BasisPursuitInstance, InstanceSpec, SolveOptions, SolveResult};

const EXIT_USAGE: u8 = 1;
const EXIT_CAP: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "spiral", version, about = "Spiraling splitting methods and their circumcentered accelerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a planar feasibility method and write its trajectory as CSV.
    Feas(FeasArgs),
    /// Sweep a Lyapunov checker over random points of a graph instance.
    Check(CheckArgs),
    /// Basis pursuit by ADMM with optional dual acceleration.
    Bp {
        #[command(subcommand)]
        mode: BpMode,
    },
}

#[derive(Args)]
struct FeasArgs {
    /// two-lines, circle-line or exp-graph
    #[arg(long)]
    problem: String,
    /// Angle between the two lines (two-lines only).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    theta: f64,
    /// Height of the horizontal line (circle-line only).
    #[arg(long, default_value_t = 0.5)]
    offset: f64,
    /// dr, crm or lt
    #[arg(long)]
    method: String,
    #[arg(long, default_value = "1,1")]
    x0: String,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct CheckArgs {
    /// two-lines or exp-graph
    #[arg(long)]
    instance: String,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    theta: f64,
    /// spiraling, bisectors, mss or newton
    #[arg(long)]
    checker: String,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    nu: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Nonzeros in the planted solution; all `n` when omitted.
    #[arg(long)]
    nnz: Option<usize>,
    /// Comma-separated subset of none, lt, ct.
    #[arg(long, default_value = "lt")]
    accel: String,
    /// Pass cap; defaults to 1e6 (1e5 for ct).
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Subcommand)]
enum BpMode {
    /// Solve one instance with each requested method.
    Solve {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: InstanceArgs,
    },
    /// Solve a batch of instances and report order statistics.
    Bench {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed_base: u64,
        #[command(flatten)]
        common: InstanceArgs,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn write_out(path: &str, content: &str) -> Result<(), Failure> {
    if path == "-" {
        io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| Failure { code: EXIT_USAGE, message: format!("writing stdout: {e}") })
    } else {
        fs::write(path, content).map_err(|e| usage(format!("writing {path}: {e}")))
    }
}

fn parse_point(s: &str) -> Result<Point, Failure> {
    let coords = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| usage(format!("bad coordinate {t:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Point::new(coords).map_err(|e| usage(format!("bad point {s:?}: {e}")))
}

fn parse_accels(s: &str) -> Result<Vec<Accel>, Failure> {
    s.split(',')
        .map(|t| Accel::parse(t.trim()).ok_or_else(|| usage(format!("unknown accelerator {t:?}; expected none, lt or ct"))))
        .collect()
}

fn cmd_feas(a: FeasArgs) -> Result<(), Failure> {
    let problem = match a.problem.as_str() {
        "two-lines" => FeasProblem::TwoLines { theta: a.theta },
        "circle-line" => FeasProblem::CircleLine { offset: a.offset },
        "exp-graph" => FeasProblem::ExpGraph,
        other => return Err(usage(format!("unknown problem {other:?}; expected two-lines, circle-line or exp-graph"))),
    };
    if !a.theta.is_finite() || !a.offset.is_finite() {
        return Err(usage("theta and offset must be finite"));
    }
    let method = FeasMethod::parse(&a.method)
        .ok_or_else(|| usage(format!("unknown method {:?}; expected dr, crm or lt", a.method)))?;
    let x0 = parse_point(&a.x0)?;
    if x0.dim() != 2 {
        return Err(usage(format!("x0 must have 2 coordinates, got {}", x0.dim())));
    }
    if a.max_iter == 0 || a.tol.is_nan() || a.tol < 0.0 {
        return Err(usage("max-iter must be positive and tol non-negative"));
    }
    let (traj, records) =
        run_feasibility(&problem, method, x0, a.max_iter, a.tol).map_err(|e| usage(e.to_string()))?;
    write_out(&a.out, &write_trajectory_csv(&records))?;
    if traj.converged {
        Ok(())
    } else {
        Err(Failure { code: EXIT_CAP, message: format!("no convergence within {} iterations", a.max_iter) })
    }
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    let instance = GraphInstance::parse(&a.instance, a.theta)
        .ok_or_else(|| usage(format!("unknown instance {:?}; expected two-lines or exp-graph", a.instance)))?;
    let checker = Checker::parse(&a.checker)
        .ok_or_else(|| usage(format!("unknown checker {:?}; expected spiraling, bisectors, mss or newton", a.checker)))?;
    if let GraphInstance::TwoLines { theta } = instance {
        if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
            return Err(usage("theta must lie in (0, pi/2)"));
        }
    }
    let s = run_sweep(instance, checker, a.samples, a.seed, a.tol).map_err(|e| usage(e.to_string()))?;
    println!("instance   checker    samples  evaluations  skipped  failures  max_residual  tolerance  result");
    println!(
        "{:<10} {:<10} {:>7}  {:>11}  {:>7}  {:>8}  {:>12.3e}  {:>9.1e}  {}",
        s.instance,
        a.checker,
        s.samples,
        s.evaluations,
        s.skipped,
        s.failures,
        s.max_residual,
        s.tolerance,
        if s.passed() { "pass" } else { "FAIL" }
    );
    if s.passed() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_CHECK_FAILED, message: format!("{} of {} evaluations failed", s.failures, s.evaluations) })
    }
}

#[derive(Serialize)]
struct SolveRecord {
    instance: InstanceSpec,
    runs: Vec<SolveResult>,
}

fn check_instance(c: &InstanceArgs) -> Result<(), Failure> {
    if c.nu == 0 || c.nu >= c.n {
        return Err(usage(format!("need 0 < nu < n, got nu = {}, n = {}", c.nu, c.n)));
    }
    if !(c.c > 0.0 && c.c.is_finite()) {
        return Err(usage("c must be positive"));
    }
    if c.max_iter == Some(0) {
        return Err(usage("max-iter must be positive"));
    }
    Ok(())
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("records serialize");
    s.push('\n');
    s
}

fn cmd_bp(mode: BpMode) -> Result<(), Failure> {
    match mode {
        BpMode::Solve { seed, common } => {
            check_instance(&common)?;
            let methods = parse_accels(&common.accel)?;
            let spec = InstanceSpec { seed, n: common.n, nu: common.nu, c: common.c, nnz: common.nnz };
            let inst = BasisPursuitInstance::generate(spec).map_err(|e| usage(e.to_string()))?;
            let runs: Vec<SolveResult> = methods
                .iter()
                .map(|&m| {
                    let mut opts = SolveOptions::new(m);
                    if let Some(cap) = common.max_iter {
                        opts.max_iter = cap;
                    }
                    bp_solve(&inst, &opts)
                })
                .collect();
            let capped: Vec<&str> = runs.iter().filter(|r| !r.solved).map(|r| r.accel.name()).collect();
            write_out(&common.out, &to_json(&SolveRecord { instance: spec, runs }))?;
            if capped.is_empty() {
                Ok(())
            } else {
                Err(Failure { code: EXIT_CAP, message: format!("iteration cap exceeded: {}", capped.join(", ")) })
            }
        }
        BpMode::Bench { instances, seed_base, common } => {
            check_instance(&common)?;
            let cfg = BenchConfig {
                instances,
                n: common.n,
                nu: common.nu,
                c: common.c,
                nnz: common.nnz,
                seed_base,
                methods: parse_accels(&common.accel)?,
                max_iter: common.max_iter,
            };
            let report = run_bench(&cfg).map_err(|e| usage(e.to_string()))?;
            write_out(&common.out, &to_json(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Feas(a) => cmd_feas(a),
        Command::Check(a) => cmd_check(a),
        Command::Bp { mode } => cmd_bp(mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spiral: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
