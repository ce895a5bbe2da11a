//! Experiment plumbing: feasibility problem registry, trajectory CSV
//! records, batch benchmarks of the basis pursuit solvers and their
//! order statistics.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Point, DEFAULT_EPS_COL};
use crate::operators::{
    iterate, BaseStepper, CrmStepper, DouglasRachford, LtStepper, OperatorError, SetOracle, StopRule, Stepper,
    Trajectory,
};
use crate::splitting::{bp_solve, Accel, BasisPursuitInstance, InstanceSpec, SolveOptions, SplittingError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Splitting(#[from] SplittingError),
    #[error("malformed trajectory CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Planar feasibility problems `find x in A ∩ B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeasProblem {
    /// `A` the first axis, `B` the line at angle `theta` through the origin.
    TwoLines { theta: f64 },
    /// `A` the horizontal line at height `offset`, `B` the unit circle.
    CircleLine { offset: f64 },
    /// `A` the first axis, `B` the graph of `e^y - 1`.
    ExpGraph,
}

impl FeasProblem {
    pub fn sets(&self) -> (SetOracle, SetOracle) {
        match *self {
            FeasProblem::TwoLines { theta } => (SetOracle::line_at_angle(0.0), SetOracle::line_at_angle(theta)),
            FeasProblem::CircleLine { offset } => (
                SetOracle::line(point2(0.0, offset), point2(1.0, 0.0)).expect("unit direction"),
                SetOracle::sphere(Point::zeros(2), 1.0).expect("positive radius"),
            ),
            FeasProblem::ExpGraph => (
                SetOracle::line_at_angle(0.0),
                crate::lyapunov::GraphLyapunov::exp_graph().graph_set(),
            ),
        }
    }
}

fn point2(a: f64, b: f64) -> Point {
    Point::from_vector(nalgebra::DVector::from_vec(vec![a, b]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasMethod {
    Dr,
    Crm,
    Lt,
}

impl FeasMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dr" => Some(Self::Dr),
            "crm" => Some(Self::Crm),
            "lt" => Some(Self::Lt),
            _ => None,
        }
    }
}

pub fn stepper_for(problem: &FeasProblem, method: FeasMethod) -> Box<dyn Stepper> {
    let (a, b) = problem.sets();
    match method {
        FeasMethod::Dr => Box::new(BaseStepper(DouglasRachford::new(a, b))),
        FeasMethod::Crm => Box::new(CrmStepper { a, b, eps_col: DEFAULT_EPS_COL }),
        FeasMethod::Lt => Box::new(LtStepper {
            op: DouglasRachford::new(a, b),
            eps_col: DEFAULT_EPS_COL,
        }),
    }
}

/// Runs a feasibility method and attaches the shadow `P_A x` to every iterate.
pub fn run_feasibility(
    problem: &FeasProblem,
    method: FeasMethod,
    x0: Point,
    max_iter: usize,
    tol: f64,
) -> Result<(Trajectory, Vec<TrajectoryRecord>), BenchError> {
    let stepper = stepper_for(problem, method);
    let traj = iterate(stepper.as_ref(), x0, max_iter, &StopRule::StepNorm(tol))?;
    let (a, _) = problem.sets();
    let records = traj
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(TrajectoryRecord {
                iter: i,
                coords: s.point.to_vec(),
                branch: s.branch.map_or("start", |b| b.as_str()).to_string(),
                shadow: Some(a.project(&s.point)?.to_vec()),
            })
        })
        .collect::<Result<Vec<_>, OperatorError>>()?;
    Ok((traj, records))
}

/// One CSV row of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub iter: usize,
    pub coords: Vec<f64>,
    pub branch: String,
    pub shadow: Option<Vec<f64>>,
}

/// Header `iter,coord_0,...,branch,shadow_0,...`. Values use the shortest
/// decimal representation that parses back to the same `f64`.
pub fn write_trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let dim = records.first().map_or(0, |r| r.coords.len());
    let shadow_dim = records.first().and_then(|r| r.shadow.as_ref()).map_or(0, |s| s.len());
    let mut out = String::from("iter");
    for i in 0..dim {
        let _ = write!(out, ",coord_{i}");
    }
    out.push_str(",branch");
    for i in 0..shadow_dim {
        let _ = write!(out, ",shadow_{i}");
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}", r.iter);
        for c in &r.coords {
            let _ = write!(out, ",{c:?}");
        }
        let _ = write!(out, ",{}", r.branch);
        if let Some(s) = &r.shadow {
            for c in s {
                let _ = write!(out, ",{c:?}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRecord>, BenchError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(BenchError::Csv { line: 1, reason: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = cols.iter().filter(|c| c.starts_with("coord_")).count();
    let shadow_dim = cols.iter().filter(|c| c.starts_with("shadow_")).count();
    if cols.first() != Some(&"iter") || cols.get(dim + 1) != Some(&"branch") {
        return Err(BenchError::Csv { line: 1, reason: format!("unexpected header {header:?}") });
    }
    let num = |s: &str, line: usize| {
        s.parse::<f64>().map_err(|e| BenchError::Csv { line, reason: e.to_string() })
    };
    lines
        .enumerate()
        .map(|(i, l)| {
            let line = i + 2;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 2 + dim + shadow_dim {
                return Err(BenchError::Csv { line, reason: format!("expected {} fields", 2 + dim + shadow_dim) });
            }
            let iter = f[0].parse().map_err(|e: std::num::ParseIntError| BenchError::Csv { line, reason: e.to_string() })?;
            let coords = f[1..=dim].iter().map(|s| num(s, line)).collect::<Result<_, _>>()?;
            let shadow = if shadow_dim > 0 {
                Some(f[dim + 2..].iter().map(|s| num(s, line)).collect::<Result<_, _>>()?)
            } else {
                None
            };
            Ok(TrajectoryRecord { iter, coords, branch: f[dim + 1].to_string(), shadow })
        })
        .collect()
}

/// Linear-interpolation quantile (`q` in `[0, 1]`) of unsorted data.
pub fn quantile(data: &[f64], q: f64) -> f64 {
    assert!(!data.is_empty(), "quantile of an empty sample");
    let mut v = data.to_vec();
    let h = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, lo_val, upper) = v.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return lo_val;
    }
    let hi_val = upper.iter().cloned().fold(f64::INFINITY, f64::min);
    lo_val + frac * (hi_val - lo_val)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchStats {
    pub method: String,
    /// Instances on which the method used the fewest passes; ties split evenly.
    pub wins: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub solved_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: Accel,
    pub iterations: usize,
    pub solved: bool,
    pub objective: f64,
    pub accel_attempts: usize,
    pub accel_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub seed: u64,
    pub outcomes: Vec<MethodOutcome>,
    pub winners: Vec<Accel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub instances: usize,
    pub n: usize,
    pub nu: usize,
    pub c: f64,
    pub nnz: Option<usize>,
    pub seed_base: u64,
    pub stats: Vec<BenchStats>,
    pub rows: Vec<InstanceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub instances: usize,
    pub n: usize,
    pub nu: usize,
    pub c: f64,
    pub nnz: Option<usize>,
    pub seed_base: u64,
    pub methods: Vec<Accel>,
    /// Overrides each method's default pass cap.
    pub max_iter: Option<usize>,
}

/// Solves one instance with every requested method.
pub fn run_instance(spec: InstanceSpec, methods: &[Accel], max_iter: Option<usize>) -> Result<InstanceRow, BenchError> {
    let inst = BasisPursuitInstance::generate(spec)?;
    let outcomes: Vec<MethodOutcome> = methods
        .iter()
        .map(|&m| {
            let mut opts = SolveOptions::new(m);
            if let Some(cap) = max_iter {
                opts.max_iter = cap;
            }
            let r = bp_solve(&inst, &opts);
            MethodOutcome {
                method: m,
                iterations: r.iterations,
                solved: r.solved,
                objective: r.objective,
                accel_attempts: r.accel_attempts,
                accel_accepted: r.accel_accepted,
            }
        })
        .collect();
    let winners = winners(&outcomes);
    Ok(InstanceRow { seed: spec.seed, outcomes, winners })
}

/// Methods with the fewest passes among those that solved; unsolved runs
/// never win unless nothing solved, in which case all methods tie.
fn winners(outcomes: &[MethodOutcome]) -> Vec<Accel> {
    let best = outcomes.iter().filter(|o| o.solved).map(|o| o.iterations).min();
    match best {
        Some(b) => outcomes.iter().filter(|o| o.solved && o.iterations == b).map(|o| o.method).collect(),
        None => outcomes.iter().map(|o| o.method).collect(),
    }
}

/// Runs the batch on the global rayon pool. Rows are ordered by seed, so the
/// report does not depend on scheduling.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.methods.is_empty() {
        return Err(BenchError::Invalid("no methods requested".into()));
    }
    let rows: Vec<InstanceRow> = (0..cfg.instances as u64)
        .into_par_iter()
        .map(|i| {
            let spec = InstanceSpec { seed: cfg.seed_base + i, n: cfg.n, nu: cfg.nu, c: cfg.c, nnz: cfg.nnz };
            run_instance(spec, &cfg.methods, cfg.max_iter)
        })
        .collect::<Result<_, _>>()?;
    let stats = summarize(&cfg.methods, &rows);
    Ok(BenchReport {
        instances: cfg.instances,
        n: cfg.n,
        nu: cfg.nu,
        c: cfg.c,
        nnz: cfg.nnz,
        seed_base: cfg.seed_base,
        stats,
        rows,
    })
}

pub fn summarize(methods: &[Accel], rows: &[InstanceRow]) -> Vec<BenchStats> {
    methods
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let iters: Vec<f64> = rows.iter().map(|r| r.outcomes[j].iterations as f64).collect();
            let wins = rows
                .iter()
                .filter(|r| r.winners.contains(&m))
                .map(|r| 1.0 / r.winners.len() as f64)
                .sum();
            let solved_count = rows.iter().filter(|r| r.outcomes[j].solved).count();
            let q = |p| if iters.is_empty() { f64::NAN } else { quantile(&iters, p) };
            BenchStats {
                method: m.name().to_string(),
                wins,
                min: q(0.0),
                q1: q(0.25),
                median: q(0.5),
                q3: q(0.75),
                max: q(1.0),
                solved_count,
            }
        })
        .collect()
}
