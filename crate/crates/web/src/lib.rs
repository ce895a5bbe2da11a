//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON document; the plain Rust functions behind
//! them are usable (and tested) natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use spiral_core::bench::{run_feasibility, FeasMethod, FeasProblem};
use spiral_core::geometry::{Point, DEFAULT_EPS_COL};
use spiral_core::operators::{pi_t, lt_from_window, DouglasRachford, IterateWindow, Operator};
use spiral_core::splitting::{bp_solve, Accel, BasisPursuitInstance, InstanceSpec, SolveOptions};

#[derive(Serialize)]
pub struct Orbit {
    pub points: Vec<[f64; 2]>,
    pub branches: Vec<String>,
    pub converged: bool,
}

#[derive(Serialize)]
pub struct LtConstruction {
    pub x: [f64; 2],
    pub x_plus: [f64; 2],
    pub x_plus_plus: [f64; 2],
    pub reflected: [f64; 2],
    pub pi: Option<[f64; 2]>,
    pub center: [f64; 2],
    pub radius: f64,
    pub branch: String,
}

#[derive(Serialize)]
pub struct Convergence {
    pub method: String,
    pub solved: bool,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub accelerated: Vec<usize>,
}

fn problem(name: &str, param: f64) -> Result<FeasProblem, String> {
    match name {
        "two-lines" => Ok(FeasProblem::TwoLines { theta: param }),
        "circle-line" => Ok(FeasProblem::CircleLine { offset: param }),
        "exp-graph" => Ok(FeasProblem::ExpGraph),
        other => Err(format!("unknown problem {other}")),
    }
}

fn xy(p: &Point) -> [f64; 2] {
    [p[0], p[1]]
}

fn start(x: f64, y: f64) -> Result<Point, String> {
    Point::from_slice(&[x, y]).map_err(|e| e.to_string())
}

pub fn orbit(name: &str, param: f64, method: &str, x: f64, y: f64, max_iter: usize) -> Result<Orbit, String> {
    let p = problem(name, param)?;
    let m = FeasMethod::parse(method).ok_or_else(|| format!("unknown method {method}"))?;
    let (traj, records) = run_feasibility(&p, m, start(x, y)?, max_iter.max(1), 1e-12).map_err(|e| e.to_string())?;
    Ok(Orbit {
        points: traj.points().map(xy).collect(),
        branches: records.into_iter().map(|r| r.branch).collect(),
        converged: traj.converged,
    })
}

pub fn construction(name: &str, param: f64, x: f64, y: f64) -> Result<LtConstruction, String> {
    let (a, b) = problem(name, param)?.sets();
    let t = DouglasRachford::new(a, b);
    let w = IterateWindow::from_operator(&t as &dyn Operator, &start(x, y)?).map_err(|e| e.to_string())?;
    let out = lt_from_window(&w, DEFAULT_EPS_COL);
    let pi = pi_t(&w, 1e-13).ok();
    Ok(LtConstruction {
        x: xy(&w.x),
        x_plus: xy(&w.x_plus),
        x_plus_plus: xy(&w.x_plus_plus),
        reflected: xy(&w.reflected()),
        pi: pi.as_ref().map(xy),
        center: xy(&out.point),
        radius: out.point.dist(&w.x),
        branch: out.branch.as_str().to_string(),
    })
}

pub fn convergence(seed: u64, n: usize, nu: usize, c: f64, max_iter: usize) -> Result<Vec<Convergence>, String> {
    let inst = BasisPursuitInstance::generate(InstanceSpec::new(seed, n, nu, c)).map_err(|e| e.to_string())?;
    Ok([Accel::None, Accel::Lt]
        .into_iter()
        .map(|m| {
            let mut opts = SolveOptions::new(m);
            opts.max_iter = max_iter.max(1);
            opts.record_history = true;
            let r = bp_solve(&inst, &opts);
            Convergence {
                method: m.name().to_string(),
                solved: r.solved,
                iterations: r.iterations,
                residuals: r.history.iter().map(|h| h.primal_residual).collect(),
                accelerated: r.history.iter().filter(|h| h.accelerated).map(|h| h.pass).collect(),
            }
        })
        .collect())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

/// Orbit of `(x, y)` as JSON `{points, branches, converged}`.
#[wasm_bindgen]
pub fn feasibility_orbit(problem: &str, param: f64, method: &str, x: f64, y: f64, max_iter: usize) -> Result<String, JsError> {
    to_js(orbit(problem, param, method, x, y, max_iter))
}

/// The points behind one `L_T` step from `(x, y)`.
#[wasm_bindgen]
pub fn lt_construction(problem: &str, param: f64, x: f64, y: f64) -> Result<String, JsError> {
    to_js(construction(problem, param, x, y))
}

/// Per-pass residual histories of vanilla and `L_T`-accelerated ADMM.
#[wasm_bindgen]
pub fn basis_pursuit_histories(seed: u64, n: usize, nu: usize, c: f64, max_iter: usize) -> Result<String, JsError> {
    to_js(convergence(seed, n, nu, c, max_iter))
}
