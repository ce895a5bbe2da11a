//! ADMM with `M = Id`, reconstruction of the dual Douglas-Rachford
//! sequence from primal iterates, and dual accelerators (`L_T` and the
//! circumcentered-reflection variant) screened by an objective check.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{circumcenter, colinearity_test, Point, DEFAULT_EPS_COL};
use crate::operators::{lt_candidate, shrinkage, AffineSystem, IterateWindow, OperatorError, SetOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplittingError {
    #[error("accelerator triple is colinear; proceed with the regular update")]
    ColinearSkip,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// A problem `min f(x) + g(z)` s.t. `x = z` solved by ADMM with penalty `c`.
pub trait AdmmProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn penalty(&self) -> f64;

    /// `argmin_x f(x) + <lambda, x - z> + c/2 |x - z|^2`
    fn x_update(&self, z: &Point, lambda: &Point) -> Point;

    /// `argmin_z g(z) + <lambda, x - z> + c/2 |x - z|^2`
    fn z_update(&self, x: &Point, lambda: &Point) -> Point;

    fn objective(&self, x: &Point) -> f64;

    /// `prox_{c d_2}` with `d_2 = g*`.
    fn d2_prox(&self, y: &Point) -> Point;
}

/// `minimize |x|_1 subject to A x = b`, split as `f = indicator of S`,
/// `g = |.|_1`.
#[derive(Debug, Clone)]
pub struct BasisPursuit {
    affine: AffineSystem,
    c: f64,
}

impl BasisPursuit {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self, SplittingError> {
        if !c.is_finite() || c <= 0.0 {
            return Err(SplittingError::InvalidInstance(format!("penalty c = {c}")));
        }
        if a.nrows() >= a.ncols() {
            return Err(SplittingError::InvalidInstance(format!(
                "need fewer constraints than unknowns, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self {
            affine: AffineSystem::new(a, b)?,
            c,
        })
    }

    pub fn affine(&self) -> &AffineSystem {
        &self.affine
    }

    /// The feasible set `S = {x : A x = b}`.
    pub fn feasible_set(&self) -> SetOracle {
        SetOracle::Affine(self.affine.clone())
    }

    pub fn constraint_residual(&self, x: &Point) -> f64 {
        self.affine.residual(x)
    }
}

impl AdmmProblem for BasisPursuit {
    fn dim(&self) -> usize {
        self.affine.ambient_dim()
    }

    fn penalty(&self) -> f64 {
        self.c
    }

    fn x_update(&self, z: &Point, lambda: &Point) -> Point {
        self.affine.project(&z.axpy(-1.0 / self.c, lambda))
    }

    fn z_update(&self, x: &Point, lambda: &Point) -> Point {
        shrinkage(&x.axpy(1.0 / self.c, lambda), 1.0 / self.c)
    }

    fn objective(&self, x: &Point) -> f64 {
        x.l1_norm()
    }

    fn d2_prox(&self, y: &Point) -> Point {
        y.map(|v| v.clamp(-1.0, 1.0))
    }
}

/// Random instance parameters: `A` has i.i.d. standard normal entries and
/// `b = A x_true`, where `x_true` has `nnz` standard normal entries at
/// uniformly chosen positions (all `n` when `nnz` is `None`). Everything is
/// drawn from ChaCha8 seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub seed: u64,
    pub n: usize,
    pub nu: usize,
    pub c: f64,
    pub nnz: Option<usize>,
}

impl InstanceSpec {
    pub fn new(seed: u64, n: usize, nu: usize, c: f64) -> Self {
        Self { seed, n, nu, c, nnz: None }
    }

    pub fn with_nnz(self, nnz: usize) -> Self {
        Self { nnz: Some(nnz), ..self }
    }
}

#[derive(Debug, Clone)]
pub struct BasisPursuitInstance {
    pub spec: InstanceSpec,
    pub problem: BasisPursuit,
    pub x_true: Point,
}

impl BasisPursuitInstance {
    pub fn generate(spec: InstanceSpec) -> Result<Self, SplittingError> {
        let InstanceSpec { seed, n, nu, c, nnz } = spec;
        if nu == 0 || nu >= n {
            return Err(SplittingError::InvalidInstance(format!("need 0 < nu < n, got nu = {nu}, n = {n}")));
        }
        let k = nnz.unwrap_or(n);
        if k == 0 || k > n {
            return Err(SplittingError::InvalidInstance(format!("need 0 < nnz <= n, got nnz = {k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_row_iterator(nu, n, (0..nu * n).map(|_| StandardNormal.sample(&mut rng)));
        let mut x_true = DVector::zeros(n);
        for i in index::sample(&mut rng, n, k) {
            x_true[i] = StandardNormal.sample(&mut rng);
        }
        let b = &a * &x_true;
        Ok(Self {
            spec,
            problem: BasisPursuit::new(a, b, c)?,
            x_true: Point::from_vector(x_true),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Point,
    pub z: Point,
    pub lambda: Point,
    pub k: usize,
}

impl AdmmState {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: Point::zeros(n),
            z: Point::zeros(n),
            lambda: Point::zeros(n),
            k: 0,
        }
    }

    /// Dual Douglas-Rachford iterate `y_k = lambda_k + c z_k`.
    pub fn dual(&self, c: f64) -> DualPoint {
        DualPoint(self.lambda.axpy(c, &self.z))
    }
}

/// One pass of the x-, z- and multiplier updates.
pub fn admm_step(prob: &dyn AdmmProblem, s: &AdmmState) -> AdmmState {
    let c = prob.penalty();
    let x = prob.x_update(&s.z, &s.lambda);
    let z = prob.z_update(&x, &s.lambda);
    let lambda = s.lambda.axpy(c, &(&x - &z));
    AdmmState { x, z, lambda, k: s.k + 1 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint(pub Point);

/// The dual iterate with its two reflected substeps.
#[derive(Debug, Clone, PartialEq)]
pub struct DualReconstruction {
    /// `y_k = lambda_k + c z_k`
    pub y: DualPoint,
    /// `R_{c d_2} y_k = lambda_k - c z_k`
    pub r2: Point,
    /// `R_{c d_1} R_{c d_2} y_k = lambda_k - c z_k + 2 c x_{k+1}`
    pub r12: Point,
}

/// Recovers the dual sequence and its substeps from state `k` and the
/// primal update `x_{k+1}` computed from it.
pub fn reconstruct_dual(s: &AdmmState, x_next: &Point, c: f64) -> DualReconstruction {
    let y = s.dual(c);
    let r2 = s.lambda.axpy(-c, &s.z);
    let r12 = r2.axpy(2.0 * c, x_next);
    DualReconstruction { y, r2, r12 }
}

/// `L_T` applied to three successive dual iterates.
pub fn lt_dual_step(window: (&Point, &Point, &Point), eps_col: f64) -> Result<Point, SplittingError> {
    let w = IterateWindow::new(window.0.clone(), window.1.clone(), window.2.clone())?;
    lt_candidate(&w, eps_col).ok_or(SplittingError::ColinearSkip)
}

/// Circumcenter of `(y_k, R_{cd_2} y_k, R_{cd_1} R_{cd_2} y_k)`.
pub fn ct_dual_step(d: &DualReconstruction, eps_col: f64) -> Result<Point, SplittingError> {
    let y = &d.y.0;
    if colinearity_test(y, &d.r2, &d.r12, eps_col).map_err(OperatorError::from)?.is_colinear {
        return Err(SplittingError::ColinearSkip);
    }
    circumcenter(y, &d.r2, &d.r12, eps_col).map_err(|_| SplittingError::ColinearSkip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelReason {
    ObjectiveImproved,
    ColinearSkip,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccelDecision {
    pub candidate_objective: f64,
    pub regular_objective: f64,
    pub accepted: bool,
    pub reason: AccelReason,
}

impl AccelDecision {
    pub fn skipped() -> Self {
        Self {
            candidate_objective: f64::NAN,
            regular_objective: f64::NAN,
            accepted: false,
            reason: AccelReason::ColinearSkip,
        }
    }
}

/// Screens a dual candidate against the regular update.
///
/// The candidate multiplier is the shadow `prox_{c d_2}(y)`, the matching
/// `z` is `(y - lambda) / c`, and the next primal iterate is compared with
/// the regular one by objective value. Ties accept the candidate. The
/// returned state carries the winning `(z, lambda)`; its `x` is left as is
/// since the next pass recomputes it.
/// State induced by a dual candidate: `lambda = prox_{c d_2}(y)`, `z = (y - lambda) / c`.
pub fn candidate_state(prob: &dyn AdmmProblem, s: &AdmmState, candidate_y: &Point) -> AdmmState {
    let lambda = prob.d2_prox(candidate_y);
    let z = (candidate_y - &lambda) * (1.0 / prob.penalty());
    AdmmState { x: s.x.clone(), z, lambda, k: s.k }
}

pub fn accel_accept(prob: &dyn AdmmProblem, s: &AdmmState, candidate_y: &Point) -> (AccelDecision, AdmmState) {
    let regular_x = prob.x_update(&s.z, &s.lambda);
    let cand = candidate_state(prob, s, candidate_y);
    let cand_x = prob.x_update(&cand.z, &cand.lambda);
    let candidate_objective = prob.objective(&cand_x);
    let regular_objective = prob.objective(&regular_x);
    let accepted = candidate_objective <= regular_objective;
    let decision = AccelDecision {
        candidate_objective,
        regular_objective,
        accepted,
        reason: if accepted {
            AccelReason::ObjectiveImproved
        } else {
            AccelReason::Rejected
        },
    };
    let state = if accepted {
        cand
    } else {
        s.clone()
    };
    (decision, state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accel {
    None,
    Lt,
    Ct,
}

impl Accel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Self::None),
            "lt" => Some(Self::Lt),
            "ct" => Some(Self::Ct),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Lt => "lt",
            Self::Ct => "ct",
        }
    }

    /// Default pass cap: the circumcentered arm is only run to demonstrate failure.
    pub fn default_cap(self) -> usize {
        match self {
            Self::Ct => 100_000,
            _ => 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub accel: Accel,
    pub max_iter: usize,
    pub tol: f64,
    /// Passes between acceleration attempts; each attempt uses the last three dual iterates.
    pub cadence: usize,
    pub eps_col: f64,
    /// Accept a candidate only if it does not increase the objective. Off by
    /// default for the circumcentered arm, which applies its update as is.
    pub objective_check: bool,
    pub record_history: bool,
}

impl SolveOptions {
    pub fn new(accel: Accel) -> Self {
        Self {
            accel,
            max_iter: accel.default_cap(),
            tol: 1e-8,
            cadence: 3,
            eps_col: DEFAULT_EPS_COL,
            objective_check: accel != Accel::Ct,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    IterationCapExceeded,
}

/// Per-pass diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassRecord {
    pub pass: usize,
    pub primal_residual: f64,
    pub objective: f64,
    pub accelerated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub accel: Accel,
    pub status: SolveStatus,
    pub solved: bool,
    /// Passes through the x-, z- and multiplier updates.
    pub iterations: usize,
    pub objective: f64,
    pub accel_attempts: usize,
    pub accel_accepted: usize,
    pub objective_evals: usize,
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<PassRecord>,
}

fn solve_test(s: &AdmmState, z_prev: &Point, tol: f64) -> bool {
    let sqrt_n = (s.x.dim() as f64).sqrt();
    let primal = s.z.dist(&s.x);
    let dual = s.z.dist(z_prev);
    primal < tol * (sqrt_n + s.x.norm().max(s.z.norm())) && dual < tol * (sqrt_n + s.lambda.norm())
}

/// Runs ADMM from zero, optionally accelerating the dual sequence.
pub fn admm_solve(prob: &dyn AdmmProblem, opts: &SolveOptions) -> SolveResult {
    let c = prob.penalty();
    let mut state = AdmmState::zeros(prob.dim());
    let mut window: VecDeque<Point> = VecDeque::with_capacity(4);
    window.push_back(state.dual(c).0);
    let mut since = 0;
    let mut attempts = 0;
    let mut accepted = 0;
    let mut history = Vec::new();
    let mut solved = false;
    let mut passes = 0;
    let cadence = opts.cadence.max(1);

    while passes < opts.max_iter {
        let next = admm_step(prob, &state);
        passes += 1;
        since += 1;
        let done = solve_test(&next, &state.z, opts.tol);
        state = next;
        let mut accelerated = false;
        if !done {
            window.push_back(state.dual(c).0);
            if window.len() > 3 {
                window.pop_front();
            }
            if opts.accel != Accel::None && since >= cadence && window.len() == 3 {
                attempts += 1;
                let candidate = match opts.accel {
                    Accel::Lt => lt_dual_step((&window[0], &window[1], &window[2]), opts.eps_col),
                    Accel::Ct => {
                        let x_next = prob.x_update(&state.z, &state.lambda);
                        ct_dual_step(&reconstruct_dual(&state, &x_next, c), opts.eps_col)
                    }
                    Accel::None => unreachable!(),
                };
                if let Ok(y) = candidate {
                    if opts.objective_check {
                        let (decision, new_state) = accel_accept(prob, &state, &y);
                        if decision.accepted {
                            accepted += 1;
                            accelerated = true;
                            state = new_state;
                        }
                    } else {
                        accepted += 1;
                        accelerated = true;
                        state = candidate_state(prob, &state, &y);
                    }
                }
                window.clear();
                window.push_back(state.dual(c).0);
                since = 0;
            }
        }
        if opts.record_history {
            history.push(PassRecord {
                pass: passes,
                primal_residual: state.z.dist(&state.x),
                objective: prob.objective(&state.x),
                accelerated,
            });
        }
        if done {
            solved = true;
            break;
        }
    }
    SolveResult {
        accel: opts.accel,
        status: if solved {
            SolveStatus::Solved
        } else {
            SolveStatus::IterationCapExceeded
        },
        solved,
        iterations: passes,
        objective: prob.objective(&state.x),
        accel_attempts: attempts,
        accel_accepted: accepted,
        objective_evals: if opts.objective_check { 2 * attempts } else { 0 },
        x: state.x.to_vec(),
        history,
    }
}

pub fn bp_solve(inst: &BasisPursuitInstance, opts: &SolveOptions) -> SolveResult {
    admm_solve(&inst.problem, opts)
}
