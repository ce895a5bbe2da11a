//! Gradients of the Dao-Tam Lyapunov function for graph feasibility
//! problems and numerical checkers for the geometry it induces.
//!
//! For `B = gra f` and `A = X x {0}` the function
//! `V(y, rho) = F(y) + rho^2 / 2` with `F'(y) = f(y) / f'(y)` is a
//! Lyapunov function for the Douglas-Rachford operator `T_{A,B}`. Every
//! checker below returns a normalized residual that vanishes exactly when
//! the corresponding geometric identity holds.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{circumcenter, colinearity_test, project_affine_hull, GeometryError, Point};
use crate::operators::{
    dr_apply, lt_candidate, pi_t, FunctionGraph, IterateWindow, OperatorError, ScalarFn, SetOracle,
    DEFAULT_TOL_FIX,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("f'(y) = 0 while f(y) != 0 at y = {0}")]
    SingularGradient(f64),
    #[error("y = {0} lies outside the domain of the Lyapunov function")]
    OutOfDomain(f64),
    #[error("probe coincides with the surrogate center")]
    DegenerateGradient,
    #[error("expected a point of R^2")]
    NotPlanar,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl From<GeometryError> for LyapunovError {
    fn from(e: GeometryError) -> Self {
        LyapunovError::Operator(e.into())
    }
}

/// `V(y, rho) = F(y) + rho^2 / 2` for the graph of `f` over the domain `D`.
#[derive(Clone, Debug)]
pub struct GraphLyapunov {
    graph: FunctionGraph,
    /// Closed form of `F'` when `f / f'` simplifies.
    closed_form: Option<ScalarFnDebug>,
}

#[derive(Clone)]
struct ScalarFnDebug(ScalarFn);

impl std::fmt::Debug for ScalarFnDebug {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("<fn>")
    }
}

impl GraphLyapunov {
    pub fn new(graph: FunctionGraph) -> Self {
        Self { graph, closed_form: None }
    }

    /// `f(y) = slope * y`, for which `F'(y) = y`.
    pub fn linear(slope: f64) -> Result<Self, LyapunovError> {
        let graph = FunctionGraph::new(move |y| slope * y, move |_| slope, (f64::NEG_INFINITY, f64::INFINITY))?
            .with_second_derivative(|_| 0.0);
        Ok(Self {
            graph,
            closed_form: Some(ScalarFnDebug(Arc::new(|y| y))),
        })
    }

    /// `f(y) = e^y - 1` on the whole line; `F'(y) = 1 - e^{-y}` is increasing.
    pub fn exp_graph() -> Self {
        let graph = FunctionGraph::new(|y: f64| y.exp_m1(), |y: f64| y.exp(), (-50.0, 50.0))
            .expect("valid domain")
            .with_second_derivative(|y: f64| y.exp());
        Self::new(graph)
    }

    pub fn graph(&self) -> &FunctionGraph {
        &self.graph
    }

    /// The set `B = gra f`.
    pub fn graph_set(&self) -> SetOracle {
        SetOracle::Graph(self.graph.clone())
    }

    /// The set `A = X x {0}`.
    pub fn axis_set() -> SetOracle {
        SetOracle::line_at_angle(0.0)
    }

    /// `F'(y)`
    pub fn dual_slope(&self, y: f64) -> Result<f64, LyapunovError> {
        let (lo, hi) = self.graph.domain();
        if !(y >= lo && y <= hi) {
            return Err(LyapunovError::OutOfDomain(y));
        }
        if let Some(cf) = &self.closed_form {
            return Ok((cf.0)(y));
        }
        let fy = self.graph.eval(y);
        if fy == 0.0 {
            return Ok(0.0);
        }
        let dfy = self.graph.derivative(y);
        if dfy == 0.0 {
            return Err(LyapunovError::SingularGradient(y));
        }
        Ok(fy / dfy)
    }
}

fn planar(p: &Point) -> Result<(f64, f64), LyapunovError> {
    if p.dim() != 2 {
        return Err(LyapunovError::NotPlanar);
    }
    Ok((p[0], p[1]))
}

fn point2(a: f64, b: f64) -> Point {
    Point::from_vector(nalgebra::DVector::from_vec(vec![a, b]))
}

/// `grad V(y, rho) = (f(y) / f'(y), rho)`
pub fn grad_v(l: &GraphLyapunov, p: &Point) -> Result<Point, LyapunovError> {
    let (y, rho) = planar(p)?;
    Ok(point2(l.dual_slope(y)?, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckReport {
    pub residual: f64,
    pub passed: bool,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(residual: f64, tolerance: f64) -> Self {
        Self {
            residual,
            passed: residual <= tolerance,
            tolerance,
        }
    }

    /// The worse of two reports.
    pub fn max(self, other: CheckReport) -> CheckReport {
        CheckReport::new(self.residual.max(other.residual), self.tolerance.min(other.tolerance))
    }
}

fn orthogonality(g: &Point, d: &Point) -> f64 {
    g.dot(d).abs() / ((1.0 + g.norm()) * (1.0 + d.norm()))
}

/// Tangency `<grad V(Tp), p - Tp> = 0` of a Douglas-Rachford step.
pub fn check_spiraling(
    l: &GraphLyapunov,
    a: &SetOracle,
    b: &SetOracle,
    p: &Point,
    tol: f64,
) -> Result<CheckReport, LyapunovError> {
    let tp = dr_apply(a, b, p)?;
    let g = grad_v(l, &tp)?;
    Ok(CheckReport::new(orthogonality(&g, &(p - &tp)), tol))
}

/// The four bisector inclusions relating gradients of `V` to DR substeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BisectorCase {
    /// `T_{A,B} p` on `H(p, R_B R_A p)`
    TAB,
    /// `P_A p` on `H(p, R_A p)`
    PA,
    /// `P_B p` on `H(p, R_B p)`
    PB,
    /// `T_{B,A} p` on `H(p, R_A R_B p)`
    TBA,
}

impl BisectorCase {
    pub const ALL: [BisectorCase; 4] = [BisectorCase::TAB, BisectorCase::PA, BisectorCase::PB, BisectorCase::TBA];
}

/// Checks that `q - mu grad V(q)` stays on the bisector `H(p, r)` for every
/// `mu`, i.e. that `q` lies on it and `grad V(q)` is orthogonal to `p - r`.
pub fn check_bisector_theorem(
    l: &GraphLyapunov,
    a: &SetOracle,
    b: &SetOracle,
    p: &Point,
    which: BisectorCase,
    tol: f64,
) -> Result<CheckReport, LyapunovError> {
    let (q, r) = match which {
        BisectorCase::TAB => {
            let r = b.reflect(&a.reflect(p)?)?;
            (r.midpoint(p), r)
        }
        BisectorCase::PA => (a.project(p)?, a.reflect(p)?),
        BisectorCase::PB => (b.project(p)?, b.reflect(p)?),
        BisectorCase::TBA => {
            let r = a.reflect(&b.reflect(p)?)?;
            (r.midpoint(p), r)
        }
    };
    let u = p - &r;
    let g = grad_v(l, &q)?;
    let tangency = orthogonality(&g, &u);
    let un = u.norm();
    let membership = if un == 0.0 {
        0.0
    } else {
        (&q - p.midpoint(&r)).dot(&u).abs() / (un * (1.0 + q.norm()))
    };
    Ok(CheckReport::new(tangency.max(membership), tol))
}

/// Parallelism of the hull-projected gradient of `V` at `probe` with the
/// gradient `2 (probe - center)` of the spherical surrogate centered at
/// `candidate_center`, measured as a normalized rejection norm.
pub fn check_mss_parallelism(
    l: &GraphLyapunov,
    triple: (&Point, &Point, &Point),
    candidate_center: &Point,
    probe: &Point,
    tol: f64,
) -> Result<CheckReport, LyapunovError> {
    let g = (probe - candidate_center) * 2.0;
    let gg = g.norm_squared();
    if gg == 0.0 {
        return Err(LyapunovError::DegenerateGradient);
    }
    let hull = [triple.0.clone(), triple.1.clone(), triple.2.clone()];
    let w = project_affine_hull(&grad_v(l, probe)?, &hull)?;
    let rejection = &w - &g * (w.dot(&g) / gg);
    Ok(CheckReport::new(rejection.norm() / (1.0 + w.norm()), tol))
}

/// Surrogate geometry of one `L_T` step for `T = T_{A,B}`.
#[derive(Debug, Clone)]
pub struct LtSurrogate {
    pub window: IterateWindow,
    pub pi: Point,
    pub center: Point,
}

impl LtSurrogate {
    pub fn build(a: &SetOracle, b: &SetOracle, p: &Point, eps_col: f64) -> Result<Option<Self>, LyapunovError> {
        let x_plus = dr_apply(a, b, p)?;
        let x_plus_plus = dr_apply(a, b, &x_plus)?;
        let window = IterateWindow::new(p.clone(), x_plus, x_plus_plus)?;
        let Some(center) = lt_candidate(&window, eps_col) else {
            return Ok(None);
        };
        let pi = pi_t(&window, DEFAULT_TOL_FIX)?;
        Ok(Some(Self { window, pi, center }))
    }

    /// Reports for the fit points `x+` and `x++`.
    pub fn check(&self, l: &GraphLyapunov, tol: f64) -> Result<[CheckReport; 2], LyapunovError> {
        let refl = self.window.reflected();
        let triple = (&self.window.x, &refl, &self.pi);
        Ok([
            check_mss_parallelism(l, triple, &self.center, &self.window.x_plus, tol)?,
            check_mss_parallelism(l, triple, &self.center, &self.window.x_plus_plus, tol)?,
        ])
    }
}

/// Surrogate geometry of one circumcentered-reflection step with the
/// reflections taken through `first` then `second`.
#[derive(Debug, Clone)]
pub struct CrmSurrogate {
    pub x: Point,
    pub r_first: Point,
    pub r_second_first: Point,
    pub center: Point,
    /// `T x`, `P_first x` and `P_second R_first x`.
    pub probes: [Point; 3],
}

impl CrmSurrogate {
    pub fn build(first: &SetOracle, second: &SetOracle, p: &Point, eps_col: f64) -> Result<Option<Self>, LyapunovError> {
        let r1 = first.reflect(p)?;
        let p2 = second.project(&r1)?;
        let r21 = &p2 * 2.0 - &r1;
        if colinearity_test(p, &r1, &r21, eps_col)?.is_colinear {
            return Ok(None);
        }
        let center = match circumcenter(p, &r1, &r21, eps_col) {
            Ok(c) => c,
            Err(GeometryError::Colinear) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let probes = [r21.midpoint(p), first.project(p)?, p2];
        Ok(Some(Self {
            x: p.clone(),
            r_first: r1,
            r_second_first: r21,
            center,
            probes,
        }))
    }

    /// Parallelism reports at the three probes. In the plane these say the
    /// circumcenter is reached by a gradient step on `V` from each probe.
    pub fn check(&self, l: &GraphLyapunov, tol: f64) -> Result<[CheckReport; 3], LyapunovError> {
        let triple = (&self.x, &self.r_second_first, &self.r_first);
        let mut out = [CheckReport::new(0.0, tol); 3];
        for (slot, probe) in out.iter_mut().zip(&self.probes) {
            *slot = check_mss_parallelism(l, triple, &self.center, probe, tol)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonEquivalence {
    pub newton_step: f64,
    pub gradient_step: Point,
    pub residual: f64,
}

/// Compares a Newton-Raphson step on `f` with the unit gradient step on `V` from `(y, 0)`.
pub fn newton_equivalence(l: &GraphLyapunov, y: f64) -> Result<NewtonEquivalence, LyapunovError> {
    let fy = l.graph.eval(y);
    let dfy = l.graph.derivative(y);
    if dfy == 0.0 {
        return Err(LyapunovError::SingularGradient(y));
    }
    let newton_step = y - fy / dfy;
    let x = point2(y, 0.0);
    let gradient_step = &x - grad_v(l, &x)?;
    let residual = (newton_step - gradient_step[0]).abs() + gradient_step[1].abs();
    Ok(NewtonEquivalence {
        newton_step,
        gradient_step,
        residual,
    })
}

/// Named planar instances with a known Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphInstance {
    /// `A` the first axis, `B` the line through the origin at angle `theta`.
    TwoLines { theta: f64 },
    /// `A` the first axis, `B` the graph of `e^y - 1`.
    ExpGraph,
}

impl GraphInstance {
    pub fn parse(name: &str, theta: f64) -> Option<Self> {
        match name {
            "two-lines" => Some(Self::TwoLines { theta }),
            "exp-graph" => Some(Self::ExpGraph),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TwoLines { .. } => "two-lines",
            Self::ExpGraph => "exp-graph",
        }
    }

    pub fn lyapunov(&self) -> GraphLyapunov {
        match self {
            Self::TwoLines { theta } => GraphLyapunov::linear(theta.tan()).expect("finite slope"),
            Self::ExpGraph => GraphLyapunov::exp_graph(),
        }
    }

    pub fn sets(&self) -> (SetOracle, SetOracle) {
        let b = match self {
            Self::TwoLines { theta } => SetOracle::line_at_angle(*theta),
            Self::ExpGraph => self.lyapunov().graph_set(),
        };
        (GraphLyapunov::axis_set(), b)
    }

    /// Box `[-2, 2]^2` of sample points.
    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        point2(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Checker {
    Spiraling,
    Bisectors,
    Mss,
    Newton,
}

impl Checker {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "spiraling" => Some(Self::Spiraling),
            "bisectors" => Some(Self::Bisectors),
            "mss" => Some(Self::Mss),
            "newton" => Some(Self::Newton),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub instance: String,
    pub checker: Checker,
    pub samples: usize,
    /// Individual residuals evaluated (several per sample for some checkers).
    pub evaluations: usize,
    /// Samples whose construction was degenerate (colinear triple).
    pub skipped: usize,
    pub failures: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Runs `checker` at `samples` random points of the instance's sample box.
pub fn run_sweep(
    instance: GraphInstance,
    checker: Checker,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<SweepSummary, LyapunovError> {
    let l = instance.lyapunov();
    let (a, b) = instance.sets();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = SweepSummary {
        instance: instance.name().to_string(),
        checker,
        samples,
        evaluations: 0,
        skipped: 0,
        failures: 0,
        max_residual: 0.0,
        tolerance: tol,
    };
    let record = |s: &mut SweepSummary, r: CheckReport| {
        s.evaluations += 1;
        s.max_residual = s.max_residual.max(r.residual);
        if !r.passed {
            s.failures += 1;
        }
    };
    let eps_col = crate::geometry::DEFAULT_EPS_COL;
    for _ in 0..samples {
        let p = instance.sample(&mut rng);
        match checker {
            Checker::Spiraling => record(&mut summary, check_spiraling(&l, &a, &b, &p, tol)?),
            Checker::Bisectors => {
                for case in BisectorCase::ALL {
                    record(&mut summary, check_bisector_theorem(&l, &a, &b, &p, case, tol)?);
                }
            }
            Checker::Mss => {
                let mut any = false;
                if let Some(s) = LtSurrogate::build(&a, &b, &p, eps_col)? {
                    any = true;
                    for r in s.check(&l, tol)? {
                        record(&mut summary, r);
                    }
                }
                for (first, second) in [(&a, &b), (&b, &a)] {
                    if let Some(s) = CrmSurrogate::build(first, second, &p, eps_col)? {
                        any = true;
                        for r in s.check(&l, tol)? {
                            record(&mut summary, r);
                        }
                    }
                }
                if !any {
                    summary.skipped += 1;
                }
            }
            Checker::Newton => {
                let y = p[0];
                match newton_equivalence(&l, y) {
                    Ok(n) => record(&mut summary, CheckReport::new(n.residual, tol)),
                    Err(LyapunovError::SingularGradient(_)) => summary.skipped += 1,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(summary)
}
