//! Projection, reflection and prox oracles, the Douglas-Rachford operator,
//! the generalized circumcentered-reflection operator and the
//! surrogate-minimizing operator `L_T`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{circumcenter, colinearity_test, GeometryError, Point};

/// Relative tolerance used to decide that `x++ = x+` inside `pi_t`.
pub const DEFAULT_TOL_FIX: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point coincides with the sphere center; the projection is not unique")]
    SphereCenterAmbiguity,
    #[error("iteration reached a fixed point (x++ = x+)")]
    FixedPoint,
    #[error("iterate left the finite range at step {0}")]
    NonFinite(usize),
    #[error("matrix does not have full row rank")]
    RankDeficient,
    #[error("{0}")]
    InvalidArgument(String),
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The graph `{(y, f(y)) : y in domain}` of a scalar function in `R^2`.
#[derive(Clone)]
pub struct FunctionGraph {
    f: ScalarFn,
    df: ScalarFn,
    d2f: Option<ScalarFn>,
    domain: (f64, f64),
    grid: usize,
}

impl fmt::Debug for FunctionGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionGraph").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl FunctionGraph {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self, OperatorError> {
        if domain.0.is_nan() || domain.1.is_nan() || domain.0 >= domain.1 {
            return Err(OperatorError::InvalidArgument(format!("empty domain {domain:?}")));
        }
        Ok(Self {
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: None,
            domain,
            grid: 64,
        })
    }

    pub fn with_second_derivative(mut self, d2f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d2f = Some(Arc::new(d2f));
        self
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.f)(y)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        (self.df)(y)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn second_derivative(&self, y: f64) -> f64 {
        match &self.d2f {
            Some(d2) => d2(y),
            None => {
                let h = 1e-6 * (1.0 + y.abs());
                ((self.df)(y + h) - (self.df)(y - h)) / (2.0 * h)
            }
        }
    }

    /// Nearest point of the graph to `(v1, v2)`.
    ///
    /// Any minimizer lies within `r = |v - (v1, f(v1))|` of `v1` along the
    /// first axis, so `[v1 - r, v1 + r]` (clipped to the domain) is scanned
    /// on a grid, the best cell is refined by safeguarded Newton on the
    /// stationarity condition, and golden-section search takes over when
    /// the cell does not bracket a sign change. Ties resolve to the first
    /// grid minimum.
    pub fn nearest(&self, v1: f64, v2: f64) -> (f64, f64) {
        let (lo, hi) = self.domain;
        let phi = |t: f64| {
            let dy = (self.f)(t) - v2;
            (t - v1) * (t - v1) + dy * dy
        };
        let t0 = v1.clamp(lo, hi);
        let r = phi(t0).sqrt();
        if r == 0.0 {
            return (t0, (self.f)(t0));
        }
        let a = (v1 - r).max(lo);
        let b = (v1 + r).min(hi);
        if a.is_nan() || b.is_nan() || a >= b {
            return (t0, (self.f)(t0));
        }
        let n = self.grid;
        let step = (b - a) / n as f64;
        let mut best_i = 0;
        let mut best_phi = f64::INFINITY;
        for i in 0..=n {
            let t = if i == n { b } else { a + step * i as f64 };
            let v = phi(t);
            if v < best_phi {
                best_phi = v;
                best_i = i;
            }
        }
        let cell_lo = (a + step * best_i.saturating_sub(1) as f64).max(a);
        let cell_hi = (a + step * (best_i + 1) as f64).min(b);
        let grid_t = if best_i == n { b } else { a + step * best_i as f64 };
        let refined = self.refine(v1, v2, cell_lo, cell_hi);
        let t = if phi(refined) <= best_phi { refined } else { grid_t };
        (t, (self.f)(t))
    }

    fn dphi(&self, t: f64, v1: f64, v2: f64) -> f64 {
        2.0 * (t - v1) + 2.0 * ((self.f)(t) - v2) * (self.df)(t)
    }

    fn d2phi(&self, t: f64, v2: f64) -> f64 {
        let d = (self.df)(t);
        2.0 + 2.0 * d * d + 2.0 * ((self.f)(t) - v2) * self.second_derivative(t)
    }

    fn refine(&self, v1: f64, v2: f64, mut lo: f64, mut hi: f64) -> f64 {
        let g_lo = self.dphi(lo, v1, v2);
        let g_hi = self.dphi(hi, v1, v2);
        if g_lo < 0.0 && g_hi > 0.0 {
            let mut t = 0.5 * (lo + hi);
            for _ in 0..200 {
                let g = self.dphi(t, v1, v2);
                if g == 0.0 {
                    return t;
                }
                if g < 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
                let h = self.d2phi(t, v2);
                let newton = t - g / h;
                let next = if h > 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
                if (next - t).abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
                    return next;
                }
                t = next;
            }
            t
        } else {
            golden_section(
                |t| {
                    let dy = (self.f)(t) - v2;
                    (t - v1) * (t - v1) + dy * dy
                },
                lo,
                hi,
            )
        }
    }
}

fn golden_section(phi: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    for _ in 0..200 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = phi(d);
        }
    }
    [a, b, c, d]
        .into_iter()
        .min_by(|x, y| phi(*x).total_cmp(&phi(*y)))
        .unwrap_or(a)
}

/// `{x in R^n : A x = b}` with a cached Cholesky factor of `A A^T`.
#[derive(Clone)]
pub struct AffineSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
}

impl fmt::Debug for AffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineSystem")
            .field("rows", &self.a.nrows())
            .field("cols", &self.a.ncols())
            .finish_non_exhaustive()
    }
}

impl AffineSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, OperatorError> {
        if a.nrows() != b.len() {
            return Err(OperatorError::InvalidArgument(format!(
                "A has {} rows but b has length {}",
                a.nrows(),
                b.len()
            )));
        }
        if a.nrows() == 0 || a.nrows() > a.ncols() {
            return Err(OperatorError::RankDeficient);
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(OperatorError::Geometry(GeometryError::NonFinite));
        }
        let aat = &a * a.transpose();
        let gram = Cholesky::new(aat).ok_or(OperatorError::RankDeficient)?;
        // Cholesky of a numerically singular Gram matrix can still succeed
        let diag = gram.l_dirty().diagonal();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if min.is_nan() || min <= 1e-10 * max {
            return Err(OperatorError::RankDeficient);
        }
        Ok(Self { a, b, gram })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn ambient_dim(&self) -> usize {
        self.a.ncols()
    }

    /// `v - A^T (A A^T)^{-1} (A v - b)`
    pub fn project(&self, v: &Point) -> Point {
        let r = &self.a * v.vector() - &self.b;
        let w = self.gram.solve(&r);
        Point::from_vector(v.vector() - self.a.tr_mul(&w))
    }

    pub fn residual(&self, v: &Point) -> f64 {
        (&self.a * v.vector() - &self.b).norm()
    }
}

/// A set with a (selected) nearest-point projection.
#[derive(Debug, Clone)]
pub enum SetOracle {
    /// `{x : <normal, x> = offset}`
    Hyperplane { normal: Point, offset: f64 },
    /// `anchor + R direction`; `direction` is stored with unit norm.
    Line { anchor: Point, direction: Point },
    Affine(AffineSystem),
    Sphere { center: Point, radius: f64 },
    /// The unit ball of the max-norm.
    InfBall { dim: usize },
    Graph(FunctionGraph),
}

impl SetOracle {
    pub fn hyperplane(normal: Point, offset: f64) -> Result<Self, OperatorError> {
        if normal.norm() == 0.0 {
            return Err(OperatorError::InvalidArgument("zero hyperplane normal".into()));
        }
        Ok(Self::Hyperplane { normal, offset })
    }

    pub fn line(anchor: Point, direction: Point) -> Result<Self, OperatorError> {
        anchor.check_dim(&direction)?;
        let n = direction.norm();
        if n == 0.0 {
            return Err(OperatorError::InvalidArgument("zero line direction".into()));
        }
        Ok(Self::Line {
            anchor,
            direction: direction * (1.0 / n),
        })
    }

    /// Line through the origin of `R^2` making angle `theta` with the first axis
    /// (slope `tan(theta)`).
    pub fn line_at_angle(theta: f64) -> Self {
        Self::Line {
            anchor: Point::zeros(2),
            direction: Point::from_vector(DVector::from_vec(vec![theta.cos(), theta.sin()])),
        }
    }

    pub fn sphere(center: Point, radius: f64) -> Result<Self, OperatorError> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(OperatorError::InvalidArgument(format!("sphere radius {radius}")));
        }
        Ok(Self::Sphere { center, radius })
    }

    pub fn inf_ball(dim: usize) -> Self {
        Self::InfBall { dim }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Hyperplane { normal, .. } => normal.dim(),
            Self::Line { anchor, .. } => anchor.dim(),
            Self::Affine(s) => s.ambient_dim(),
            Self::Sphere { center, .. } => center.dim(),
            Self::InfBall { dim } => *dim,
            Self::Graph(_) => 2,
        }
    }

    fn check(&self, p: &Point) -> Result<(), OperatorError> {
        let d = self.ambient_dim();
        if p.dim() != d {
            return Err(GeometryError::DimensionMismatch { expected: d, found: p.dim() }.into());
        }
        Ok(())
    }

    /// Projection onto the set. At the center of a sphere every point of
    /// the sphere is nearest; the selector returns `center + r e_1`.
    pub fn project(&self, p: &Point) -> Result<Point, OperatorError> {
        match self.project_unique(p) {
            Err(OperatorError::SphereCenterAmbiguity) => match self {
                Self::Sphere { center, radius } => Ok(center.axpy(*radius, &Point::unit(center.dim(), 0))),
                _ => unreachable!(),
            },
            other => other,
        }
    }

    /// Like [`project`](Self::project) but reports the sphere-center ambiguity.
    pub fn project_unique(&self, p: &Point) -> Result<Point, OperatorError> {
        self.check(p)?;
        Ok(match self {
            Self::Hyperplane { normal, offset } => {
                let t = (normal.dot(p) - offset) / normal.norm_squared();
                p.axpy(-t, normal)
            }
            Self::Line { anchor, direction } => {
                let t = (p - anchor).dot(direction);
                anchor.axpy(t, direction)
            }
            Self::Affine(s) => s.project(p),
            Self::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    return Err(OperatorError::SphereCenterAmbiguity);
                }
                center.axpy(radius / n, &d)
            }
            Self::InfBall { .. } => p.map(|c| c.clamp(-1.0, 1.0)),
            Self::Graph(g) => {
                let (t, ft) = g.nearest(p[0], p[1]);
                Point::from_vector(DVector::from_vec(vec![t, ft]))
            }
        })
    }

    pub fn reflect(&self, p: &Point) -> Result<Point, OperatorError> {
        Ok(self.project(p)? * 2.0 - p)
    }

    /// Distance from `p` to the set (through the selected projection).
    pub fn distance(&self, p: &Point) -> Result<f64, OperatorError> {
        Ok(self.project(p)?.dist(p))
    }
}

/// Proximity operators of `c * h` for the functions used by the splitting methods.
#[derive(Debug, Clone)]
pub enum ProxKind {
    /// `h = indicator of S`; the prox is the projection.
    IndicatorOf(SetOracle),
    /// `h = ||.||_1`; the prox is soft thresholding by `c`.
    L1Norm,
    /// `h = indicator of the unit max-norm ball` (conjugate of the 1-norm).
    SupportConjugateBox,
    /// `h(w) = sigma_S(-w)`, the conjugate of the indicator of `S` composed
    /// with negation; by Moreau, `prox_{c h}(w) = w + c P_S(-w / c)`.
    NegatedSupportOf(SetOracle),
}

#[derive(Debug, Clone)]
pub struct ProxOracle {
    pub kind: ProxKind,
    pub scale: f64,
}

impl ProxOracle {
    pub fn new(kind: ProxKind, scale: f64) -> Result<Self, OperatorError> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(OperatorError::InvalidArgument(format!("prox scale {scale}")));
        }
        Ok(Self { kind, scale })
    }

    pub fn prox(&self, p: &Point) -> Result<Point, OperatorError> {
        match &self.kind {
            ProxKind::IndicatorOf(s) => s.project(p),
            ProxKind::L1Norm => Ok(shrinkage(p, self.scale)),
            ProxKind::SupportConjugateBox => Ok(p.map(|c| c.clamp(-1.0, 1.0))),
            ProxKind::NegatedSupportOf(s) => {
                let c = self.scale;
                Ok(p + s.project(&(p * (-1.0 / c)))? * c)
            }
        }
    }

    pub fn reflect(&self, p: &Point) -> Result<Point, OperatorError> {
        Ok(self.prox(p)? * 2.0 - p)
    }
}

/// Componentwise soft thresholding `sign(v) max(|v| - kappa, 0)`.
pub fn shrinkage(v: &Point, kappa: f64) -> Point {
    v.map(|c| c.signum() * (c.abs() - kappa).max(0.0))
}

/// Anything with a resolvent: projections of sets or proxes of functions.
pub trait Resolvent: Send + Sync {
    fn resolve(&self, p: &Point) -> Result<Point, OperatorError>;

    fn reflect_through(&self, p: &Point) -> Result<Point, OperatorError> {
        Ok(self.resolve(p)? * 2.0 - p)
    }
}

impl Resolvent for SetOracle {
    fn resolve(&self, p: &Point) -> Result<Point, OperatorError> {
        self.project(p)
    }
}

impl Resolvent for ProxOracle {
    fn resolve(&self, p: &Point) -> Result<Point, OperatorError> {
        self.prox(p)
    }
}

pub fn project(s: &SetOracle, p: &Point) -> Result<Point, OperatorError> {
    s.project(p)
}

pub fn reflect(s: &SetOracle, p: &Point) -> Result<Point, OperatorError> {
    s.reflect(p)
}

/// Douglas-Rachford step `(R_B R_A p + p) / 2`.
pub fn dr_apply(a: &dyn Resolvent, b: &dyn Resolvent, p: &Point) -> Result<Point, OperatorError> {
    let ra = a.reflect_through(p)?;
    let rbra = b.reflect_through(&ra)?;
    Ok(rbra.midpoint(p))
}

/// A single-valued operator `T: E -> E`.
pub trait Operator: Send + Sync {
    fn apply(&self, p: &Point) -> Result<Point, OperatorError>;
}

impl<F> Operator for F
where
    F: Fn(&Point) -> Result<Point, OperatorError> + Send + Sync,
{
    fn apply(&self, p: &Point) -> Result<Point, OperatorError> {
        self(p)
    }
}

/// The Douglas-Rachford operator `T_{A,B}`.
pub struct DouglasRachford<A, B> {
    pub a: A,
    pub b: B,
}

impl<A: Resolvent, B: Resolvent> DouglasRachford<A, B> {
    pub fn new(a: A, b: B) -> Self {
        Self { a, b }
    }

    /// Shadow point `P_A p`.
    pub fn shadow(&self, p: &Point) -> Result<Point, OperatorError> {
        self.a.resolve(p)
    }
}

impl<A: Resolvent, B: Resolvent> Operator for DouglasRachford<A, B> {
    fn apply(&self, p: &Point) -> Result<Point, OperatorError> {
        dr_apply(&self.a, &self.b, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// A plain application of the underlying operator.
    Base,
    Circumcenter,
    ColinearFallback,
    FixedPointDetected,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Base => "base",
            Branch::Circumcenter => "circumcenter",
            Branch::ColinearFallback => "colinear_fallback",
            Branch::FixedPointDetected => "fixed_point_detected",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub point: Point,
    pub branch: Branch,
}

/// Generalized circumcentered reflection step.
///
/// Falls back to the Douglas-Rachford step when `p, R_A p, R_B R_A p` are
/// colinear, and flags `R_B R_A p = p != R_A p` (then `P_A p` solves the
/// feasibility problem).
pub fn crm_apply(a: &SetOracle, b: &SetOracle, p: &Point, eps_col: f64) -> Result<StepOutcome, OperatorError> {
    let ra = a.reflect(p)?;
    let rbra = b.reflect(&ra)?;
    let dr = rbra.midpoint(p);
    let tol = DEFAULT_TOL_FIX * (1.0 + p.norm());
    if rbra.dist(p) <= tol && ra.dist(p) > tol {
        return Ok(StepOutcome { point: dr, branch: Branch::FixedPointDetected });
    }
    if colinearity_test(p, &ra, &rbra, eps_col)?.is_colinear {
        return Ok(StepOutcome { point: dr, branch: Branch::ColinearFallback });
    }
    match circumcenter(p, &ra, &rbra, eps_col) {
        Ok(c) => Ok(StepOutcome { point: c, branch: Branch::Circumcenter }),
        Err(GeometryError::Colinear) => Ok(StepOutcome { point: dr, branch: Branch::ColinearFallback }),
        Err(e) => Err(e.into()),
    }
}

/// Three successive iterates `(x, Tx, T^2 x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateWindow {
    pub x: Point,
    pub x_plus: Point,
    pub x_plus_plus: Point,
}

impl IterateWindow {
    pub fn new(x: Point, x_plus: Point, x_plus_plus: Point) -> Result<Self, OperatorError> {
        x.check_dim(&x_plus)?;
        x.check_dim(&x_plus_plus)?;
        Ok(Self { x, x_plus, x_plus_plus })
    }

    pub fn from_operator(op: &dyn Operator, x: &Point) -> Result<Self, OperatorError> {
        let x_plus = op.apply(x)?;
        let x_plus_plus = op.apply(&x_plus)?;
        Self::new(x.clone(), x_plus, x_plus_plus)
    }

    /// The reflected point `2 x+ - x`.
    pub fn reflected(&self) -> Point {
        &self.x_plus * 2.0 - &self.x
    }
}

/// Auxiliary point `2(x++ - x+) + 2 P_{span(x++ - x+)}(x+ - x) + x`.
pub fn pi_t(w: &IterateWindow, tol_fix: f64) -> Result<Point, OperatorError> {
    let d = &w.x_plus_plus - &w.x_plus;
    let dd = d.norm_squared();
    if d.norm() <= tol_fix * (1.0 + w.x_plus.norm()) || dd == 0.0 {
        return Err(OperatorError::FixedPoint);
    }
    let s = (&w.x_plus - &w.x).dot(&d) / dd;
    Ok(&w.x + d * (2.0 + 2.0 * s))
}

/// Circumcenter of `(x, 2x+ - x, pi_T x)`, or `None` when the triple is
/// colinear or the window has already stalled.
pub fn lt_candidate(w: &IterateWindow, eps_col: f64) -> Option<Point> {
    let pi = pi_t(w, DEFAULT_TOL_FIX).ok()?;
    let refl = w.reflected();
    match colinearity_test(&w.x, &refl, &pi, eps_col) {
        Ok(r) if !r.is_colinear => circumcenter(&w.x, &refl, &pi, eps_col).ok(),
        _ => None,
    }
}

/// One step of `L_T` built from `x`, `Tx` and `T^2 x`; falls back to `Tx`.
pub fn lt_apply(op: &dyn Operator, p: &Point, eps_col: f64) -> Result<StepOutcome, OperatorError> {
    let w = IterateWindow::from_operator(op, p)?;
    Ok(lt_from_window(&w, eps_col))
}

pub fn lt_from_window(w: &IterateWindow, eps_col: f64) -> StepOutcome {
    match lt_candidate(w, eps_col) {
        Some(point) => StepOutcome { point, branch: Branch::Circumcenter },
        None => StepOutcome { point: w.x_plus.clone(), branch: Branch::ColinearFallback },
    }
}

/// One step of an iterative method, annotated with the branch taken.
pub trait Stepper: Send + Sync {
    fn step(&self, p: &Point) -> Result<StepOutcome, OperatorError>;
}

/// Plain iteration of an operator.
pub struct BaseStepper<T>(pub T);

impl<T: Operator> Stepper for BaseStepper<T> {
    fn step(&self, p: &Point) -> Result<StepOutcome, OperatorError> {
        Ok(StepOutcome { point: self.0.apply(p)?, branch: Branch::Base })
    }
}

pub struct CrmStepper {
    pub a: SetOracle,
    pub b: SetOracle,
    pub eps_col: f64,
}

impl Stepper for CrmStepper {
    fn step(&self, p: &Point) -> Result<StepOutcome, OperatorError> {
        crm_apply(&self.a, &self.b, p, self.eps_col)
    }
}

pub struct LtStepper<T> {
    pub op: T,
    pub eps_col: f64,
}

impl<T: Operator> Stepper for LtStepper<T> {
    fn step(&self, p: &Point) -> Result<StepOutcome, OperatorError> {
        lt_apply(&self.op, p, self.eps_col)
    }
}

pub type StopFn = Box<dyn Fn(&Point, &Point) -> bool + Send + Sync>;

pub enum StopRule {
    /// Stop once `|x_{k+1} - x_k| <= tol`.
    StepNorm(f64),
    /// Stop once the predicate holds for `(x_k, x_{k+1})`.
    Custom(StopFn),
}

impl StopRule {
    fn fires(&self, prev: &Point, next: &Point) -> bool {
        match self {
            StopRule::StepNorm(tol) => next.dist(prev) <= *tol,
            StopRule::Custom(f) => f(prev, next),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub point: Point,
    /// `None` for the starting point.
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub converged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> &Point {
        &self.steps.last().expect("trajectory holds its starting point").point
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.steps.iter().map(|s| &s.point)
    }
}

/// Records the orbit of `p0` under `stepper`.
///
/// A step whose result satisfies the stop rule ends the run and is not
/// recorded, so a method that lands on a fixed point contributes that
/// point exactly once.
pub fn iterate(
    stepper: &dyn Stepper,
    p0: Point,
    max_iter: usize,
    stop: &StopRule,
) -> Result<Trajectory, OperatorError> {
    if max_iter == 0 {
        return Err(OperatorError::InvalidArgument("max_iter must be at least 1".into()));
    }
    let mut steps = vec![TrajectoryStep { point: p0, branch: None }];
    for k in 1..=max_iter {
        let cur = &steps.last().unwrap().point;
        let out = stepper.step(cur)?;
        if !out.point.is_finite() {
            return Err(OperatorError::NonFinite(k));
        }
        if stop.fires(cur, &out.point) {
            return Ok(Trajectory { steps, converged: true });
        }
        steps.push(TrajectoryStep { point: out.point, branch: Some(out.branch) });
    }
    Ok(Trajectory { steps, converged: false })
}
