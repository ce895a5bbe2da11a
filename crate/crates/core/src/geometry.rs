//! Small-scale Euclidean geometry: points, perpendicular bisectors,
//! circumcenters of three points and projections onto affine hulls.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative threshold below which a triangle counts as degenerate.
pub const DEFAULT_EPS_COL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("points are distinct and colinear")]
    Colinear,
    #[error("dimension mismatch: {expected} vs {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point has a non-finite coordinate")]
    NonFinite,
    #[error("points must have dimension at least 1")]
    Empty,
    #[error("bisector anchors coincide")]
    DegenerateBisector,
}

/// A point of the Euclidean space `R^d`.
///
/// Arithmetic between points of different dimension panics; the public
/// operations of this crate check dimensions first and report
/// [`GeometryError::DimensionMismatch`].
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Point(DVector<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::Empty);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self(DVector::from_vec(coords)))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self, GeometryError> {
        Self::new(coords.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    /// The `i`-th standard basis vector of `R^dim`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        Self(v)
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point((&self.0 + &other.0) * 0.5)
    }

    /// `self + t * dir`
    pub fn axpy(&self, t: f64, dir: &Point) -> Point {
        Point(&self.0 + &dir.0 * t)
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Point {
        Point(self.0.map(f))
    }

    pub(crate) fn check_dim(&self, other: &Point) -> Result<(), GeometryError> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            })
        }
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Point").field(&self.0.as_slice()).finish()
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0.as_slice().to_vec()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Point::new(v)
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Point> for &Point {
            type Output = Point;
            fn $method(self, rhs: &Point) -> Point {
                Point(&self.0 $op &rhs.0)
            }
        }
        impl $trait<Point> for Point {
            type Output = Point;
            fn $method(self, rhs: Point) -> Point {
                Point(self.0 $op rhs.0)
            }
        }
        impl $trait<&Point> for Point {
            type Output = Point;
            fn $method(self, rhs: &Point) -> Point {
                Point(self.0 $op &rhs.0)
            }
        }
        impl $trait<Point> for &Point {
            type Output = Point;
            fn $method(self, rhs: Point) -> Point {
                Point(&self.0 $op rhs.0)
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);

impl Mul<f64> for &Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point(&self.0 * rhs)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point(self.0 * rhs)
    }
}

impl Mul<&Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: &Point) -> Point {
        Point(&rhs.0 * self)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: Point) -> Point {
        Point(rhs.0 * self)
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(-&self.0)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(-self.0)
    }
}

impl AddAssign<&Point> for Point {
    fn add_assign(&mut self, rhs: &Point) {
        self.0 += &rhs.0;
    }
}

/// The perpendicular bisector `H(y, z)` of the segment joining two distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisector {
    y: Point,
    z: Point,
}

impl Bisector {
    pub fn new(y: Point, z: Point) -> Result<Self, GeometryError> {
        y.check_dim(&z)?;
        if y == z {
            return Err(GeometryError::DegenerateBisector);
        }
        Ok(Self { y, z })
    }

    pub fn anchor_y(&self) -> &Point {
        &self.y
    }

    pub fn anchor_z(&self) -> &Point {
        &self.z
    }

    pub fn midpoint(&self) -> Point {
        self.y.midpoint(&self.z)
    }

    /// The normal direction `y - z`.
    pub fn normal(&self) -> Point {
        &self.y - &self.z
    }

    /// Signed offset `<p - (y+z)/2, y - z>`; zero exactly on the bisector.
    pub fn offset(&self, p: &Point) -> f64 {
        (p - self.midpoint()).dot(&self.normal())
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        bisector_contains(self, p, tol)
    }
}

/// Membership test `|<p - m, y - z>| <= tol * |y - z| * (1 + |p|)`.
pub fn bisector_contains(h: &Bisector, p: &Point, tol: f64) -> bool {
    if h.y.check_dim(p).is_err() {
        return false;
    }
    h.offset(p).abs() <= tol * h.normal().norm() * (1.0 + p.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColinearityReport {
    pub is_colinear: bool,
    /// Determinant of the Gram matrix of two edge vectors (four times the squared area).
    pub triangle_gram_det: f64,
    /// Product of the two largest squared edge lengths.
    pub scale: f64,
}

/// Vertex shared by the two longest edges, followed by the other two.
fn pivot_order<'a>(a: &'a Point, b: &'a Point, c: &'a Point) -> (&'a Point, &'a Point, &'a Point, f64, f64) {
    let ab = a.dist(b).powi(2);
    let bc = b.dist(c).powi(2);
    let ca = c.dist(a).powi(2);
    // the shortest edge is opposite the pivot
    if ab <= bc && ab <= ca {
        (c, a, b, ca, bc)
    } else if bc <= ab && bc <= ca {
        (a, b, c, ab, ca)
    } else {
        (b, c, a, bc, ab)
    }
}

/// Relative colinearity test for three points.
///
/// The Gram determinant is taken at the vertex shared by the two longest
/// edges and compared to the product of their squared lengths, so the
/// ratio is the squared sine of the smallest angle and the verdict does
/// not depend on argument order. Coincident points report colinear.
pub fn colinearity_test(
    a: &Point,
    b: &Point,
    c: &Point,
    eps_col: f64,
) -> Result<ColinearityReport, GeometryError> {
    a.check_dim(b)?;
    a.check_dim(c)?;
    let (p, q, r, _, _) = pivot_order(a, b, c);
    let u = q - p;
    let v = r - p;
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    let uv = u.dot(&v);
    let det = (uu * vv - uv * uv).max(0.0);
    let scale = uu * vv;
    Ok(ColinearityReport {
        is_colinear: det <= eps_col * scale,
        triangle_gram_det: det,
        scale,
    })
}

/// Point of `aff{a, b, c}` equidistant from `a`, `b` and `c`.
///
/// One distinct point returns it, two distinct points return their
/// midpoint. Three distinct colinear points have no circumcenter and
/// yield [`GeometryError::Colinear`].
pub fn circumcenter(a: &Point, b: &Point, c: &Point, eps_col: f64) -> Result<Point, GeometryError> {
    a.check_dim(b)?;
    a.check_dim(c)?;
    if a == b && b == c {
        return Ok(a.clone());
    }
    if a == b || a == c {
        let other = if a == b { c } else { b };
        return Ok(a.midpoint(other));
    }
    if b == c {
        return Ok(a.midpoint(b));
    }
    let report = colinearity_test(a, b, c, eps_col)?;
    if report.is_colinear {
        return Err(GeometryError::Colinear);
    }
    let (p, q, r, _, _) = pivot_order(a, b, c);
    let u = q - p;
    let v = r - p;
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    let uv = u.dot(&v);
    let det = uu * vv - uv * uv;
    // [uu uv; uv vv] (alpha, beta) = (uu, vv) / 2
    let alpha = 0.5 * vv * (uu - uv) / det;
    let beta = 0.5 * uu * (vv - uv) / det;
    Ok(p + u * alpha + v * beta)
}

/// Orthonormal basis of `span{b_i - b_0}` by modified Gram-Schmidt.
///
/// Directions whose residual norm falls below `rank_tol` times their
/// original norm are dropped.
pub fn hull_direction_basis(basis_points: &[Point], rank_tol: f64) -> Result<Vec<Point>, GeometryError> {
    let Some(origin) = basis_points.first() else {
        return Ok(Vec::new());
    };
    let mut basis: Vec<Point> = Vec::new();
    for b in &basis_points[1..] {
        origin.check_dim(b)?;
        let mut w = b - origin;
        let original = w.norm();
        if original == 0.0 {
            continue;
        }
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for e in &basis {
                let t = w.dot(e);
                w = w.axpy(-t, e);
            }
        }
        let n = w.norm();
        if n > rank_tol * original {
            basis.push(w * (1.0 / n));
        }
    }
    Ok(basis)
}

/// Orthogonal projection of `p` onto the direction subspace
/// `span{b_i - b_0}` of the affine hull of `basis_points`.
///
/// This is the linear projection `P_{aff{...} - b_0}`; it coincides with
/// the projection onto the hull itself when `b_0` is the origin.
pub fn project_affine_hull(p: &Point, basis_points: &[Point]) -> Result<Point, GeometryError> {
    if let Some(b0) = basis_points.first() {
        p.check_dim(b0)?;
    }
    let basis = hull_direction_basis(basis_points, 1e-10)?;
    let mut out = Point::zeros(p.dim());
    for e in &basis {
        out = out.axpy(p.dot(e), e);
    }
    Ok(out)
}

/// Orthogonal projection of `p` onto the affine hull itself:
/// `b_0 + P(p - b_0)` with `P` as in [`project_affine_hull`].
pub fn project_onto_hull(p: &Point, basis_points: &[Point]) -> Result<Point, GeometryError> {
    let Some(b0) = basis_points.first() else {
        return Err(GeometryError::Empty);
    };
    p.check_dim(b0)?;
    Ok(b0 + &project_affine_hull(&(p - b0), basis_points)?)
}
