//! Plane and torus arithmetic, integer linearisations and their eigen-structure.
//!
//! The torus is `R² / Z²`. Points of the universal cover are plain [`Vec2`]s;
//! torus points are canonicalised to the half-open unit square by
//! [`wrap_unit`], which is the only place where wrap-around happens.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when comparing eigenvalue moduli against 1.
pub const EIGEN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid linearisation: determinant of {0} is zero")]
    SingularMatrix(IntMatrix),
    #[error("unsupported linearisation class {0:?} (expected hyperbolic)")]
    UnsupportedClass(LinearClass),
    #[error("lattice arithmetic overflowed")]
    LatticeOverflow,
}

/// A vector of `R²`. Also used for points of the universal cover.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// A point of the universal cover `R²`.
pub type CoverPoint = Vec2;

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3d cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn translate(self, v: LatticeVector) -> Vec2 {
        Vec2::new(self.x + v.m as f64, self.y + v.n as f64)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

/// Reduce a real number to `[0, 1)`.
pub fn wrap_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid rounds tiny negative inputs up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of `T² = R²/Z²`, always stored in `[0,1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap_unit(x),
            y: wrap_unit(y),
        }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    /// The representative of this point in the fundamental domain `[0,1)²`.
    pub fn to_cover(self) -> CoverPoint {
        Vec2::new(self.x, self.y)
    }
}

pub fn cover_to_torus(p: CoverPoint) -> TorusPoint {
    TorusPoint::new(p.x, p.y)
}

pub fn deck_translate(p: CoverPoint, v: LatticeVector) -> CoverPoint {
    p.translate(v)
}

/// Quotient distance on the torus.
pub fn torus_distance(a: TorusPoint, b: TorusPoint) -> f64 {
    let mut best = f64::INFINITY;
    for dm in -1..=1 {
        for dn in -1..=1 {
            let d = Vec2::new(a.x - b.x + dm as f64, a.y - b.y + dn as f64).norm();
            best = best.min(d);
        }
    }
    best
}

/// An integer translation of the cover (a deck transformation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LatticeVector {
    pub m: i64,
    pub n: i64,
}

impl LatticeVector {
    pub const fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }

    pub fn checked_add(self, o: LatticeVector) -> Option<LatticeVector> {
        Some(LatticeVector::new(
            self.m.checked_add(o.m)?,
            self.n.checked_add(o.n)?,
        ))
    }

    pub fn checked_sub(self, o: LatticeVector) -> Option<LatticeVector> {
        Some(LatticeVector::new(
            self.m.checked_sub(o.m)?,
            self.n.checked_sub(o.n)?,
        ))
    }

    pub fn to_vec2(self) -> Vec2 {
        Vec2::new(self.m as f64, self.n as f64)
    }
}

/// A 2×2 integer matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix(pub [[i64; 2]; 2]);

impl IntMatrix {
    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn det(&self) -> i64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn adjugate(&self) -> IntMatrix {
        let [[a, b], [c, d]] = self.0;
        IntMatrix::new(d, -b, -c, a)
    }

    pub fn to_real(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(a as f64, b as f64, c as f64, d as f64)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        self.to_real().apply(v)
    }

    pub fn checked_apply(&self, v: LatticeVector) -> Option<LatticeVector> {
        let [[a, b], [c, d]] = self.0;
        let m = a.checked_mul(v.m)?.checked_add(b.checked_mul(v.n)?)?;
        let n = c.checked_mul(v.m)?.checked_add(d.checked_mul(v.n)?)?;
        Some(LatticeVector::new(m, n))
    }

    /// Writes `w = A·u + r` with `u` integral and `A⁻¹r ∈ [0,1)²`, i.e. `r` is
    /// the canonical representative of `w` in `Z² / A Z²`.
    pub fn coset_split(&self, w: LatticeVector) -> Option<(LatticeVector, LatticeVector)> {
        let det = self.det() as i128;
        if det == 0 {
            return None;
        }
        let [[a, b], [c, d]] = self.adjugate().0;
        let (wm, wn) = (w.m as i128, w.n as i128);
        let am = a as i128 * wm + b as i128 * wn;
        let an = c as i128 * wm + d as i128 * wn;
        // A⁻¹w = adj(A)·w / det; keep the integer part, the remainder lands in r
        let um = am.div_euclid(det);
        let un = an.div_euclid(det);
        let u = LatticeVector::new(i64::try_from(um).ok()?, i64::try_from(un).ok()?);
        let au = self.checked_apply(u)?;
        let r = w.checked_sub(au)?;
        Some((u, r))
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.0;
        write!(f, "[[{a}, {b}], [{c}, {d}]]")
    }
}

/// A real 2×2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.0;
        Vec2::new(a * v.x + b * v.y, c * v.x + d * v.y)
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some(Mat2::new(d / det, -b / det, -c / det, a / det))
    }

    /// Solves `self · x = v`.
    pub fn solve(&self, v: Vec2) -> Option<Vec2> {
        self.inverse().map(|inv| inv.apply(v))
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        let [[e, f], [g, h]] = o.0;
        Mat2::new(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
    }
}

/// A projective tangent line, stored as an angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    angle: f64,
}

impl Direction {
    pub const HORIZONTAL: Direction = Direction { angle: 0.0 };
    pub const VERTICAL: Direction = Direction { angle: PI / 2.0 };

    pub fn from_angle(angle: f64) -> Self {
        let mut a = angle.rem_euclid(PI);
        if a >= PI {
            a = 0.0;
        }
        Self { angle: a }
    }

    pub fn from_vector(v: Vec2) -> Self {
        Self::from_angle(v.y.atan2(v.x))
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    /// Unit vector spanning the line, with angle in `[0, π)`.
    pub fn unit(self) -> Vec2 {
        Vec2::new(self.angle.cos(), self.angle.sin())
    }

    /// Unit vector spanning the line, oriented to have non-negative dot product with `reference`.
    pub fn oriented_like(self, reference: Vec2) -> Vec2 {
        let u = self.unit();
        if u.dot(reference) < 0.0 {
            -u
        } else {
            u
        }
    }

    /// Projective distance `min(|Δ|, π − |Δ|)`.
    pub fn distance(self, other: Direction) -> f64 {
        let d = (self.angle - other.angle).abs();
        d.min(PI - d)
    }
}

/// Named classes of a linearisation by eigenvalue moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearClass {
    Hyperbolic,
    Expanding,
    NonHyperbolic,
    /// Non-real spectrum, or a spectrum that fits none of the named cases.
    Degenerate,
}

/// Real eigen-structure of a 2×2 matrix, ordered by modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealEigen {
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub v_s: Vec2,
    pub v_u: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearisationData {
    pub matrix: IntMatrix,
    pub class: LinearClass,
    /// `None` when the spectrum is not real.
    pub eigen: Option<RealEigen>,
}

impl LinearisationData {
    /// The eigen-structure, or an error unless the class is hyperbolic.
    pub fn hyperbolic_eigen(&self) -> Result<&RealEigen, GeometryError> {
        match (&self.eigen, self.class) {
            (Some(e), LinearClass::Hyperbolic) => Ok(e),
            _ => Err(GeometryError::UnsupportedClass(self.class)),
        }
    }
}

fn eigenvector(m: &IntMatrix, lambda: f64, fallback: Vec2) -> Vec2 {
    let [[a, b], [c, d]] = m.0;
    let cand1 = Vec2::new(b as f64, lambda - a as f64);
    let cand2 = Vec2::new(lambda - d as f64, c as f64);
    let v = if cand1.norm() >= cand2.norm() {
        cand1
    } else {
        cand2
    };
    if v.norm() < 1e-300 {
        return fallback;
    }
    let v = v.normalized();
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

/// Eigen-structure and class of an integer matrix.
pub fn classify_linearisation(matrix: IntMatrix) -> Result<LinearisationData, GeometryError> {
    let det = matrix.det();
    if det == 0 {
        return Err(GeometryError::SingularMatrix(matrix));
    }
    let t = matrix.trace() as i128;
    let disc = t * t - 4 * det as i128;
    if disc < 0 {
        return Ok(LinearisationData {
            matrix,
            class: LinearClass::Degenerate,
            eigen: None,
        });
    }
    let sq = (disc as f64).sqrt();
    let tf = t as f64;
    // numerically stable pair of roots of λ² − tλ + det
    let q = if tf >= 0.0 {
        0.5 * (tf + sq)
    } else {
        0.5 * (tf - sq)
    };
    let r1 = q;
    let r2 = det as f64 / q;
    let (lambda_s, lambda_u) = if r1.abs() <= r2.abs() {
        (r1, r2)
    } else {
        (r2, r1)
    };
    let v_u = eigenvector(&matrix, lambda_u, Vec2::new(1.0, 0.0));
    let mut v_s = eigenvector(&matrix, lambda_s, Vec2::new(0.0, 1.0));
    if (lambda_s - lambda_u).abs() < EIGEN_TOL && v_s.cross(v_u).abs() < EIGEN_TOL {
        // repeated eigenvalue: complete the basis
        v_s = Vec2::new(-v_u.y, v_u.x);
    }
    let (ms, mu) = (lambda_s.abs(), lambda_u.abs());
    let class = if ms < 1.0 - EIGEN_TOL && mu > 1.0 + EIGEN_TOL {
        LinearClass::Hyperbolic
    } else if ms > 1.0 + EIGEN_TOL {
        LinearClass::Expanding
    } else if mu > 1.0 + EIGEN_TOL && (ms - 1.0).abs() <= EIGEN_TOL {
        LinearClass::NonHyperbolic
    } else {
        LinearClass::Degenerate
    };
    Ok(LinearisationData {
        matrix,
        class,
        eigen: Some(RealEigen {
            lambda_s,
            lambda_u,
            v_s,
            v_u,
        }),
    })
}

/// Linear coordinates adapted to a hyperbolic matrix: `p = π^s(p)·v_s + π^u(p)·v_u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub pi_s: [f64; 2],
    pub pi_u: [f64; 2],
    pub v_s: Vec2,
    pub v_u: Vec2,
}

impl ProjectionPair {
    pub fn s(&self, p: Vec2) -> f64 {
        self.pi_s[0] * p.x + self.pi_s[1] * p.y
    }

    pub fn u(&self, p: Vec2) -> f64 {
        self.pi_u[0] * p.x + self.pi_u[1] * p.y
    }

    /// Inverse of the coordinate map.
    pub fn point(&self, s: f64, u: f64) -> Vec2 {
        s * self.v_s + u * self.v_u
    }

    /// Operator norm of `π^s` as a functional.
    pub fn s_norm(&self) -> f64 {
        self.pi_s[0].hypot(self.pi_s[1])
    }

    pub fn u_norm(&self) -> f64 {
        self.pi_u[0].hypot(self.pi_u[1])
    }
}

pub fn projections(lin: &LinearisationData) -> Result<ProjectionPair, GeometryError> {
    let e = lin.hyperbolic_eigen()?;
    let basis = Mat2::new(e.v_s.x, e.v_u.x, e.v_s.y, e.v_u.y);
    let inv = basis
        .inverse()
        .ok_or(GeometryError::UnsupportedClass(lin.class))?;
    Ok(ProjectionPair {
        pi_s: inv.0[0],
        pi_u: inv.0[1],
        v_s: e.v_s,
        v_u: e.v_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_the_named_examples() {
        let lin = classify_linearisation(IntMatrix::new(2, 0, 0, 1)).unwrap();
        assert_eq!(lin.class, LinearClass::NonHyperbolic);
        let e = lin.eigen.unwrap();
        assert_eq!((e.lambda_s, e.lambda_u), (1.0, 2.0));

        let lin = classify_linearisation(IntMatrix::new(3, 1, 1, 1)).unwrap();
        assert_eq!(lin.class, LinearClass::Hyperbolic);
        let e = lin.eigen.unwrap();
        assert!((e.lambda_u - (2.0 + 2f64.sqrt())).abs() < 1e-14);
        assert!((e.lambda_s - (2.0 - 2f64.sqrt())).abs() < 1e-14);
        assert!((e.lambda_u - 3.41421356).abs() < 1e-8);
        assert!((e.lambda_s - 0.58578644).abs() < 1e-8);

        let lin = classify_linearisation(IntMatrix::new(2, 0, 0, 3)).unwrap();
        assert_eq!(lin.class, LinearClass::Expanding);
        let e = lin.eigen.unwrap();
        assert_eq!((e.lambda_s, e.lambda_u), (2.0, 3.0));
    }

    #[test]
    fn identity_and_rotation_are_degenerate() {
        let lin = classify_linearisation(IntMatrix::new(1, 0, 0, 1)).unwrap();
        assert_eq!(lin.class, LinearClass::Degenerate);
        let lin = classify_linearisation(IntMatrix::new(0, -1, 1, 0)).unwrap();
        assert_eq!(lin.class, LinearClass::Degenerate);
        assert!(lin.eigen.is_none());
    }

    #[test]
    fn zero_determinant_is_rejected() {
        let err = classify_linearisation(IntMatrix::new(1, 2, 2, 4)).unwrap_err();
        assert!(matches!(err, GeometryError::SingularMatrix(_)));
    }

    #[test]
    fn stable_eigenvector_of_cat_like_matrix() {
        let lin = classify_linearisation(IntMatrix::new(3, 1, 1, 1)).unwrap();
        let e = lin.eigen.unwrap();
        // (3 − λ_s)x + y = 0  ⇒  direction (1, −1 − √2)
        let expected = Vec2::new(1.0, -1.0 - 2f64.sqrt()).normalized();
        assert!(e.v_s.cross(expected).abs() < 1e-14);
        let p = projections(&lin).unwrap();
        assert!(p.u(expected).abs() < 1e-12);
    }

    #[test]
    fn projections_are_normalised_and_annihilate() {
        for m in [
            IntMatrix::new(3, 1, 1, 1),
            IntMatrix::new(2, 1, 1, 1),
            IntMatrix::new(3, 2, 1, 1),
            IntMatrix::new(1, 1, 1, 0),
            IntMatrix::new(5, 2, 2, 1),
            IntMatrix::new(4, 1, 1, 1),
        ] {
            let lin = classify_linearisation(m).unwrap();
            assert_eq!(lin.class, LinearClass::Hyperbolic, "{m}");
            let p = projections(&lin).unwrap();
            assert!(p.s(p.v_u).abs() < 1e-12);
            assert!(p.u(p.v_s).abs() < 1e-12);
            assert!((p.s(p.v_s) - 1.0).abs() < 1e-12);
            assert!((p.u(p.v_u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projections_need_hyperbolic_class() {
        let lin = classify_linearisation(IntMatrix::new(2, 0, 0, 1)).unwrap();
        assert_eq!(
            projections(&lin).unwrap_err(),
            GeometryError::UnsupportedClass(LinearClass::NonHyperbolic)
        );
    }

    #[test]
    fn torus_plumbing_examples() {
        let t = cover_to_torus(Vec2::new(1.25, -0.5));
        assert_eq!((t.x(), t.y()), (0.25, 0.5));
        let q = deck_translate(Vec2::new(0.1, 0.2), LatticeVector::new(1, -1));
        assert!((q.x - 1.1).abs() < 1e-15 && (q.y + 0.8).abs() < 1e-15);
        let d = torus_distance(TorusPoint::new(0.95, 0.0), TorusPoint::new(0.05, 0.0));
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wrap_handles_tiny_negatives() {
        let w = wrap_unit(-1e-18);
        assert!((0.0..1.0).contains(&w));
    }

    #[test]
    fn coset_split_reconstructs() {
        let a = IntMatrix::new(3, 1, 1, 1);
        for m in -4..=4 {
            for n in -4..=4 {
                let w = LatticeVector::new(m, n);
                let (u, r) = a.coset_split(w).unwrap();
                let back = a.checked_apply(u).unwrap().checked_add(r).unwrap();
                assert_eq!(back, w);
                let ar = a.to_real().inverse().unwrap().apply(r.to_vec2());
                assert!((0.0..1.0).contains(&ar.x) && (0.0..1.0).contains(&ar.y));
            }
        }
    }

    #[test]
    fn direction_distance_wraps() {
        let a = Direction::from_angle(0.01);
        let b = Direction::from_angle(PI - 0.01);
        assert!((a.distance(b) - 0.02).abs() < 1e-12);
        let v = Direction::from_vector(Vec2::new(-1.0, 0.0));
        assert_eq!(v.angle(), 0.0);
    }
}
