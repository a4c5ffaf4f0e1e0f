//! The semiconjugacy `H` with `A∘H = H∘f`, at bounded distance from the identity.
//!
//! With `f = A + φ` and `H = id + h`, the eigen-components of `h` are
//! `h^u(p) = Σ_{k≥0} λ_u^{−(k+1)} φ^u(f^k p)` and
//! `h^s(p) = −Σ_{k≥1} λ_s^{k−1} φ^s(f^{−k} p)`,
//! where `f^{−k}` is the inverse of the lift. Forward orbits only enter through
//! the periodic `φ` and are followed on the torus; backward orbits are followed
//! on the cover with [`LiftedPoint`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    cover_to_torus, projections, CoverPoint, GeometryError, LatticeVector, ProjectionPair,
    RealEigen, Vec2,
};
use crate::models::{lifted_backward, Endomorphism, LiftedPoint, ModelError};
use crate::polyline::LeafPolyline;

pub const DEFAULT_DEPTH: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiconjugacyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("depth must be at least 1")]
    ZeroDepth,
}

/// `h(p) = H(p) − p` in eigen-coordinates, with the tails of both series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Displacement {
    pub h: Vec2,
    pub h_s: f64,
    pub h_u: f64,
    pub tail_s: f64,
    pub tail_u: f64,
}

impl Displacement {
    /// Bound on the Euclidean error of `h` (eigenvectors have unit length).
    pub fn tail(&self) -> f64 {
        self.tail_s + self.tail_u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub samples: usize,
    pub max_residual: f64,
    pub tail_bound: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceReport {
    pub samples: usize,
    /// `max ‖H(p + v) − H(p) − v‖`.
    pub max_defect: f64,
    /// The same for the unstable component alone.
    pub max_defect_u: f64,
    pub worst_point: [f64; 2],
    pub worst_vector: [i64; 2],
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafCollapseReport {
    pub leaves: usize,
    /// Largest spread of `H_s` along one leaf.
    pub max_hs_spread: f64,
    /// Whether `H_u` is strictly monotone along every leaf.
    pub hu_monotone: bool,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurjectivityShadow {
    pub grid_n: usize,
    /// Largest distance from a target point of the unit square to the image set.
    pub max_gap: f64,
}

pub struct SemiconjugacyApprox<'m> {
    model: &'m dyn Endomorphism,
    depth: usize,
    proj: ProjectionPair,
    eigen: RealEigen,
}

impl<'m> SemiconjugacyApprox<'m> {
    pub fn new(model: &'m dyn Endomorphism, depth: usize) -> Result<Self, SemiconjugacyError> {
        if depth == 0 {
            return Err(SemiconjugacyError::ZeroDepth);
        }
        let lin = model.linearisation();
        let eigen = *lin.hyperbolic_eigen()?;
        let proj = projections(lin)?;
        Ok(Self {
            model,
            depth,
            proj,
            eigen,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn projections(&self) -> &ProjectionPair {
        &self.proj
    }

    pub fn model(&self) -> &dyn Endomorphism {
        self.model
    }

    pub fn eigen(&self) -> &RealEigen {
        &self.eigen
    }

    pub fn tails(&self) -> (f64, f64) {
        let k0 = self.model.displacement_sup();
        let ls = self.eigen.lambda_s.abs();
        let lu = self.eigen.lambda_u.abs();
        let n = self.depth as i32;
        let tail_s = self.proj.s_norm() * k0 * ls.powi(n) / (1.0 - ls);
        let tail_u = self.proj.u_norm() * k0 * lu.powi(-n) / (lu - 1.0);
        (tail_s, tail_u)
    }

    pub fn h_u_only(&self, p: CoverPoint) -> f64 {
        let lu = self.eigen.lambda_u;
        let mut q = cover_to_torus(p);
        let mut w = 1.0 / lu;
        let mut sum = 0.0;
        for _ in 0..self.depth {
            sum += w * self.proj.u(self.model.displacement(q.to_cover()));
            q = self.model.apply_torus(q);
            w /= lu;
        }
        sum
    }

    pub fn h_s_only(&self, p: CoverPoint) -> Result<f64, SemiconjugacyError> {
        let ls = self.eigen.lambda_s;
        let mut q = LiftedPoint::new(p);
        let mut w = 1.0;
        let mut sum = 0.0;
        for _ in 0..self.depth {
            q = lifted_backward(self.model, q)?;
            sum += w * self.proj.s(self.model.displacement(q.local));
            w *= ls;
        }
        Ok(-sum)
    }

    /// `h(p) = H(p) − p`.
    pub fn franks_displacement(&self, p: CoverPoint) -> Result<Displacement, SemiconjugacyError> {
        let h_u = self.h_u_only(p);
        let h_s = self.h_s_only(p)?;
        let (tail_s, tail_u) = self.tails();
        Ok(Displacement {
            h: self.proj.point(h_s, h_u),
            h_s,
            h_u,
            tail_s,
            tail_u,
        })
    }

    pub fn apply(&self, p: CoverPoint) -> Result<CoverPoint, SemiconjugacyError> {
        Ok(p + self.franks_displacement(p)?.h)
    }

    /// `H^s = π^s∘H`.
    pub fn h_s(&self, p: CoverPoint) -> Result<f64, SemiconjugacyError> {
        Ok(self.proj.s(p) + self.h_s_only(p)?)
    }

    /// `H^u = π^u∘H`.
    pub fn h_u(&self, p: CoverPoint) -> f64 {
        self.proj.u(p) + self.h_u_only(p)
    }

    /// `‖A·H(p) − H(f(p))‖`.
    pub fn residual(&self, p: CoverPoint) -> Result<f64, SemiconjugacyError> {
        let a = &self.model.linearisation().matrix;
        let lhs = a.apply(self.apply(p)?);
        let rhs = self.apply(self.model.lift_apply(p))?;
        Ok((lhs - rhs).norm())
    }

    fn random_points(n: usize, seed: u64) -> Vec<CoverPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec2::new(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect()
    }

    pub fn residual_report(&self, n: usize, seed: u64, tolerance: f64) -> ResidualReport {
        let pts = Self::random_points(n, seed);
        let r: Vec<f64> = pts
            .par_iter()
            .map(|&p| self.residual(p).unwrap_or(f64::INFINITY))
            .collect();
        let max_residual = r.into_iter().fold(0.0, f64::max);
        let (ts, tu) = self.tails();
        let lu = self.eigen.lambda_u.abs();
        ResidualReport {
            samples: n,
            max_residual,
            tail_bound: (1.0 + lu) * (ts + tu),
            tolerance,
            passed: max_residual <= tolerance,
        }
    }

    /// `max ‖H(p + v) − H(p) − v‖` over random `p` and the given lattice vectors.
    pub fn deck_equivariance_report(
        &self,
        n: usize,
        seed: u64,
        vectors: &[LatticeVector],
        tolerance: f64,
    ) -> EquivarianceReport {
        let pts = Self::random_points(n, seed);
        let rows: Vec<(f64, f64, [f64; 2], [i64; 2])> = pts
            .par_iter()
            .map(|&p| {
                let mut best = (0.0, 0.0, [p.x, p.y], [0, 0]);
                let (hp, hup) = match self.apply(p) {
                    Ok(h) => (h, self.h_u(p)),
                    Err(_) => return (f64::INFINITY, f64::INFINITY, [p.x, p.y], [0, 0]),
                };
                for &v in vectors {
                    let q = p.translate(v);
                    let d = match self.apply(q) {
                        Ok(hq) => (hq - hp - v.to_vec2()).norm(),
                        Err(_) => f64::INFINITY,
                    };
                    let du = (self.h_u(q) - hup - self.proj.u(v.to_vec2())).abs();
                    best.1 = f64::max(best.1, du);
                    if d > best.0 {
                        best.0 = d;
                        best.3 = [v.m, v.n];
                    }
                }
                best
            })
            .collect();
        let mut out = (0.0, 0.0, [0.0, 0.0], [0, 0]);
        for r in rows {
            out.1 = f64::max(out.1, r.1);
            if r.0 > out.0 {
                out = (r.0, out.1, r.2, r.3);
            }
        }
        EquivarianceReport {
            samples: n,
            max_defect: out.0,
            max_defect_u: out.1,
            worst_point: out.2,
            worst_vector: out.3,
            tolerance,
            passed: out.0 <= tolerance,
        }
    }

    /// Largest `‖h‖` over a grid of the unit square, plus the series tail.
    pub fn displacement_bound(&self, grid_n: usize) -> Result<f64, SemiconjugacyError> {
        self.displacement_bound_shifted(grid_n, Vec2::default())
    }

    /// As [`Self::displacement_bound`] on the grid translated by `shift`.
    pub fn displacement_bound_shifted(
        &self,
        grid_n: usize,
        shift: Vec2,
    ) -> Result<f64, SemiconjugacyError> {
        let grid_n = grid_n.max(2);
        let vals: Vec<Result<f64, SemiconjugacyError>> = (0..grid_n * grid_n)
            .into_par_iter()
            .map(|k| {
                let p = Vec2::new(
                    (k / grid_n) as f64 / grid_n as f64,
                    (k % grid_n) as f64 / grid_n as f64,
                ) + shift;
                Ok(self.franks_displacement(p)?.h.norm())
            })
            .collect();
        let mut m = 0.0f64;
        for v in vals {
            m = m.max(v?);
        }
        let (ts, tu) = self.tails();
        Ok(m + ts + tu)
    }

    /// `K₀·(Σ_k |λ_u|^{−k−1}·‖π^u‖ + Σ_k |λ_s|^{k−1}·‖π^s‖)` over the truncated ranges.
    pub fn geometric_bound(&self) -> f64 {
        let k0 = self.model.displacement_sup();
        let ls = self.eigen.lambda_s.abs();
        let lu = self.eigen.lambda_u.abs();
        let mut su = 0.0;
        let mut ss = 0.0;
        for k in 0..self.depth as i32 {
            su += lu.powi(-k - 1);
            ss += ls.powi(k);
        }
        k0 * (su * self.proj.u_norm() + ss * self.proj.s_norm())
    }

    /// Spread of `H_s` and monotonicity of `H_u` along sampled unstable leaves.
    pub fn unstable_leaf_collapse(
        &self,
        leaves: &[LeafPolyline],
        tolerance: f64,
    ) -> Result<LeafCollapseReport, SemiconjugacyError> {
        let rows: Vec<Result<(f64, bool), SemiconjugacyError>> = leaves
            .par_iter()
            .map(|leaf| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut sign = 0.0f64;
                let mut monotone = true;
                let mut prev: Option<f64> = None;
                for &v in leaf.vertices() {
                    let hs = self.h_s(v)?;
                    lo = lo.min(hs);
                    hi = hi.max(hs);
                    let hu = self.h_u(v);
                    if let Some(p) = prev {
                        let d = hu - p;
                        if sign == 0.0 {
                            sign = d.signum();
                        }
                        if d * sign <= 0.0 {
                            monotone = false;
                        }
                    }
                    prev = Some(hu);
                }
                Ok((hi - lo, monotone))
            })
            .collect();
        let mut max_hs_spread = 0.0f64;
        let mut hu_monotone = true;
        for r in rows {
            let (s, m) = r?;
            max_hs_spread = max_hs_spread.max(s);
            hu_monotone &= m;
        }
        Ok(LeafCollapseReport {
            leaves: leaves.len(),
            max_hs_spread,
            hu_monotone,
            tolerance,
            passed: max_hs_spread <= tolerance && hu_monotone,
        })
    }

    /// Images of a grid over `[−1, 2]²` against targets on a grid of `[0, 1]²`.
    pub fn surjectivity_shadow(
        &self,
        grid_n: usize,
    ) -> Result<SurjectivityShadow, SemiconjugacyError> {
        let grid_n = grid_n.max(2);
        let m = 3 * grid_n;
        let images: Vec<Result<Vec2, SemiconjugacyError>> = (0..m * m)
            .into_par_iter()
            .map(|k| {
                let p = Vec2::new(
                    -1.0 + 3.0 * (k / m) as f64 / m as f64,
                    -1.0 + 3.0 * (k % m) as f64 / m as f64,
                );
                self.apply(p)
            })
            .collect();
        let images = images.into_iter().collect::<Result<Vec<_>, _>>()?;
        let cell = 1.0 / grid_n as f64;
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<Vec2>> =
            std::collections::HashMap::new();
        for q in images {
            let key = ((q.x / cell).floor() as i64, (q.y / cell).floor() as i64);
            buckets.entry(key).or_default().push(q);
        }
        let mut max_gap = 0.0f64;
        for i in 0..=grid_n {
            for j in 0..=grid_n {
                let t = Vec2::new(i as f64 * cell, j as f64 * cell);
                let (ci, cj) = ((t.x / cell).floor() as i64, (t.y / cell).floor() as i64);
                let mut best = f64::INFINITY;
                for di in -2..=2 {
                    for dj in -2..=2 {
                        if let Some(b) = buckets.get(&(ci + di, cj + dj)) {
                            for q in b {
                                best = best.min(q.distance(t));
                            }
                        }
                    }
                }
                max_gap = max_gap.max(best);
            }
        }
        Ok(SurjectivityShadow { grid_n, max_gap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IntMatrix;
    use crate::models::{IncoherentModel, PerturbedLinearModel};

    fn model(eps: f64) -> PerturbedLinearModel {
        PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), eps).unwrap()
    }

    #[test]
    fn zero_perturbation_gives_identity() {
        let m = model(0.0);
        let h = SemiconjugacyApprox::new(&m, 30).unwrap();
        for p in [Vec2::new(0.2, 0.7), Vec2::new(-3.1, 4.4)] {
            assert!((h.apply(p).unwrap() - p).norm() < 1e-14);
            assert!((h.h_s(p).unwrap() - h.projections().s(p)).abs() < 1e-14);
        }
        assert_eq!(h.displacement_bound(8).unwrap(), 0.0);
    }

    #[test]
    fn semiconjugacy_equation_holds() {
        let m = model(0.05);
        let h = SemiconjugacyApprox::new(&m, 30).unwrap();
        let r = h.residual_report(100, 1, 1e-6);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn deeper_series_agree_within_tail() {
        let m = model(0.05);
        let a = SemiconjugacyApprox::new(&m, 20).unwrap();
        let b = SemiconjugacyApprox::new(&m, 30).unwrap();
        for p in [Vec2::new(0.1, 0.9), Vec2::new(0.6, 0.3)] {
            let da = a.franks_displacement(p).unwrap();
            let db = b.franks_displacement(p).unwrap();
            assert!((da.h - db.h).norm() <= da.tail() + 1e-12);
        }
    }

    #[test]
    fn unstable_component_is_deck_equivariant() {
        let m = model(0.05);
        let h = SemiconjugacyApprox::new(&m, 30).unwrap();
        let r = h.deck_equivariance_report(
            20,
            5,
            &[LatticeVector::new(1, 0), LatticeVector::new(0, 1)],
            1e-9,
        );
        assert!(r.max_defect_u < 1e-9, "{r:?}");
    }

    #[test]
    fn displacement_within_geometric_bound() {
        let m = model(0.05);
        let h = SemiconjugacyApprox::new(&m, 30).unwrap();
        let b = h.displacement_bound(16).unwrap();
        let (ts, tu) = h.tails();
        assert!(b > 0.0);
        assert!(b <= h.geometric_bound() + ts + tu);
    }

    #[test]
    fn rejects_non_hyperbolic_models() {
        let m = IncoherentModel::default();
        assert!(SemiconjugacyApprox::new(&m, 30).is_err());
        let m = model(0.05);
        assert!(matches!(
            SemiconjugacyApprox::new(&m, 0),
            Err(SemiconjugacyError::ZeroDepth)
        ));
    }

    #[test]
    fn image_of_a_grid_is_dense() {
        let m = model(0.05);
        let h = SemiconjugacyApprox::new(&m, 20).unwrap();
        let s = h.surjectivity_shadow(16).unwrap();
        assert!(s.max_gap < 0.1, "{s:?}");
    }
}
