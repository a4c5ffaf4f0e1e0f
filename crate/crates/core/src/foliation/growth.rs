//! Quantitative shadows of the growth constants `C`, `D`, `K`, `R`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{CenterLeaf, FoliationError, SeedLine};
use crate::geometry::{projections, Vec2};
use crate::models::{lifted_forward, Endomorphism, LiftedPoint};
use crate::polyline::LeafPolyline;

const K_SAMPLES: usize = 4000;
/// Leaves are coarsened to this edge length before the area estimate.
const K_EDGE: f64 = 0.02;

pub struct GrowthInputs<'a> {
    pub centers: &'a [CenterLeaf],
    pub unstables: &'a [LeafPolyline],
    pub seed: SeedLine,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub n_max: usize,
    /// Max `π^u`-diameter of `f^n(L)` over centre leaves `L` and `n ≤ n_max`.
    pub c_estimate: f64,
    /// `C_estimate` as a function of `n` for `n = 0..=n_max`.
    pub c_by_n: Vec<f64>,
    pub d_estimate: f64,
    pub k_estimate: f64,
    pub r_estimate: f64,
    /// `K₀/(1 − α)` from the linear contraction of perpendicular distance.
    pub r_bound: f64,
    pub alpha: f64,
    pub k0: f64,
    pub r_feasible: bool,
    /// Unstable leaves whose endpoint `π^u`-gap exceeds that of their middle half.
    pub unstable_gap_growth: usize,
    pub unstable_samples: usize,
    pub t_estimate: Option<f64>,
}

impl GrowthReport {
    pub fn finite_nonnegative(&self) -> bool {
        [
            self.c_estimate,
            self.d_estimate,
            self.k_estimate,
            self.r_estimate,
        ]
        .iter()
        .chain(self.t_estimate.iter())
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

fn coarsen(leaf: &LeafPolyline, edge: f64) -> Vec<Vec2> {
    let v = leaf.vertices();
    let mut out = vec![v[0]];
    for &q in &v[1..v.len() - 1] {
        if q.distance(*out.last().expect("non-empty")) >= edge {
            out.push(q);
        }
    }
    out.push(v[v.len() - 1]);
    out
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + t * d)
}

/// Monte-Carlo area of the unit neighbourhood divided by length.
fn volume_ratio(leaf: &LeafPolyline, rng: &mut ChaCha8Rng) -> f64 {
    let pts = coarsen(leaf, K_EDGE);
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for q in &pts {
        lo = Vec2::new(lo.x.min(q.x), lo.y.min(q.y));
        hi = Vec2::new(hi.x.max(q.x), hi.y.max(q.y));
    }
    lo += Vec2::new(-1.0, -1.0);
    hi += Vec2::new(1.0, 1.0);
    let area = (hi.x - lo.x) * (hi.y - lo.y);
    let mut hits = 0usize;
    for _ in 0..K_SAMPLES {
        let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if pts
            .windows(2)
            .any(|w| segment_distance(p, w[0], w[1]) <= 1.0)
        {
            hits += 1;
        }
    }
    area * hits as f64 / K_SAMPLES as f64 / leaf.total_length()
}

/// Sub-polyline between arclength parameters `a < b`.
fn sub_leaf(leaf: &LeafPolyline, a: f64, b: f64) -> (Vec2, Vec2) {
    (leaf.point_at(a), leaf.point_at(b))
}

pub fn growth_diagnostics(
    model: &dyn Endomorphism,
    inputs: &GrowthInputs<'_>,
    n_max: usize,
) -> Result<GrowthReport, FoliationError> {
    let lin = model.linearisation();
    let proj = projections(lin)?;
    let a_inv = lin
        .matrix
        .to_real()
        .inverse()
        .ok_or(crate::geometry::GeometryError::SingularMatrix(lin.matrix))?;

    // C: π^u-diameter of forward images, tracked exactly on the lattice.
    let per_leaf: Vec<Vec<f64>> = inputs
        .centers
        .par_iter()
        .map(|c| {
            let verts = c.leaf.vertices();
            let mut orbit: Vec<LiftedPoint> = verts.iter().map(|&q| LiftedPoint::new(q)).collect();
            let mut diam = Vec::with_capacity(n_max + 1);
            for n in 0..=n_max {
                if n > 0 {
                    for q in orbit.iter_mut() {
                        *q = lifted_forward(model, *q)?;
                    }
                }
                let base = orbit[0];
                let (mut lo, mut hi) = (0.0f64, 0.0f64);
                for q in &orbit {
                    let off = q
                        .offset_from(base)
                        .ok_or(crate::geometry::GeometryError::LatticeOverflow)?;
                    let u = proj.u(off);
                    lo = lo.min(u);
                    hi = hi.max(u);
                }
                diam.push(hi - lo);
            }
            Ok(diam)
        })
        .collect::<Result<_, FoliationError>>()?;
    let c_by_n: Vec<f64> = (0..=n_max)
        .map(|n| per_leaf.iter().map(|d| d[n]).fold(0.0f64, f64::max))
        .collect();
    let c_estimate = c_by_n.iter().copied().fold(0.0f64, f64::max);

    let d_estimate = inputs
        .unstables
        .iter()
        .map(|l| {
            let s: Vec<f64> = l.vertices().iter().map(|&q| proj.s(q)).collect();
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0f64, f64::max);

    let mut unstable_gap_growth = 0;
    for l in inputs.unstables {
        let len = l.total_length();
        let (a, b) = sub_leaf(l, 0.25 * len, 0.75 * len);
        let half = (proj.u(b) - proj.u(a)).abs();
        let full = (proj.u(l.last()) - proj.u(l.first())).abs();
        if full > half {
            unstable_gap_growth += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(inputs.rng_seed);
    let seeds: Vec<u64> = inputs.centers.iter().map(|_| rng.gen()).collect();
    let k_estimate = inputs
        .centers
        .par_iter()
        .zip(seeds)
        .map(|(c, s)| volume_ratio(&c.leaf, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let k_estimate = if k_estimate.is_finite() {
        k_estimate
    } else {
        0.0
    };

    // R: half the spread of perpendicular offsets from the line A^{-n}L.
    let d0 = inputs.seed.unit();
    let mut r_estimate = 0.0f64;
    for c in inputs.centers {
        let mut d = d0;
        for _ in 0..c.depth {
            d = a_inv.apply(d).normalized();
        }
        let normal = Vec2::new(-d.y, d.x);
        let offs = c.leaf.vertices().iter().map(|q| q.dot(normal));
        let (lo, hi) = offs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
            (lo.min(o), hi.max(o))
        });
        r_estimate = r_estimate.max(0.5 * (hi - lo));
    }
    let det = (lin.matrix.det() as f64).abs();
    let depth = inputs.centers.iter().map(|c| c.depth).max().unwrap_or(0);
    let mut alpha = 0.0f64;
    let mut d = d0;
    for _ in 0..=depth.max(1) {
        let img = a_inv.apply(d);
        alpha = alpha.max(d.norm() / (det * img.norm()));
        d = img.normalized();
    }
    let a_inv_norm = op_norm(a_inv.0);
    let k0 = a_inv_norm * model.displacement_sup();
    let r_bound = if alpha < 1.0 {
        k0 / (1.0 - alpha)
    } else {
        f64::INFINITY
    };

    Ok(GrowthReport {
        n_max,
        c_estimate,
        c_by_n,
        d_estimate,
        k_estimate,
        r_estimate,
        r_bound,
        alpha,
        k0,
        r_feasible: r_estimate <= r_bound + 1e-9,
        unstable_gap_growth,
        unstable_samples: inputs.unstables.len(),
        t_estimate: None,
    })
}

fn op_norm(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}
