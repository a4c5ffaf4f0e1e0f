//! Centre and unstable foliations on the cover for maps with hyperbolic linearisation.
//!
//! Centre leaves are limits of `F_n(p) = f^{−n}(F^ε(f^n p))`, where `F^ε` is a
//! family of parallel lines of rational slope transverse to the unstable cone.
//! Leaves are stored over a window `|π^s(q) − π^s(p)| ≤ W` and ordered by
//! increasing `π^s`.

mod growth;
mod intersect;

pub use growth::{growth_diagnostics, GrowthInputs, GrowthReport};
pub use intersect::{
    count_crossings, no_crossing_check, product_structure_check, CrossingReport, ProductReport,
    SegmentIndex,
};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    cover_to_torus, projections, CoverPoint, Direction, GeometryError, LatticeVector,
    ProjectionPair, RealEigen, TorusPoint, Vec2,
};
use crate::models::{
    lifted_backward, lifted_backward_n, lifted_forward_n, ConeFamily, Endomorphism, LiftedPoint,
    ModelError,
};
use crate::polyline::{LeafPolyline, PolylineError};

pub const MAX_EDGE: f64 = 2e-3;
pub const MIN_EDGE: f64 = 2e-4;
pub const N_MAX: usize = 30;
pub const DEFAULT_WINDOW: f64 = 2.0;
/// Backward steps used for pointwise unstable directions.
pub const UNSTABLE_ITERATES: usize = 20;
/// Arclength step for unstable leaves.
pub const UNSTABLE_STEP: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoliationError {
    #[error("no rational slope with entries up to {max_height} clears the cone (best margin {best_margin})")]
    SeedSelection { max_height: i64, best_margin: f64 },
    #[error("seed slope ({0}, {1}) is not admissible: {2}")]
    InvalidSeed(i64, i64, String),
    #[error("degenerate leaf: {0}")]
    DegenerateLeaf(String),
    #[error("centre leaf did not converge by n = {n} (last gap {gap:e})")]
    Convergence { n: usize, gap: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Polyline(#[from] PolylineError),
}

/// The family of lines of direction `(p, q)`, `gcd(p, q) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedLine {
    pub slope: (i64, i64),
}

impl SeedLine {
    pub fn new(p: i64, q: i64) -> Result<Self, FoliationError> {
        if gcd(p, q) != 1 {
            return Err(FoliationError::InvalidSeed(
                p,
                q,
                "entries must be coprime".into(),
            ));
        }
        Ok(Self { slope: (p, q) })
    }

    pub fn unit(&self) -> Vec2 {
        Vec2::new(self.slope.0 as f64, self.slope.1 as f64).normalized()
    }

    pub fn direction(&self) -> Direction {
        Direction::from_vector(self.unit())
    }

    pub fn vector(&self) -> LatticeVector {
        LatticeVector::new(self.slope.0, self.slope.1)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedChoice {
    pub seed: SeedLine,
    /// `min_p ∠(seed, axis(p)) − half_angle` over the grid.
    pub margin: f64,
}

/// Angular margin of a seed direction outside the cone family over a grid.
pub fn seed_margin(
    model: &dyn Endomorphism,
    cone: &ConeFamily,
    seed: SeedLine,
    grid_n: usize,
) -> Result<f64, FoliationError> {
    let lin = model.linearisation();
    if let Some(e) = lin.eigen {
        if seed.direction().distance(Direction::from_vector(e.v_u)) < 1e-12 {
            return Err(FoliationError::InvalidSeed(
                seed.slope.0,
                seed.slope.1,
                "parallel to the unstable eigendirection".into(),
            ));
        }
    }
    let grid_n = grid_n.max(2);
    let d = seed.direction();
    let mut margin = f64::INFINITY;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let p = TorusPoint::new(i as f64 / grid_n as f64, j as f64 / grid_n as f64);
            margin = margin.min(d.distance(cone.axis.at(p)) - cone.half_angle());
        }
    }
    Ok(margin)
}

/// Picks the simplest rational slope outside the cone.
///
/// Candidates are ranked by height `max(|p|, |q|)`, then by angle to the stable
/// eigendirection, then by matching the sign of the stable slope.
pub fn seed_foliation(
    model: &dyn Endomorphism,
    cone: &ConeFamily,
    grid_n: usize,
) -> Result<SeedChoice, FoliationError> {
    const MAX_HEIGHT: i64 = 10;
    let e = model.linearisation().hyperbolic_eigen()?;
    let vs = Direction::from_vector(e.v_s);
    let stable_sign = (e.v_s.x * e.v_s.y).signum();
    let mut cands = Vec::new();
    for p in 0..=MAX_HEIGHT {
        for q in -MAX_HEIGHT..=MAX_HEIGHT {
            if (p == 0 && q <= 0) || gcd(p, q) != 1 {
                continue;
            }
            let s = SeedLine { slope: (p, q) };
            let dist = s.direction().distance(vs);
            let sign_mismatch = ((p * q) as f64).signum() != stable_sign;
            cands.push((
                p.abs().max(q.abs()),
                (dist * 1e9).round() as i64,
                sign_mismatch,
                s,
            ));
        }
    }
    cands.sort_by_key(|c| (c.0, c.1, c.2, c.3.slope));
    let mut best_margin = f64::NEG_INFINITY;
    for (_, _, _, s) in cands {
        let m = match seed_margin(model, cone, s, grid_n) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if m > 0.0 {
            return Ok(SeedChoice { seed: s, margin: m });
        }
        best_margin = best_margin.max(m);
    }
    Err(FoliationError::SeedSelection {
        max_height: MAX_HEIGHT,
        best_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMode {
    Center,
    Unstable,
}

/// Invariant directions by iterating the derivative.
///
/// `Center` pulls a fixed direction at `f^n(p)` back along the forward orbit;
/// `Unstable` pushes `v_u` forward along the backward orbit on the cover.
pub fn direction_by_iteration(
    model: &dyn Endomorphism,
    p: CoverPoint,
    mode: IterationMode,
    n: usize,
) -> Result<Direction, FoliationError> {
    let lin = model.linearisation();
    let (v_s, v_u) = match lin.eigen {
        Some(e) => (e.v_s, e.v_u),
        None => (Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)),
    };
    match mode {
        IterationMode::Center => {
            let mut orbit = Vec::with_capacity(n);
            let mut q = cover_to_torus(p);
            for _ in 0..n {
                orbit.push(q);
                q = model.apply_torus(q);
            }
            let mut v = v_s;
            for q in orbit.iter().rev() {
                v = model
                    .jacobian(*q)
                    .solve(v)
                    .ok_or_else(|| FoliationError::DegenerateLeaf("singular derivative".into()))?
                    .normalized();
            }
            Ok(Direction::from_vector(v))
        }
        IterationMode::Unstable => {
            let mut orbit = Vec::with_capacity(n);
            let mut q = LiftedPoint::new(p);
            for _ in 0..n {
                q = lifted_backward(model, q)?;
                orbit.push(q);
            }
            let mut v = v_u;
            for q in orbit.iter().rev() {
                v = model.jacobian_at(q.local).apply(v).normalized();
            }
            Ok(Direction::from_vector(v))
        }
    }
}

/// Integrates the unstable direction field through `p`, `length/2` each way.
pub fn unstable_leaf(
    model: &dyn Endomorphism,
    p: CoverPoint,
    length: f64,
) -> Result<LeafPolyline, FoliationError> {
    if !(length > 0.0) {
        return Err(FoliationError::InvalidInput(format!("length {length}")));
    }
    let field = |q: Vec2, prev: Vec2| -> Result<Vec2, FoliationError> {
        Ok(
            direction_by_iteration(model, q, IterationMode::Unstable, UNSTABLE_ITERATES)?
                .oriented_like(prev),
        )
    };
    let base = field(p, Vec2::new(1.0, 0.0))?;
    let steps = ((0.5 * length) / UNSTABLE_STEP).ceil() as usize;
    let h = 0.5 * length / steps as f64;
    let mut sides = Vec::new();
    for sign in [-1.0, 1.0] {
        let mut q = p;
        let mut dir = sign * base;
        let mut pts = Vec::with_capacity(steps);
        for _ in 0..steps {
            let k1 = field(q, dir)?;
            let k2 = field(q + (0.5 * h) * k1, k1)?;
            let k3 = field(q + (0.5 * h) * k2, k2)?;
            let k4 = field(q + h * k3, k3)?;
            dir = k1;
            q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            pts.push(q);
        }
        sides.push(pts);
    }
    let mut v: Vec<Vec2> = sides[0].iter().rev().copied().collect();
    v.push(p);
    v.extend(sides[1].iter().copied());
    Ok(LeafPolyline::new(v)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterLeaf {
    pub base: [f64; 2],
    pub leaf: LeafPolyline,
    pub depth: usize,
    pub gap: f64,
}

/// Builds backward-iterated leaves for one model and seed line.
pub struct LeafBuilder<'m> {
    model: &'m dyn Endomorphism,
    proj: ProjectionPair,
    eigen: RealEigen,
    seed: SeedLine,
    window: f64,
}

impl<'m> LeafBuilder<'m> {
    pub fn new(
        model: &'m dyn Endomorphism,
        seed: SeedLine,
        window: f64,
    ) -> Result<Self, FoliationError> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(FoliationError::InvalidInput(format!("window {window}")));
        }
        let lin = model.linearisation();
        let eigen = *lin.hyperbolic_eigen()?;
        let proj = projections(lin)?;
        if proj.s(seed.unit()).abs() < 1e-12 {
            return Err(FoliationError::InvalidSeed(
                seed.slope.0,
                seed.slope.1,
                "parallel to the unstable eigendirection".into(),
            ));
        }
        Ok(Self {
            model,
            proj,
            eigen,
            seed,
            window,
        })
    }

    pub fn projections(&self) -> &ProjectionPair {
        &self.proj
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn seed(&self) -> SeedLine {
        self.seed
    }

    pub fn model(&self) -> &dyn Endomorphism {
        self.model
    }

    pub fn with_window(&self, window: f64) -> Result<LeafBuilder<'m>, FoliationError> {
        LeafBuilder::new(self.model, self.seed, window)
    }

    fn pull(&self, z: LiftedPoint, s: f64, n: usize) -> Result<Vec2, FoliationError> {
        let q = z
            .shifted(s * self.seed.unit())
            .ok_or(GeometryError::LatticeOverflow)?;
        Ok(lifted_backward_n(self.model, q, n)?.to_cover())
    }

    /// `F_n(p)` restricted to the window, with one vertex beyond each end.
    pub fn backward_leaf(&self, p: CoverPoint, n: usize) -> Result<LeafPolyline, FoliationError> {
        let z = lifted_forward_n(self.model, LiftedPoint::new(p), n)?;
        let sp = self.proj.s(p);
        let w = self.window;
        let ds = self.proj.s(self.seed.unit()).abs();
        let mut smax = 1.5 * w * self.eigen.lambda_s.abs().powi(n as i32) / ds;
        let mut doublings = 0;
        loop {
            let a = self.proj.s(self.pull(z, -smax, n)?) - sp;
            let b = self.proj.s(self.pull(z, smax, n)?) - sp;
            if a.abs() > w && b.abs() > w && a * b < 0.0 {
                break;
            }
            smax *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return Err(FoliationError::DegenerateLeaf(
                    "seed segment never spans the window".into(),
                ));
            }
        }
        const INITIAL: usize = 64;
        let mut pts: Vec<(f64, Vec2)> = (0..=INITIAL)
            .map(|i| {
                let s = -smax + 2.0 * smax * i as f64 / INITIAL as f64;
                Ok((s, self.pull(z, s, n)?))
            })
            .collect::<Result<_, FoliationError>>()?;
        let in_window = |q: Vec2| (self.proj.s(q) - sp).abs() <= w;
        loop {
            let mut out = Vec::with_capacity(pts.len() * 2);
            let mut inserted = false;
            for k in 0..pts.len() - 1 {
                let (s0, a) = pts[k];
                let (s1, b) = pts[k + 1];
                out.push((s0, a));
                if a.distance(b) > MAX_EDGE && (in_window(a) || in_window(b)) {
                    let sm = 0.5 * (s0 + s1);
                    if sm <= s0 || sm >= s1 {
                        return Err(FoliationError::DegenerateLeaf(
                            "parameter resolution exhausted".into(),
                        ));
                    }
                    out.push((sm, self.pull(z, sm, n)?));
                    inserted = true;
                }
            }
            out.push(*pts.last().expect("non-empty"));
            pts = out;
            if !inserted {
                break;
            }
        }
        let mut verts: Vec<Vec2> = pts.into_iter().map(|(_, q)| q).collect();
        if self.proj.s(verts[verts.len() - 1]) < self.proj.s(verts[0]) {
            verts.reverse();
        }
        for k in 1..verts.len() {
            if self.proj.s(verts[k]) <= self.proj.s(verts[k - 1]) {
                return Err(FoliationError::DegenerateLeaf(format!(
                    "fold-over at vertex {k} (π^s not increasing)"
                )));
            }
        }
        // clip to the window keeping one vertex beyond each end
        let first = verts
            .iter()
            .position(|&q| self.proj.s(q) - sp >= -w)
            .unwrap_or(0)
            .saturating_sub(1);
        let last = verts
            .iter()
            .rposition(|&q| self.proj.s(q) - sp <= w)
            .map_or(verts.len() - 1, |i| (i + 1).min(verts.len() - 1));
        let clipped = &verts[first..=last];
        let mut thin: Vec<Vec2> = Vec::with_capacity(clipped.len());
        for (k, &q) in clipped.iter().enumerate() {
            let is_end = k == clipped.len() - 1;
            match thin.last() {
                Some(&prev) if prev.distance(q) < MIN_EDGE && !is_end => {}
                Some(&prev) if prev.distance(q) < MIN_EDGE && thin.len() > 1 => {
                    *thin.last_mut().expect("non-empty") = q;
                }
                _ => thin.push(q),
            }
        }
        Ok(LeafPolyline::new(thin)?)
    }

    /// `π^u` of the leaf over `π^s = s`, by linear interpolation.
    pub fn graph_u(&self, leaf: &LeafPolyline, s: f64) -> Option<f64> {
        let v = leaf.vertices();
        let k = v.partition_point(|&q| self.proj.s(q) < s);
        if k == 0 || k == v.len() {
            let q = v.get(k.min(v.len() - 1))?;
            return (self.proj.s(*q) == s).then(|| self.proj.u(*q));
        }
        let (a, b) = (v[k - 1], v[k]);
        let (sa, sb) = (self.proj.s(a), self.proj.s(b));
        let t = (s - sa) / (sb - sa);
        Some(self.proj.u(a) + t * (self.proj.u(b) - self.proj.u(a)))
    }

    /// `sup |Δπ^u|` at equal `π^s` over the common range of both leaves, within
    /// `[lo, hi]` in `π^s`.
    pub fn graph_distance_in(
        &self,
        a: &LeafPolyline,
        b: &LeafPolyline,
        lo: f64,
        hi: f64,
    ) -> Option<f64> {
        let range = |l: &LeafPolyline| (self.proj.s(l.first()), self.proj.s(l.last()));
        let (a0, a1) = range(a);
        let (b0, b1) = range(b);
        let lo = lo.max(a0).max(b0);
        let hi = hi.min(a1).min(b1);
        if !(hi > lo) {
            return None;
        }
        let mut worst = 0.0f64;
        for &q in a.vertices().iter().chain(b.vertices()) {
            let s = self.proj.s(q);
            if s < lo || s > hi {
                continue;
            }
            let d = (self.graph_u(a, s)? - self.graph_u(b, s)?).abs();
            worst = worst.max(d);
        }
        for s in [lo, hi] {
            worst = worst.max((self.graph_u(a, s)? - self.graph_u(b, s)?).abs());
        }
        Some(worst)
    }

    fn window_distance(&self, p: CoverPoint, a: &LeafPolyline, b: &LeafPolyline) -> Option<f64> {
        let sp = self.proj.s(p);
        self.graph_distance_in(a, b, sp - self.window, sp + self.window)
    }

    /// `F_n(p)` for the first `n ≤ N_MAX` at which successive leaves are within `tol`.
    pub fn center_leaf(&self, p: CoverPoint, tol: f64) -> Result<CenterLeaf, FoliationError> {
        if !(tol > 0.0) {
            return Err(FoliationError::InvalidInput(format!("tolerance {tol}")));
        }
        let mut prev = self.backward_leaf(p, 0)?;
        let mut gap = f64::INFINITY;
        for n in 1..=N_MAX {
            let cur = self.backward_leaf(p, n)?;
            gap = self
                .window_distance(p, &prev, &cur)
                .ok_or_else(|| FoliationError::DegenerateLeaf("leaves do not overlap".into()))?;
            if gap <= tol {
                return Ok(CenterLeaf {
                    base: [p.x, p.y],
                    leaf: cur,
                    depth: n,
                    gap,
                });
            }
            prev = cur;
        }
        Err(FoliationError::Convergence { n: N_MAX, gap })
    }

    /// Centre leaves through several points, all rebuilt at the largest depth any
    /// of them needed, so that they are leaves of one foliation `F_n`.
    pub fn center_leaves(
        &self,
        points: &[CoverPoint],
        tol: f64,
    ) -> Result<Vec<CenterLeaf>, FoliationError> {
        use rayon::prelude::*;
        let first: Vec<CenterLeaf> = points
            .par_iter()
            .map(|&p| self.center_leaf(p, tol))
            .collect::<Result<_, _>>()?;
        let depth = first.iter().map(|c| c.depth).max().unwrap_or(0);
        first
            .into_par_iter()
            .map(|c| {
                if c.depth == depth {
                    return Ok(c);
                }
                let p = Vec2::new(c.base[0], c.base[1]);
                Ok(CenterLeaf {
                    leaf: self.backward_leaf(p, depth)?,
                    depth,
                    ..c
                })
            })
            .collect()
    }

    /// Tangent of `F_n` at `p` from a short chord centred at `p`.
    pub fn leaf_tangent(&self, p: CoverPoint, n: usize) -> Result<Direction, FoliationError> {
        const H: f64 = 1e-5;
        let z = lifted_forward_n(self.model, LiftedPoint::new(p), n)?;
        let ds = self.proj.s(self.seed.unit()).abs();
        let s = H * self.eigen.lambda_s.abs().powi(n as i32) / ds;
        let a = self.pull(z, -s, n)?;
        let b = self.pull(z, s, n)?;
        Ok(Direction::from_vector(b - a))
    }

    /// Hausdorff-type distance between `f(leaf(p))` and the centre leaf through `f(p)`.
    pub fn invariance_defect(&self, c: &CenterLeaf, tol: f64) -> Result<f64, FoliationError> {
        let p = Vec2::new(c.base[0], c.base[1]);
        let image = LeafPolyline::from_points_dedup(
            c.leaf
                .vertices()
                .iter()
                .map(|&q| self.model.lift_apply(q))
                .collect(),
        )?;
        let fp = self.model.lift_apply(p);
        let target = self.center_leaf(fp, tol)?;
        let sp = self.proj.s(fp);
        self.graph_distance_in(&image, &target.leaf, sp - self.window, sp + self.window)
            .ok_or_else(|| FoliationError::DegenerateLeaf("image does not overlap".into()))
    }

    /// `sup |Δπ^u|` between the leaf through `p + v` and the translate of the leaf through `p`.
    pub fn deck_defect(&self, c: &CenterLeaf, v: LatticeVector) -> Result<f64, FoliationError> {
        let p = Vec2::new(c.base[0], c.base[1]);
        let q = p.translate(v);
        let shifted = c.leaf.translated(v.to_vec2());
        let direct = self.backward_leaf(q, c.depth)?;
        let sq = self.proj.s(q);
        self.graph_distance_in(&shifted, &direct, sq - self.window, sq + self.window)
            .ok_or_else(|| FoliationError::DegenerateLeaf("translates do not overlap".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IntMatrix;
    use crate::models::{ConeAxis, PerturbedLinearModel};

    fn model(eps: f64) -> PerturbedLinearModel {
        PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), eps).unwrap()
    }

    fn cone(m: &dyn Endomorphism) -> ConeFamily {
        let v_u = m.linearisation().eigen.unwrap().v_u;
        ConeFamily::new(ConeAxis::Constant(Direction::from_vector(v_u)), 0.3).unwrap()
    }

    #[test]
    fn default_seed_is_anti_diagonal() {
        for eps in [0.0, 0.05] {
            let m = model(eps);
            let s = seed_foliation(&m, &cone(&m), 16).unwrap();
            assert_eq!(s.seed.slope, (1, -1));
            assert!(s.margin > 0.0);
        }
    }

    #[test]
    fn unstable_slope_is_rejected() {
        let m = model(0.0);
        assert!(SeedLine::new(2, 4).is_err());
        // (2, 1) lies inside the cone about v_u
        let s = SeedLine::new(2, 1).unwrap();
        assert!(seed_margin(&m, &cone(&m), s, 8).unwrap() < 0.0);
    }

    #[test]
    fn depth_zero_is_the_seed_segment() {
        let m = model(0.05);
        let b = LeafBuilder::new(&m, SeedLine::new(1, -1).unwrap(), 0.5).unwrap();
        let p = Vec2::new(0.3, 0.4);
        let l = b.backward_leaf(p, 0).unwrap();
        let d = SeedLine::new(1, -1).unwrap().unit();
        for &q in l.vertices() {
            assert!((q - p).cross(d).abs() < 1e-12);
        }
        assert!(l.max_edge() <= MAX_EDGE);
    }

    #[test]
    fn linear_leaves_turn_towards_the_stable_direction() {
        let m = model(0.0);
        let b = LeafBuilder::new(&m, SeedLine::new(1, -1).unwrap(), 1.0).unwrap();
        let e = m.linearisation().eigen.unwrap();
        let vs = Direction::from_vector(e.v_s);
        let p = Vec2::new(0.2, 0.1);
        let d0 = b.leaf_tangent(p, 0).unwrap().distance(vs);
        let d10 = b.leaf_tangent(p, 10).unwrap().distance(vs);
        let r = (e.lambda_s / e.lambda_u).abs().powi(10);
        assert!(d10 <= r * d0 * 1.2 + 1e-12, "{d10} vs {}", r * d0);
    }

    #[test]
    fn perturbed_leaf_tangents_match_iterated_center_direction() {
        let m = model(0.05);
        let b = LeafBuilder::new(&m, SeedLine::new(1, -1).unwrap(), 1.0).unwrap();
        for p in [Vec2::new(0.2, 0.1), Vec2::new(0.7, 0.55)] {
            let t = b.leaf_tangent(p, 10).unwrap();
            let e = direction_by_iteration(&m, p, IterationMode::Center, 40).unwrap();
            assert!(t.distance(e) < 1e-3);
        }
    }

    #[test]
    fn linear_unstable_direction_is_the_eigenvector() {
        let m = model(0.0);
        let e = m.linearisation().eigen.unwrap();
        let d =
            direction_by_iteration(&m, Vec2::new(0.3, 0.8), IterationMode::Unstable, 20).unwrap();
        assert!(d.distance(Direction::from_vector(e.v_u)) < 1e-12);
    }

    #[test]
    fn unstable_field_is_invariant() {
        let m = model(0.05);
        for p in [Vec2::new(0.1, 0.2), Vec2::new(0.6, 0.9)] {
            let d = direction_by_iteration(&m, p, IterationMode::Unstable, 20).unwrap();
            let img = m.jacobian_at(p).apply(d.unit());
            let fp = m.lift_apply(p);
            let e = direction_by_iteration(&m, fp, IterationMode::Unstable, 20).unwrap();
            assert!(Direction::from_vector(img).distance(e) <= 1e-5);
        }
    }

    #[test]
    fn center_leaf_converges_and_is_invariant() {
        let m = model(0.05);
        let b = LeafBuilder::new(&m, SeedLine::new(1, -1).unwrap(), 1.0).unwrap();
        let c = b.center_leaf(Vec2::new(0.4, 0.3), 1e-4).unwrap();
        assert!(c.gap <= 1e-4 && c.depth <= N_MAX);
        let d = b.invariance_defect(&c, 1e-4).unwrap();
        assert!(d <= 2e-4, "{d}");
        let dd = b.deck_defect(&c, LatticeVector::new(1, -2)).unwrap();
        assert!(dd <= 2e-4, "{dd}");
    }

    #[test]
    fn linear_center_leaf_is_the_stable_line() {
        let m = model(0.0);
        let b = LeafBuilder::new(&m, SeedLine::new(1, -1).unwrap(), 1.0).unwrap();
        let p = Vec2::new(0.4, 0.3);
        let l = b.backward_leaf(p, 20).unwrap();
        let proj = b.projections();
        for &q in l.vertices() {
            assert!((proj.u(q) - proj.u(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_leaf_is_a_line_for_the_linear_map() {
        let m = model(0.0);
        let p = Vec2::new(0.1, 0.5);
        let l = unstable_leaf(&m, p, 1.0).unwrap();
        let proj = projections(m.linearisation()).unwrap();
        for &q in l.vertices() {
            assert!((proj.s(q) - proj.s(p)).abs() < 1e-12);
        }
        assert!((l.total_length() - 1.0).abs() < 1e-9);
    }
}
