//! The averaged leaf conjugacy `h` built from centre leaves and the semiconjugacy.
//!
//! For a centre leaf `L` with arclength parametrisation `α` oriented by increasing
//! `π^s`, `h(α(s))` is the point of the line `{π^u = H^u(α(s))}` with
//! `π^s h(α(s)) = (1/T)∫₀ᵀ π^s α(s + t) dt`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::foliation::{CenterLeaf, FoliationError, LeafBuilder};
use crate::geometry::{CoverPoint, ProjectionPair, Vec2};
use crate::polyline::{LeafPolyline, PolylineError};
use crate::semiconjugacy::{SemiconjugacyApprox, SemiconjugacyError};

pub const T_RESOLUTION: f64 = 1e-3;
pub const T_SAFETY: f64 = 1.1;
/// Quadrature steps per averaging window.
pub const QUAD_STEPS: usize = 200;
/// Half-width of the central difference in the derivative check.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjugacyError {
    #[error("leaves too short to certify T (longest usable half-length {available})")]
    InsufficientWindow { available: f64 },
    #[error("leaf must extend {needed} beyond the point, only {available} available")]
    ExtensionRequired { needed: f64, available: f64 },
    #[error("point is {distance:e} away from the leaf")]
    PointOffLeaf { distance: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Semiconjugacy(#[from] SemiconjugacyError),
    #[error(transparent)]
    Foliation(#[from] FoliationError),
    #[error(transparent)]
    Polyline(#[from] PolylineError),
}

/// A leaf parametrised by arclength, increasing in `π^s`, with `α(0)` at `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArclengthLeaf {
    leaf: LeafPolyline,
    offset: f64,
}

impl ArclengthLeaf {
    pub fn new(leaf: LeafPolyline, proj: &ProjectionPair) -> Self {
        let leaf = if proj.s(leaf.last()) < proj.s(leaf.first()) {
            leaf.reversed()
        } else {
            leaf
        };
        Self { leaf, offset: 0.0 }
    }

    /// Moves the origin of the parameter to arclength `offset` from the start.
    pub fn rebased(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn polyline(&self) -> &LeafPolyline {
        &self.leaf
    }

    pub fn start(&self) -> f64 {
        -self.offset
    }

    pub fn end(&self) -> f64 {
        self.leaf.total_length() - self.offset
    }

    pub fn length(&self) -> f64 {
        self.leaf.total_length()
    }

    pub fn alpha(&self, s: f64) -> CoverPoint {
        self.leaf.point_at(s + self.offset)
    }

    /// Parameter of the closest point of the leaf to `p`, with the distance.
    pub fn parameter_of(&self, p: CoverPoint) -> (f64, f64) {
        let v = self.leaf.vertices();
        let arc = self.leaf.arclength();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..v.len() - 1 {
            let d = v[i + 1] - v[i];
            let t = ((p - v[i]).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            let dist = p.distance(v[i] + t * d);
            if dist < best.1 {
                best = (arc[i] + t * (arc[i + 1] - arc[i]), dist);
            }
        }
        (best.0 - self.offset, best.1)
    }

    /// Arclength parameters of the vertices.
    fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        self.leaf.arclength().iter().map(move |a| a - self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TEstimate {
    /// Smallest certified length, to `T_RESOLUTION`.
    pub raw: f64,
    /// `raw` times the safety factor.
    pub t: f64,
    pub subsegments: usize,
}

fn gap_ok(leaves: &[ArclengthLeaf], proj: &ProjectionPair, t: f64) -> (bool, usize) {
    let mut count = 0;
    for l in leaves {
        for a in l.knots() {
            if a + t > l.end() {
                break;
            }
            count += 1;
            if proj.s(l.alpha(a + t)) - proj.s(l.alpha(a)) <= 1.0 {
                return (false, count);
            }
        }
    }
    (true, count)
}

/// Smallest `T` such that every sampled subsegment of length `T` has `π^s`-gap above 1.
///
/// Only lengths up to half the shortest leaf are considered, so every leaf
/// contributes subsegments at every candidate.
pub fn estimate_t(
    leaves: &[ArclengthLeaf],
    proj: &ProjectionPair,
) -> Result<TEstimate, ConjugacyError> {
    let hi0 = leaves
        .iter()
        .map(|l| 0.5 * l.length())
        .fold(f64::INFINITY, f64::min);
    if leaves.is_empty() || !(hi0 > T_RESOLUTION) {
        return Err(ConjugacyError::InsufficientWindow {
            available: if hi0.is_finite() { hi0 } else { 0.0 },
        });
    }
    if !gap_ok(leaves, proj, hi0).0 {
        return Err(ConjugacyError::InsufficientWindow { available: hi0 });
    }
    let (mut lo, mut hi) = (0.0, hi0);
    while hi - lo > T_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if gap_ok(leaves, proj, mid).0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TEstimate {
        raw: hi,
        t: T_SAFETY * hi,
        subsegments: gap_ok(leaves, proj, hi).1,
    })
}

/// `(1/T)∫₀ᵀ π^s α(s + t) dt` by composite Simpson, with panels split at vertices.
fn average_s(
    leaf: &ArclengthLeaf,
    proj: &ProjectionPair,
    s: f64,
    t: f64,
    step: f64,
) -> Result<f64, ConjugacyError> {
    if s + t > leaf.end() + 1e-12 {
        return Err(ConjugacyError::ExtensionRequired {
            needed: t,
            available: leaf.end() - s,
        });
    }
    let mut breaks = vec![s];
    breaks.extend(leaf.knots().filter(|&k| k > s && k < s + t));
    breaks.push(s + t);
    let f = |x: f64| proj.s(leaf.alpha(x));
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / m as f64;
        for k in 0..m {
            let x0 = a + k as f64 * h;
            total += h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
        }
    }
    Ok(total / t)
}

/// `h(p)` for `p` on the leaf, with quadrature step `T / steps`.
pub fn average_with_steps(
    approx: &SemiconjugacyApprox<'_>,
    leaf: &ArclengthLeaf,
    p: CoverPoint,
    t: f64,
    steps: usize,
) -> Result<CoverPoint, ConjugacyError> {
    if !(t > 0.0) || steps == 0 {
        return Err(ConjugacyError::InvalidInput(format!(
            "T = {t}, steps = {steps}"
        )));
    }
    let (s, dist) = leaf.parameter_of(p);
    if dist > 1e-9 {
        return Err(ConjugacyError::PointOffLeaf { distance: dist });
    }
    let proj = approx.projections();
    let i = average_s(leaf, proj, s, t, t / steps as f64)?;
    Ok(proj.point(i, approx.h_u(p)))
}

pub fn average_along_leaf(
    approx: &SemiconjugacyApprox<'_>,
    leaf: &ArclengthLeaf,
    p: CoverPoint,
    t: f64,
) -> Result<CoverPoint, ConjugacyError> {
    average_with_steps(approx, leaf, p, t, QUAD_STEPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugacySample {
    pub leaf_id: usize,
    pub s: f64,
    pub p: [f64; 2],
    pub h: [f64; 2],
    pub t_used: f64,
}

/// `per_leaf` evenly spaced samples on each leaf, leaving room for the window `T`.
pub fn h_samples(
    approx: &SemiconjugacyApprox<'_>,
    leaves: &[ArclengthLeaf],
    per_leaf: usize,
    t: f64,
) -> Result<Vec<ConjugacySample>, ConjugacyError> {
    let per_leaf = per_leaf.max(1);
    let proj = approx.projections();
    let nested: Vec<Vec<ConjugacySample>> = leaves
        .par_iter()
        .enumerate()
        .map(|(id, l)| {
            let lo = l.start() + 2.0 * FD_STEP;
            let hi = l.end() - t - 2.0 * FD_STEP;
            if hi < lo {
                return Err(ConjugacyError::ExtensionRequired {
                    needed: t + 4.0 * FD_STEP,
                    available: l.length(),
                });
            }
            (0..per_leaf)
                .map(|k| {
                    let s = if per_leaf == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * k as f64 / (per_leaf - 1) as f64
                    };
                    let p = l.alpha(s);
                    let i = average_s(l, proj, s, t, t / QUAD_STEPS as f64)?;
                    let h = proj.point(i, approx.h_u(p));
                    Ok(ConjugacySample {
                        leaf_id: id,
                        s,
                        p: [p.x, p.y],
                        h: [h.x, h.y],
                        t_used: t,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Index into the sample list of the worst offender.
    pub worst_sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacyReport {
    pub t: f64,
    pub samples: usize,
    pub leaf_to_leaf: CheckResult,
    pub equivariance: CheckResult,
    pub monotonicity: CheckResult,
    pub injectivity: CheckResult,
    pub passed: bool,
}

pub struct ConjugacyInputs<'a> {
    pub centers: &'a [CenterLeaf],
    pub samples: &'a [ConjugacySample],
    pub t: f64,
    /// Tolerance for leaf-to-leaf and equivariance.
    pub tolerance: f64,
    /// Convergence tolerance for the image leaves in the equivariance check.
    pub leaf_tolerance: f64,
}

fn label_of(approx: &SemiconjugacyApprox<'_>, leaf: &LeafPolyline, n: usize) -> f64 {
    let len = leaf.total_length();
    let sum: f64 = (0..n)
        .map(|k| approx.h_u(leaf.point_at(len * (k as f64 + 0.5) / n as f64)))
        .sum();
    sum / n as f64
}

/// Leaf-to-leaf, leaf-level equivariance, derivative lower bound and injectivity.
pub fn conjugacy_checks(
    approx: &SemiconjugacyApprox<'_>,
    builder: &LeafBuilder<'_>,
    inputs: &ConjugacyInputs<'_>,
) -> Result<ConjugacyReport, ConjugacyError> {
    let proj = *approx.projections();
    let t = inputs.t;
    let tol = inputs.tolerance;
    let samples = inputs.samples;
    let leaves: Vec<ArclengthLeaf> = inputs
        .centers
        .iter()
        .map(|c| ArclengthLeaf::new(c.leaf.clone(), &proj))
        .collect();
    let n_leaves = leaves.len();

    // (i) one A^s-line per leaf
    let mut by_leaf: Vec<Vec<usize>> = vec![Vec::new(); n_leaves];
    for (k, smp) in samples.iter().enumerate() {
        if smp.leaf_id >= n_leaves {
            return Err(ConjugacyError::InvalidInput(format!(
                "sample {k} refers to leaf {}",
                smp.leaf_id
            )));
        }
        by_leaf[smp.leaf_id].push(k);
    }
    let hu = |k: usize| proj.u(Vec2::new(samples[k].h[0], samples[k].h[1]));
    let mut spread = (0.0f64, None);
    for ids in &by_leaf {
        if ids.is_empty() {
            continue;
        }
        let mut us: Vec<f64> = ids.iter().map(|&k| hu(k)).collect();
        us.sort_by(f64::total_cmp);
        let median = us[us.len() / 2];
        let lo = us[0];
        let hi = us[us.len() - 1];
        if hi - lo > spread.0 {
            let worst = *ids
                .iter()
                .max_by(|&&a, &&b| (hu(a) - median).abs().total_cmp(&(hu(b) - median).abs()))
                .expect("non-empty");
            spread = (hi - lo, Some(worst));
        }
    }
    let leaf_to_leaf = CheckResult {
        name: "leaf_to_leaf".into(),
        value: spread.0,
        tolerance: tol,
        passed: spread.0 <= tol,
        worst_sample: spread.1,
    };

    // (ii) A maps the h-line of L to the h-line of the leaf through f(L)
    let lu = approx.eigen().lambda_u;
    let model = approx.model();
    let defects: Vec<(f64, Option<usize>)> = inputs
        .centers
        .par_iter()
        .enumerate()
        .map(|(id, c)| {
            let ids = &by_leaf[id];
            if ids.is_empty() {
                return Ok((0.0, None));
            }
            let label = ids.iter().map(|&k| hu(k)).sum::<f64>() / ids.len() as f64;
            let fp = model.lift_apply(Vec2::new(c.base[0], c.base[1]));
            let image = builder.center_leaf(fp, inputs.leaf_tolerance)?;
            let target = label_of(approx, &image.leaf, ids.len().max(8));
            Ok(((lu * label - target).abs(), Some(ids[0])))
        })
        .collect::<Result<_, ConjugacyError>>()?;
    let eq = defects
        .iter()
        .copied()
        .fold((0.0f64, None), |a, b| if b.0 > a.0 { b } else { a });
    let equivariance = CheckResult {
        name: "equivariance".into(),
        value: eq.0,
        tolerance: tol,
        passed: eq.0 <= tol,
        worst_sample: eq.1,
    };

    // (iii) d/ds π^s h α(s) ≥ 1/T − 1e-6
    let derivs: Vec<Option<f64>> = samples
        .par_iter()
        .map(|smp| {
            let l = &leaves[smp.leaf_id];
            if smp.s - FD_STEP < l.start() || smp.s + FD_STEP + t > l.end() {
                return Ok(None);
            }
            let step = t / QUAD_STEPS as f64;
            let a = average_s(l, &proj, smp.s - FD_STEP, t, step)?;
            let b = average_s(l, &proj, smp.s + FD_STEP, t, step)?;
            Ok(Some((b - a) / (2.0 * FD_STEP)))
        })
        .collect::<Result<_, ConjugacyError>>()?;
    let mut dmin = (f64::INFINITY, None);
    for (k, d) in derivs.iter().enumerate() {
        if let Some(d) = d {
            if *d < dmin.0 {
                dmin = (*d, Some(k));
            }
        }
    }
    let bound = 1.0 / t - 1e-6;
    let monotonicity = CheckResult {
        name: "derivative_lower_bound".into(),
        value: dmin.0,
        tolerance: bound,
        passed: dmin.1.is_some() && dmin.0 >= bound,
        worst_sample: dmin.1,
    };

    // (iv) distinct samples on distinct leaves have distinct images
    let pts: Vec<Vec2> = samples.iter().map(|s| Vec2::new(s.h[0], s.h[1])).collect();
    let closest: (f64, Option<usize>) = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, None);
            for j in i + 1..pts.len() {
                if samples[i].leaf_id != samples[j].leaf_id {
                    let d = pts[i].distance(pts[j]);
                    if d < best.0 {
                        best = (d, Some(i));
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, None),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let injectivity = CheckResult {
        name: "injectivity".into(),
        value: closest.0,
        tolerance: 1e-12,
        passed: closest.0 > 1e-12,
        worst_sample: closest.1,
    };

    let passed =
        leaf_to_leaf.passed && equivariance.passed && monotonicity.passed && injectivity.passed;
    Ok(ConjugacyReport {
        t,
        samples: samples.len(),
        leaf_to_leaf,
        equivariance,
        monotonicity,
        injectivity,
        passed,
    })
}
