//! Integral curves of `E^c`: the σ-curves `y ↦ (x₀ + γ(y) − γ(y₀), y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{circle_distance, AnalysisError, IncoherentAnalysis};
use crate::geometry::{Direction, TorusPoint, Vec2};
use crate::polyline::LeafPolyline;

/// Tangency tolerance for certified centre curves.
pub const CERTIFICATE_TOL: f64 = 1e-4;
/// Arclength step of the centre-field integrator.
pub const ODE_STEP: f64 = 1e-3;

const CERT_HALF_WIDTH: f64 = 0.25;
const CERT_SAMPLES: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct BranchingCertificate {
    pub touch_point: [f64; 2],
    pub curve_a: LeafPolyline,
    pub curve_b: LeafPolyline,
    pub separation: f64,
    pub max_tangency_defect: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub samples: usize,
    pub arclength: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// A curve of the branching-foliation picture, ending at its contact with `y = 1/2`.
#[derive(Debug, Clone, Serialize)]
pub struct FigureCurve {
    pub start: [f64; 2],
    pub curve: LeafPolyline,
    /// Angle of `E^c` to the horizontal at the last sample before contact.
    pub contact_tangent_angle: f64,
    /// Angle of the final chord to the horizontal.
    pub contact_chord_angle: f64,
}

/// `y` values from `from` towards `to`, clustered quadratically (power `pow`) at `to`.
fn graded(from: f64, to: f64, n: usize, pow: i32) -> Vec<f64> {
    (0..=n)
        .map(|j| to + (from - to) * (1.0 - j as f64 / n as f64).powi(pow))
        .collect()
}

impl IncoherentAnalysis {
    /// `x`-coordinate at height `y` of the σ-curve through `p` (on the cover).
    pub fn sigma_x(&self, p: Vec2, y: f64) -> f64 {
        let g = self.series();
        p.x + g.gamma(y).value - g.gamma(p.y).value
    }

    /// σ-curve through `p` over `y ∈ [y0, y1]`, `samples` equal steps.
    pub fn sigma_curve_over(
        &self,
        p: Vec2,
        y0: f64,
        y1: f64,
        samples: usize,
    ) -> Result<LeafPolyline, AnalysisError> {
        if samples < 2 || !(y1 > y0) {
            return Err(AnalysisError::InvalidInput(format!(
                "σ-curve needs samples ≥ 2 and y1 > y0, got {samples}, [{y0}, {y1}]"
            )));
        }
        let pts = (0..samples)
            .map(|i| {
                let y = y0 + (y1 - y0) * i as f64 / (samples - 1) as f64;
                Vec2::new(self.sigma_x(p, y), y)
            })
            .collect();
        LeafPolyline::new(pts).map_err(|e| AnalysisError::InvalidInput(e.to_string()))
    }

    /// σ-curve through `p`, one turn in `y` starting at `p`.
    pub fn sigma_curve(
        &self,
        p: TorusPoint,
        samples: usize,
    ) -> Result<LeafPolyline, AnalysisError> {
        let c = p.to_cover();
        self.sigma_curve_over(c, c.y, c.y + 1.0, samples)
    }

    /// Largest angle between chords of `curve` and the exact `E^c` at chord midpoints,
    /// over chords whose midpoint satisfies `keep`.
    pub fn tangency_defect<F: Fn(f64) -> bool>(
        &self,
        curve: &LeafPolyline,
        keep: F,
    ) -> Result<f64, AnalysisError> {
        let mut worst = 0.0f64;
        for (a, b) in curve.segments() {
            let mid = 0.5 * (a.y + b.y);
            if !keep(mid) {
                continue;
            }
            let chord = Direction::from_vector(b - a);
            let field = if circle_distance(mid, 0.5) == 0.0 {
                Direction::HORIZONTAL
            } else {
                self.center_direction_exact(mid)?
            };
            worst = worst.max(chord.distance(field));
        }
        Ok(worst)
    }

    /// Two distinct centre curves through `(x0, 1/2)`: the circle and a σ-curve.
    pub fn branching_certificate(&self, x0: f64) -> Result<BranchingCertificate, AnalysisError> {
        let touch = Vec2::new(x0, 0.5);
        let curve_a = LeafPolyline::new(
            (0..=CERT_SAMPLES)
                .map(|i| Vec2::new(x0 - 0.5 + i as f64 / CERT_SAMPLES as f64, 0.5))
                .collect(),
        )
        .map_err(|e| AnalysisError::CertificateFailure(e.to_string()))?;
        let mut ys = graded(0.5 - CERT_HALF_WIDTH, 0.5, CERT_SAMPLES, 4);
        let upper = graded(0.5 + CERT_HALF_WIDTH, 0.5, CERT_SAMPLES, 4);
        ys.extend(upper.into_iter().rev().skip(1));
        let pts = ys
            .iter()
            .map(|&y| Vec2::new(self.sigma_x(touch, y), y))
            .collect();
        let curve_b = LeafPolyline::from_points_dedup(pts)
            .map_err(|e| AnalysisError::CertificateFailure(e.to_string()))?;
        let through = curve_b.vertices().iter().any(|v| v.distance(touch) == 0.0);
        if !through {
            return Err(AnalysisError::CertificateFailure(
                "σ-curve misses the touch point".into(),
            ));
        }
        let da = self.tangency_defect(&curve_a, |_| true)?;
        let db = self.tangency_defect(&curve_b, |_| true)?;
        let max_tangency_defect = da.max(db);
        if max_tangency_defect > CERTIFICATE_TOL {
            return Err(AnalysisError::CertificateFailure(format!(
                "tangency defect {max_tangency_defect:e} exceeds {CERTIFICATE_TOL:e} at depth {}",
                self.series().depth()
            )));
        }
        let separation = curve_b
            .vertices()
            .iter()
            .map(|v| (v.y - 0.5).abs())
            .fold(0.0, f64::max);
        if separation <= 0.0 {
            return Err(AnalysisError::CertificateFailure("curves coincide".into()));
        }
        Ok(BranchingCertificate {
            touch_point: [touch.x.rem_euclid(1.0), 0.5],
            curve_a,
            curve_b,
            separation,
            max_tangency_defect,
            tolerance: CERTIFICATE_TOL,
        })
    }

    fn field(&self, p: Vec2, sign: f64) -> Result<Vec2, AnalysisError> {
        let gp = self.series().gamma_prime(p.y, 0.0)?.value;
        Ok(sign * Vec2::new(gp, 1.0).normalized())
    }

    /// Fourth-order integration of the oriented `E^c` field in arclength, moving
    /// away from `y = 1/2`.
    pub fn integrate_center_curve(
        &self,
        p: Vec2,
        length: f64,
        step: f64,
    ) -> Result<Vec<Vec2>, AnalysisError> {
        let yr = p.y.rem_euclid(1.0);
        let sign = if yr > 0.5 { 1.0 } else { -1.0 };
        let steps = (length / step).round().max(1.0) as usize;
        let mut out = Vec::with_capacity(steps + 1);
        let mut q = p;
        out.push(q);
        for _ in 0..steps {
            let k1 = self.field(q, sign)?;
            let k2 = self.field(q + (0.5 * step) * k1, sign)?;
            let k3 = self.field(q + (0.5 * step) * k2, sign)?;
            let k4 = self.field(q + step * k3, sign)?;
            q += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            out.push(q);
        }
        Ok(out)
    }

    /// Integrates `E^c` from random points off `y = 1/2` and compares with the σ-curves.
    pub fn uniqueness_report(
        &self,
        samples: usize,
        seed: u64,
        arclength: f64,
        tolerance: f64,
    ) -> UniquenessReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::with_capacity(samples);
        while pts.len() < samples {
            let p = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
            if circle_distance(p.y, 0.5) >= self.delta() {
                pts.push(p);
            }
        }
        let dev: Vec<f64> = pts
            .par_iter()
            .map(
                |&p| match self.integrate_center_curve(p, arclength, ODE_STEP) {
                    Ok(path) => path
                        .iter()
                        .map(|q| (q.x - self.sigma_x(p, q.y)).abs())
                        .fold(0.0, f64::max),
                    Err(_) => f64::INFINITY,
                },
            )
            .collect();
        let max_deviation = dev.into_iter().fold(0.0, f64::max);
        UniquenessReport {
            samples,
            arclength,
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }
}

/// σ-curves from `(k/n, 0)` up to `y = 1/2` and from `(k/n, 1)` down to `y = 1/2`.
///
/// Both families are returned on the cover; lower curves first.
pub fn figure_curves(
    analysis: &IncoherentAnalysis,
    per_side: usize,
    samples: usize,
) -> Result<Vec<FigureCurve>, AnalysisError> {
    let mut out = Vec::with_capacity(2 * per_side);
    for (from, to) in [(0.0, 0.5), (1.0, 0.5)] {
        for k in 0..per_side {
            let start = Vec2::new(k as f64 / per_side as f64, from);
            let pts = graded(from, to, samples, 2)
                .into_iter()
                .map(|y| Vec2::new(analysis.sigma_x(start, y), y))
                .collect();
            let curve = LeafPolyline::from_points_dedup(pts)
                .map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
            let n = curve.len();
            let last = curve.vertices()[n - 2];
            let contact = curve.vertices()[n - 1];
            let contact_tangent_angle = analysis
                .center_direction_exact(last.y)?
                .distance(Direction::HORIZONTAL);
            let contact_chord_angle =
                Direction::from_vector(contact - last).distance(Direction::HORIZONTAL);
            out.push(FigureCurve {
                start: [start.x, start.y],
                curve,
                contact_tangent_angle,
                contact_chord_angle,
            });
        }
    }
    Ok(out)
}
