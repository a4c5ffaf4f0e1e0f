//! Invariant bundles, partial hyperbolicity and branching centre curves of the
//! incoherent model.

mod curves;
mod series;

pub use curves::{
    figure_curves, BranchingCertificate, FigureCurve, UniquenessReport, CERTIFICATE_TOL, ODE_STEP,
};
pub use series::{CohomologyResidual, CohomologySeries, SeriesTruncation, SeriesValue};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Direction, TorusPoint, Vec2};
use crate::models::{Endomorphism, IncoherentModel, ModelError};

pub const DEFAULT_DEPTH: usize = 40;
pub const DEFAULT_DELTA: f64 = 0.02;

/// One of the two invariant circles `y = 0` and `y = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Circle {
    Zero,
    Half,
}

impl Circle {
    pub fn y(self) -> f64 {
        match self {
            Circle::Zero => 0.0,
            Circle::Half => 0.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("y = {y} lies within {delta} of the singular circle y = {}", .circle.y())]
    SingularInput { y: f64, circle: Circle, delta: f64 },
    #[error("tail bound {tail_bound} is not finite at depth {depth}")]
    InsufficientDepth { depth: usize, tail_bound: f64 },
    #[error("certificate construction failed: {0}")]
    CertificateFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Distance on the circle `R/Z`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// A bundle direction; `snapped` marks the horizontal limit used near the singular circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundleDirection {
    pub direction: Direction,
    pub snapped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundleSample {
    pub point: [f64; 2],
    pub e_u: BundleDirection,
    pub e_c: BundleDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleStretch {
    pub y: f64,
    pub unstable_stretch: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhReport {
    pub grid_n: usize,
    pub depth: usize,
    pub min_unstable_stretch: f64,
    pub max_ratio: f64,
    pub circles: Vec<CircleStretch>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub grid_n: usize,
    pub min_angle: f64,
    pub worst_point: [f64; 2],
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohomologyReport {
    pub samples: usize,
    pub depth: usize,
    pub gamma_max_residual: f64,
    pub gamma_bound: f64,
    pub beta_max_excess: f64,
    pub beta_max_residual: f64,
    pub beta_worst_y: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct IncoherentAnalysis {
    model: IncoherentModel,
    series: CohomologySeries,
    delta: f64,
}

impl IncoherentAnalysis {
    pub fn new(model: IncoherentModel, depth: usize, delta: f64) -> Result<Self, AnalysisError> {
        if !(delta.is_finite() && delta > 0.0 && delta < 0.25) {
            return Err(AnalysisError::InvalidInput(format!(
                "exclusion radius {delta} must lie in (0, 1/4)"
            )));
        }
        let series = CohomologySeries::new(*model.psi(), depth)?;
        Ok(Self {
            model,
            series,
            delta,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(IncoherentModel::default(), DEFAULT_DEPTH, DEFAULT_DELTA)
            .expect("defaults are valid")
    }

    pub fn model(&self) -> &IncoherentModel {
        &self.model
    }

    pub fn series(&self) -> &CohomologySeries {
        &self.series
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `E^c` spanned by `(γ'(y), 1)`, horizontal within `δ` of `y = 1/2`.
    pub fn center_direction(&self, p: TorusPoint) -> BundleDirection {
        match self.series.gamma_prime(p.y(), self.delta) {
            Ok(v) => BundleDirection {
                direction: Direction::from_vector(Vec2::new(v.value, 1.0)),
                snapped: false,
            },
            Err(_) => BundleDirection {
                direction: Direction::HORIZONTAL,
                snapped: true,
            },
        }
    }

    /// `E^u` spanned by `(β'(y), 1)`, horizontal within `δ` of `y = 0`.
    pub fn unstable_direction(&self, p: TorusPoint) -> BundleDirection {
        match self.series.beta_prime(p.y(), self.delta) {
            Ok(v) => BundleDirection {
                direction: Direction::from_vector(Vec2::new(v.value, 1.0)),
                snapped: false,
            },
            Err(_) => BundleDirection {
                direction: Direction::HORIZONTAL,
                snapped: true,
            },
        }
    }

    /// `E^c` from the series at any `y ≠ 1/2`, ignoring the exclusion radius.
    pub fn center_direction_exact(&self, y: f64) -> Result<Direction, AnalysisError> {
        let v = self.series.gamma_prime(y, 0.0)?;
        Ok(Direction::from_vector(Vec2::new(v.value, 1.0)))
    }

    pub fn bundle_sample(&self, p: TorusPoint) -> BundleSample {
        BundleSample {
            point: [p.x(), p.y()],
            e_u: self.unstable_direction(p),
            e_c: self.center_direction(p),
        }
    }

    fn bundle_residual(&self, p: TorusPoint, circle: Circle) -> Result<f64, AnalysisError> {
        let q = self.model.apply_torus(p);
        let dir = |t: TorusPoint| match circle {
            Circle::Half => self.center_direction(t),
            Circle::Zero => self.unstable_direction(t),
        };
        let (dp, dq) = (dir(p), dir(q));
        // on the circle itself both directions are exactly horizontal
        let exact_circle = p.y() == circle.y() && q.y() == circle.y();
        if (dp.snapped || dq.snapped) && !exact_circle {
            let y = if dp.snapped { p.y() } else { q.y() };
            return Err(AnalysisError::SingularInput {
                y,
                circle,
                delta: self.delta,
            });
        }
        let image = self.model.jacobian(p).apply(dp.direction.unit());
        Ok(Direction::from_vector(image).distance(dq.direction))
    }

    /// `max_i ∠(Df_p E^i(p), E^i(f p))` over `i ∈ {c, u}`.
    pub fn splitting_invariance_residual(&self, p: TorusPoint) -> Result<f64, AnalysisError> {
        let c = self.bundle_residual(p, Circle::Half)?;
        let u = self.bundle_residual(p, Circle::Zero)?;
        Ok(c.max(u))
    }

    /// Whether `p` and `f(p)` are clear of both singular circles.
    pub fn is_regular(&self, p: TorusPoint) -> bool {
        let q = self.model.apply_torus(p);
        [p.y(), q.y()].iter().all(|&y| {
            circle_distance(y, 0.0) >= self.delta && circle_distance(y, 0.5) >= self.delta
        })
    }

    pub fn random_regular_points(&self, n: usize, seed: u64) -> Vec<TorusPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p = TorusPoint::new(rng.gen::<f64>(), rng.gen::<f64>());
            if self.is_regular(p) {
                out.push(p);
            }
        }
        out
    }

    pub fn invariance_report(&self, n: usize, seed: u64, tolerance: f64) -> InvarianceReport {
        let pts = self.random_regular_points(n, seed);
        let res: Vec<f64> = pts
            .par_iter()
            .map(|&p| {
                self.splitting_invariance_residual(p)
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        let max_residual = res.into_iter().fold(0.0, f64::max);
        InvarianceReport {
            samples: n,
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
        }
    }

    fn stretches(&self, p: TorusPoint) -> (f64, f64) {
        let j = self.model.jacobian(p);
        let u = j.apply(self.unstable_direction(p).direction.unit()).norm();
        let c = j.apply(self.center_direction(p).direction.unit()).norm();
        (u, c)
    }

    /// `‖Df|E^u‖` and `‖Df|E^c‖/‖Df|E^u‖` over a grid and on both invariant circles.
    pub fn ph_inequality_report(&self, grid_n: usize) -> PhReport {
        let grid_n = grid_n.max(2);
        let rows: Vec<(f64, f64)> = (0..grid_n)
            .into_par_iter()
            .map(|j| {
                let y = j as f64 / grid_n as f64;
                let mut min_u = f64::INFINITY;
                let mut max_r = 0.0f64;
                for i in 0..grid_n {
                    let p = TorusPoint::new(i as f64 / grid_n as f64, y);
                    let (u, c) = self.stretches(p);
                    min_u = min_u.min(u);
                    max_r = max_r.max(c / u);
                }
                (min_u, max_r)
            })
            .collect();
        let min_unstable_stretch = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let max_ratio = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let circles: Vec<CircleStretch> = [0.0, 0.5]
            .iter()
            .map(|&y| {
                let (u, c) = self.stretches(TorusPoint::new(0.0, y));
                CircleStretch {
                    y,
                    unstable_stretch: u,
                    ratio: c / u,
                }
            })
            .collect();
        let circles_ok = circles
            .iter()
            .all(|c| c.unstable_stretch > 1.0 && c.ratio < 1.0);
        PhReport {
            grid_n,
            depth: self.series.depth(),
            min_unstable_stretch,
            max_ratio,
            passed: circles_ok && min_unstable_stretch > 1.0 && max_ratio < 1.0,
            circles,
        }
    }

    pub fn transversality_report(&self, grid_n: usize, tolerance: f64) -> TransversalityReport {
        let grid_n = grid_n.max(2);
        let rows: Vec<(f64, [f64; 2])> = (0..grid_n)
            .into_par_iter()
            .map(|j| {
                let y = j as f64 / grid_n as f64;
                let mut best = (f64::INFINITY, [0.0, y]);
                for i in 0..grid_n {
                    let p = TorusPoint::new(i as f64 / grid_n as f64, y);
                    let s = self.bundle_sample(p);
                    let a = s.e_u.direction.distance(s.e_c.direction);
                    if a < best.0 {
                        best = (a, [p.x(), p.y()]);
                    }
                }
                best
            })
            .collect();
        let (min_angle, worst_point) = rows.into_iter().fold(
            (f64::INFINITY, [0.0, 0.0]),
            |a, b| if b.0 < a.0 { b } else { a },
        );
        TransversalityReport {
            grid_n,
            min_angle,
            worst_point,
            tolerance,
            passed: min_angle >= tolerance,
        }
    }

    /// Cohomological-equation residuals at `n` equally spaced points.
    ///
    /// γ is checked on all of `[0, 1)`; β on `[δ, 1 − δ]`.
    pub fn cohomology_report(&self, n: usize) -> CohomologyReport {
        let n = n.max(2);
        let gam: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| self.series.gamma_residual(i as f64 / n as f64).residual)
            .collect();
        let lo = self.delta;
        let hi = 1.0 - self.delta;
        let bet: Vec<CohomologyResidual> = (0..n)
            .into_par_iter()
            .map(|i| {
                let y = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                self.series
                    .beta_residual(y, self.delta * (1.0 - 1e-12))
                    .unwrap_or(CohomologyResidual {
                        y,
                        residual: f64::INFINITY,
                        tail_bound: 0.0,
                    })
            })
            .collect();
        let gamma_max_residual = gam.into_iter().fold(0.0, f64::max);
        let gamma_bound = self.series.gamma_tail();
        let mut beta_max_excess = f64::NEG_INFINITY;
        let mut beta_max_residual = 0.0f64;
        let mut beta_worst_y = lo;
        for r in &bet {
            beta_max_residual = beta_max_residual.max(r.residual);
            let excess = r.residual - r.tail_bound;
            if excess > beta_max_excess {
                beta_max_excess = excess;
                beta_worst_y = r.y;
            }
        }
        CohomologyReport {
            samples: n,
            depth: self.series.depth(),
            gamma_max_residual,
            gamma_bound,
            beta_max_excess,
            beta_max_residual,
            beta_worst_y,
            passed: gamma_max_residual <= gamma_bound + 1e-9 && beta_max_excess <= 1e-9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{cone_invariance_check, ConeAxis, ConeFamily};

    #[test]
    fn bundles_on_the_singular_circles() {
        let a = IncoherentAnalysis::with_defaults();
        let c = a.center_direction(TorusPoint::new(0.3, 0.5));
        assert!(c.snapped);
        assert_eq!(c.direction, Direction::HORIZONTAL);
        let u = a.unstable_direction(TorusPoint::new(0.3, 0.0));
        assert!(u.snapped);
        assert_eq!(u.direction, Direction::HORIZONTAL);
        for y in [0.5 - 1e-4, 0.5 + 1e-4] {
            let d = a.center_direction(TorusPoint::new(0.0, y)).direction;
            assert!(d.distance(Direction::HORIZONTAL) <= 0.05);
            let exact = a.center_direction_exact(y).unwrap();
            assert!(exact.distance(Direction::HORIZONTAL) <= 0.05);
        }
    }

    #[test]
    fn invariance_on_the_half_circle_is_exact() {
        let a = IncoherentAnalysis::with_defaults();
        let r = a
            .bundle_residual(TorusPoint::new(0.37, 0.5), Circle::Half)
            .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn shallow_series_has_larger_residual() {
        let deep = IncoherentAnalysis::with_defaults();
        let shallow =
            IncoherentAnalysis::new(IncoherentModel::default(), 5, DEFAULT_DELTA).unwrap();
        let p = TorusPoint::new(0.2, 0.3);
        let rd = deep.splitting_invariance_residual(p).unwrap();
        let rs = shallow.splitting_invariance_residual(p).unwrap();
        assert!(rs > rd, "{rs} vs {rd}");
    }

    #[test]
    fn invariance_at_random_points() {
        let a = IncoherentAnalysis::with_defaults();
        let r = a.invariance_report(100, 3, 1e-6);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn stretch_values_on_the_circles() {
        let a = IncoherentAnalysis::with_defaults();
        let r = a.ph_inequality_report(16);
        assert!(r.passed);
        assert!((r.circles[0].unstable_stretch - 2.0).abs() < 1e-6);
        assert!((r.circles[0].ratio - 0.125).abs() < 1e-6);
        assert!((r.circles[1].unstable_stretch - 4.0).abs() < 1e-6);
        assert!((r.circles[1].ratio - 0.5).abs() < 1e-6);
    }

    #[test]
    fn unstable_cone_about_the_bundle_is_invariant() {
        let a = IncoherentAnalysis::with_defaults();
        let field = a.clone();
        let cone = ConeFamily::new(
            ConeAxis::field(move |p| field.unstable_direction(p).direction),
            0.1,
        )
        .unwrap();
        let r = cone_invariance_check(a.model(), &cone, 32);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(IncoherentAnalysis::new(IncoherentModel::default(), 40, 0.0).is_err());
        assert!(IncoherentAnalysis::new(IncoherentModel::default(), 0, 0.02).is_err());
    }
}
