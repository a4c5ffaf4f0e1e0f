//! Truncated solutions of `u(Ψ(y)) − 2u(y) = cos 2πy + 1` and their derivatives.
//!
//! Tail bounds use `tan(πΨ^k(y)) = μ^k tan(πy)`:
//! `cos 2πΨ^{−k}(y) + 1 ≤ 2μ^{2k} cot²(πy)`, so the β terms decay like `(2μ²)^k`,
//! and the differentiated γ terms decay like `(μ²/2)^k`.

use std::f64::consts::PI;

use serde::Serialize;

use super::{circle_distance, AnalysisError, Circle};
use crate::models::MobiusCircleMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTruncation {
    pub depth: usize,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation: SeriesTruncation,
}

/// Residual of the cohomological equation for a truncated series at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CohomologyResidual {
    pub y: f64,
    pub residual: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CohomologySeries {
    psi: MobiusCircleMap,
    depth: usize,
}

fn g(u: f64) -> f64 {
    (2.0 * PI * u).cos() + 1.0
}

impl CohomologySeries {
    pub fn new(psi: MobiusCircleMap, depth: usize) -> Result<Self, AnalysisError> {
        if depth == 0 {
            return Err(AnalysisError::InvalidInput(
                "series depth must be at least 1".into(),
            ));
        }
        Ok(Self { psi, depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn psi(&self) -> &MobiusCircleMap {
        &self.psi
    }

    fn mu(&self) -> f64 {
        self.psi.multiplier()
    }

    fn check_away(&self, y: f64, circle: Circle, delta: f64) -> Result<(), AnalysisError> {
        let d = circle_distance(y, circle.y());
        if d < delta || d == 0.0 {
            return Err(AnalysisError::SingularInput { y, circle, delta });
        }
        Ok(())
    }

    fn finite(&self, tail: f64) -> Result<f64, AnalysisError> {
        if tail.is_finite() {
            Ok(tail)
        } else {
            Err(AnalysisError::InsufficientDepth {
                depth: self.depth,
                tail_bound: tail,
            })
        }
    }

    fn beta_ratio(&self) -> Result<f64, AnalysisError> {
        let r = 2.0 * self.mu() * self.mu();
        if r >= 1.0 {
            return Err(AnalysisError::InvalidInput(format!(
                "β series diverges: 2μ² = {r} ≥ 1"
            )));
        }
        Ok(r)
    }

    /// `cot²(πy)·r^{K+1}/(1 − r)` with `r = 2μ²`.
    pub fn beta_tail(&self, y: f64) -> Result<f64, AnalysisError> {
        let r = self.beta_ratio()?;
        let t = (PI * y).tan();
        let cot2 = 1.0 / (t * t);
        self.finite(cot2 * r.powi(self.depth as i32 + 1) / (1.0 - r))
    }

    /// `β(y) = ½ Σ_{k≥1} 2^k (cos 2πΨ^{−k}(y) + 1)`, first `K` terms.
    pub fn beta(&self, y: f64, delta: f64) -> Result<SeriesValue, AnalysisError> {
        self.check_away(y, Circle::Zero, delta)?;
        let tail_bound = self.beta_tail(y)?;
        let mut sum = 0.0;
        let mut w = 1.0;
        for k in 1..=self.depth {
            w *= 2.0;
            sum += w * g(self.psi.iterate_lift(y, -(k as i32)));
        }
        Ok(SeriesValue {
            value: 0.5 * sum,
            truncation: SeriesTruncation {
                depth: self.depth,
                tail_bound,
            },
        })
    }

    /// `4·2^{−K}`.
    pub fn gamma_tail(&self) -> f64 {
        4.0 * 0.5f64.powi(self.depth as i32)
    }

    /// `γ(y) = −½ Σ_{k≥0} 2^{−k} (cos 2πΨ^k(y) + 1)`, first `K` terms.
    pub fn gamma(&self, y: f64) -> SeriesValue {
        let mut sum = 0.0;
        let mut w = 1.0;
        for k in 0..self.depth {
            sum += w * g(self.psi.iterate_lift(y, k as i32));
            w *= 0.5;
        }
        SeriesValue {
            value: -0.5 * sum,
            truncation: SeriesTruncation {
                depth: self.depth,
                tail_bound: self.gamma_tail(),
            },
        }
    }

    /// Termwise derivative of β; its terms are `−π 2^k sin(2πΨ^{−k}y)(Ψ^{−k})'(y)`.
    pub fn beta_prime(&self, y: f64, delta: f64) -> Result<SeriesValue, AnalysisError> {
        self.check_away(y, Circle::Zero, delta)?;
        let r = self.beta_ratio()?;
        let theta = PI * y;
        let (s, c) = theta.sin_cos();
        let tail_bound = self.finite(
            2.0 * PI * (c / s).abs() / (s * s) * r.powi(self.depth as i32 + 1) / (1.0 - r),
        )?;
        let mut sum = 0.0;
        let mut w = 1.0;
        for k in 1..=self.depth {
            w *= 2.0;
            let k = -(k as i32);
            let u = self.psi.iterate_lift(y, k);
            sum += w * (2.0 * PI * u).sin() * self.psi.iterate_derivative(y, k);
        }
        Ok(SeriesValue {
            value: -PI * sum,
            truncation: SeriesTruncation {
                depth: self.depth,
                tail_bound,
            },
        })
    }

    /// Termwise derivative of γ; its terms are `π 2^{−k} sin(2πΨ^k y)(Ψ^k)'(y)`.
    pub fn gamma_prime(&self, y: f64, delta: f64) -> Result<SeriesValue, AnalysisError> {
        self.check_away(y, Circle::Half, delta)?;
        let rho = 0.5 * self.mu() * self.mu();
        let theta = PI * y;
        let (s, c) = theta.sin_cos();
        let tail_bound = self.finite(
            2.0 * PI * (s / c).abs() / (c * c) * rho.powi(self.depth as i32) / (1.0 - rho),
        )?;
        let mut sum = 0.0;
        let mut w = 1.0;
        for k in 0..self.depth {
            let k = k as i32;
            let u = self.psi.iterate_lift(y, k);
            sum += w * (2.0 * PI * u).sin() * self.psi.iterate_derivative(y, k);
            w *= 0.5;
        }
        Ok(SeriesValue {
            value: PI * sum,
            truncation: SeriesTruncation {
                depth: self.depth,
                tail_bound,
            },
        })
    }

    /// `|γ(Ψy) − 2γ(y) − (cos 2πy + 1)|` against `4·2^{−K}`.
    pub fn gamma_residual(&self, y: f64) -> CohomologyResidual {
        let lhs = self.gamma(self.psi.apply(y)).value - 2.0 * self.gamma(y).value;
        CohomologyResidual {
            y,
            residual: (lhs - g(y)).abs(),
            tail_bound: self.gamma_tail(),
        }
    }

    /// `|β(Ψy) − 2β(y) − (cos 2πy + 1)|` against `tail(Ψy) + 2·tail(y)`.
    ///
    /// `Ψ` pulls points towards 0, so `Ψy` is only required to differ from 0.
    pub fn beta_residual(&self, y: f64, delta: f64) -> Result<CohomologyResidual, AnalysisError> {
        let b = self.beta(y, delta)?;
        let b_img = self.beta(self.psi.apply(y), 0.0)?;
        let lhs = b_img.value - 2.0 * b.value;
        Ok(CohomologyResidual {
            y,
            residual: (lhs - g(y)).abs(),
            tail_bound: b_img.truncation.tail_bound + 2.0 * b.truncation.tail_bound,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(depth: usize) -> CohomologySeries {
        CohomologySeries::new(MobiusCircleMap::new(0.6).unwrap(), depth).unwrap()
    }

    #[test]
    fn values_on_fixed_circles() {
        for k in [1, 5, 40] {
            let s = series(k);
            assert_eq!(s.gamma(0.5).value, 0.0);
            assert!(s.beta(0.5, 0.02).unwrap().value.abs() < 1e-14);
            let g0 = s.gamma(0.0);
            assert!((g0.value + 2.0).abs() <= g0.truncation.tail_bound);
        }
    }

    #[test]
    fn beta_refuses_the_singular_circle() {
        let s = series(40);
        assert!(matches!(
            s.beta(0.01, 0.02),
            Err(AnalysisError::SingularInput { .. })
        ));
        assert!(s.beta(0.99, 0.02).is_err());
        assert!(s.beta(0.0, 0.0).is_err());
        assert!(s.gamma_prime(0.49, 0.02).is_err());
    }

    #[test]
    fn beta_residual_at_sample_points() {
        let s = series(40);
        for y in [0.1, 0.2, 0.3, 0.4] {
            let r = s.beta_residual(y, 0.02).unwrap();
            assert!(r.residual <= r.tail_bound + 1e-9, "{r:?}");
        }
    }

    #[test]
    fn beta_depth_doubling_within_tail() {
        let a = series(20).beta(0.3, 0.02).unwrap();
        let b = series(40).beta(0.3, 0.02).unwrap();
        assert!((a.value - b.value).abs() <= a.truncation.tail_bound + 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = series(40);
        let h = 1e-6;
        for y in [0.1, 0.25, 0.33, 0.6, 0.8, 0.9] {
            let fd = (s.gamma(y + h).value - s.gamma(y - h).value) / (2.0 * h);
            assert!(
                (fd - s.gamma_prime(y, 0.02).unwrap().value).abs() < 1e-5,
                "γ' at {y}"
            );
            let fd = (s.beta(y + h, 0.02).unwrap().value - s.beta(y - h, 0.02).unwrap().value)
                / (2.0 * h);
            assert!(
                (fd - s.beta_prime(y, 0.02).unwrap().value).abs() < 1e-5,
                "β' at {y}"
            );
        }
    }

    #[test]
    fn derivative_signs() {
        let s = series(40);
        for i in 1..50 {
            let y = 0.03 + 0.44 * i as f64 / 50.0;
            assert!(s.beta_prime(y, 0.02).unwrap().value < 0.0);
            assert!(s.gamma_prime(y, 0.02).unwrap().value > 0.0);
            assert!(s.beta_prime(1.0 - y, 0.02).unwrap().value > 0.0);
            assert!(s.gamma_prime(1.0 - y, 0.02).unwrap().value < 0.0);
        }
    }

    #[test]
    fn gamma_prime_blows_up_at_half() {
        let s = series(40);
        let mut prev = 0.0;
        for j in 1..=6 {
            let v = s
                .gamma_prime(0.5 - 10f64.powi(-j), 0.0)
                .unwrap()
                .value
                .abs();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = 0.0;
        for j in 1..=6 {
            let v = s.beta_prime(10f64.powi(-j), 0.0).unwrap().value.abs();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn derivative_tails_bound_the_depth_gap() {
        for y in [0.05, 0.3, 0.45, 0.7] {
            let a = series(10).gamma_prime(y, 0.02).unwrap();
            let b = series(40).gamma_prime(y, 0.02).unwrap();
            assert!((a.value - b.value).abs() <= a.truncation.tail_bound * (1.0 + 1e-9) + 1e-12);
            let a = series(10).beta_prime(y, 0.02).unwrap();
            let b = series(40).beta_prime(y, 0.02).unwrap();
            assert!((a.value - b.value).abs() <= a.truncation.tail_bound * (1.0 + 1e-9) + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn gamma_satisfies_the_equation(y in 0.0f64..1.0) {
            let r = series(40).gamma_residual(y);
            prop_assert!(r.residual <= r.tail_bound + 1e-9);
        }

        #[test]
        fn beta_satisfies_the_equation(y in 0.02f64..0.98) {
            let r = series(40).beta_residual(y, 0.02).unwrap();
            prop_assert!(r.residual <= r.tail_bound + 1e-9);
        }
    }
}
