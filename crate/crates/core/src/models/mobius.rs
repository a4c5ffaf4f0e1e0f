//! The Möbius circle map `Ψ(y) = arg((z + c)/(1 + c z)) / 2π`, `z = e^{2πiy}`.
//!
//! Conjugating the unit circle to the real line by `w = tan(πy)` turns every
//! disc automorphism fixing `±1` into a dilation `w ↦ μ·w`. For this family
//! the dilation factor is the multiplier at the fixed point `0`,
//! `μ = Ψ'(0) = (1 − c)/(1 + c)`, so `Ψ(y) = atan(μ·tan(πy))/π` and the k-fold
//! iterate is the same formula with `μ^k`. Negative `k` gives inverse iterates.

use std::f64::consts::PI;

use super::ModelError;
use crate::geometry::wrap_unit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusCircleMap {
    c: f64,
    multiplier: f64,
}

impl MobiusCircleMap {
    pub fn new(c: f64) -> Result<Self, ModelError> {
        if !(c.is_finite() && c.abs() < 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "Möbius parameter c = {c} must satisfy |c| < 1"
            )));
        }
        Ok(Self {
            c,
            multiplier: (1.0 - c) / (1.0 + c),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `Ψ'(0) = (1 − c)/(1 + c)`; also `1/Ψ'(1/2)`.
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    /// Parameter `c_k` of the k-th iterate within the same family.
    pub fn iterate_parameter(&self, k: i32) -> f64 {
        let m = self.multiplier.powi(k);
        (1.0 - m) / (1.0 + m)
    }

    fn dilation(&self, k: i32) -> f64 {
        self.multiplier.powi(k)
    }

    /// Lift of `Ψ^k` to `R` fixing `0`, so that `lift(y + 1) = lift(y) + 1`.
    pub fn iterate_lift(&self, y: f64, k: i32) -> f64 {
        if k == 0 {
            return y;
        }
        let base = y.floor();
        let r = y - base;
        if r == 0.0 || r == 0.5 {
            return y;
        }
        let theta = PI * r;
        let s = theta.sin();
        let m = self.dilation(k);
        base + (m * s).atan2(theta.cos()) / PI
    }

    /// `(Ψ^k)'(y)`.
    pub fn iterate_derivative(&self, y: f64, k: i32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let theta = PI * y;
        let (s, c) = theta.sin_cos();
        let m = self.dilation(k);
        // μ/(cos² + μ² sin²), written to avoid squaring large μ
        1.0 / (c * c / m + m * s * s)
    }

    pub fn iterate(&self, y: f64, k: i32) -> f64 {
        wrap_unit(self.iterate_lift(y, k))
    }

    pub fn apply(&self, y: f64) -> f64 {
        self.iterate(y, 1)
    }

    pub fn lift(&self, y: f64) -> f64 {
        self.iterate_lift(y, 1)
    }

    pub fn inverse_lift(&self, y: f64) -> f64 {
        self.iterate_lift(y, -1)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.iterate_derivative(y, 1)
    }

    /// `sup |Ψ̃(y) − y|`, sampled on a fine grid of one period.
    pub fn lift_displacement_sup(&self) -> f64 {
        (0..4096)
            .map(|i| {
                let y = i as f64 / 4096.0;
                (self.lift(y) - y).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `arg((z + c)/(1 + c z))/2π` by explicit complex arithmetic.
    fn psi_complex(c: f64, y: f64) -> f64 {
        let (zi, zr) = (2.0 * PI * y).sin_cos();
        let (nr, ni) = (zr + c, zi);
        let (dr, di) = (1.0 + c * zr, c * zi);
        // n / d = n · conj(d) / |d|²
        let qr = nr * dr + ni * di;
        let qi = ni * dr - nr * di;
        wrap_unit(qi.atan2(qr) / (2.0 * PI))
    }

    fn circle_gap(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(1.0);
        d.min(1.0 - d)
    }

    #[test]
    fn fixed_points_and_multipliers() {
        let psi = MobiusCircleMap::new(0.6).unwrap();
        assert_eq!(psi.apply(0.0), 0.0);
        assert!((psi.apply(0.5) - 0.5).abs() < 1e-15);
        assert!((psi.derivative(0.0) - 0.25).abs() < 1e-15);
        assert!((psi.derivative(0.5) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_point_matches_complex_formula() {
        let psi = MobiusCircleMap::new(0.6).unwrap();
        let expected = psi_complex(0.6, 0.25);
        assert!((psi.apply(0.25) - expected).abs() < 1e-15);
        assert!((psi.apply(0.25) - 0.07798).abs() < 5e-6);
    }

    #[test]
    fn rejects_out_of_range_parameter() {
        assert!(MobiusCircleMap::new(1.0).is_err());
        assert!(MobiusCircleMap::new(-1.2).is_err());
        assert!(MobiusCircleMap::new(f64::NAN).is_err());
    }

    #[test]
    fn closed_form_iterates_match_naive_composition() {
        let psi = MobiusCircleMap::new(0.6).unwrap();
        for i in 0..200 {
            let y = (i as f64 + 0.37) / 200.0;
            let mut naive = y;
            for k in 1..=10 {
                naive = psi.apply(naive);
                assert!(circle_gap(psi.iterate(y, k), naive) <= 1e-12, "y={y} k={k}");
            }
        }
    }

    #[test]
    fn iterate_parameter_reproduces_the_iterate() {
        let psi = MobiusCircleMap::new(0.6).unwrap();
        for k in [-3, -1, 2, 5] {
            let ck = psi.iterate_parameter(k);
            for y in [0.1, 0.3, 0.77] {
                assert!(circle_gap(psi.iterate(y, k), psi_complex(ck, y)) < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let psi = MobiusCircleMap::new(0.6).unwrap();
        let h = 1e-6;
        for k in [-2, -1, 1, 3] {
            for y in [0.1, 0.3, 0.45, 0.8] {
                let fd = (psi.iterate_lift(y + h, k) - psi.iterate_lift(y - h, k)) / (2.0 * h);
                let d = psi.iterate_derivative(y, k);
                assert!((fd - d).abs() < 1e-6 * d.max(1.0), "k={k} y={y}");
            }
        }
    }

    #[test]
    fn lift_is_degree_one_and_increasing() {
        let psi = MobiusCircleMap::new(0.6).unwrap();
        let mut prev = psi.lift(-1.0);
        for i in 1..=3000 {
            let y = -1.0 + i as f64 / 1000.0;
            let v = psi.lift(y);
            assert!(v > prev);
            prev = v;
            assert!((psi.lift(y + 1.0) - psi.lift(y) - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn inverse_iterates_undo_forward_iterates(y in 0.0f64..1.0, k in 1i32..12) {
            let psi = MobiusCircleMap::new(0.6).unwrap();
            let back = psi.iterate(psi.iterate(y, k), -k);
            prop_assert!(circle_gap(back, y) <= 1e-12 * 4f64.powi(k).max(1.0));
        }
    }
}
