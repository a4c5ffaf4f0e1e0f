use std::f64::consts::PI;

use super::{linearisation_of, Endomorphism, ModelError};
use crate::geometry::{
    CoverPoint, IntMatrix, LinearClass, LinearisationData, Mat2, TorusPoint, Vec2,
};

/// The linear endomorphism `p ↦ A·p`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    lin: LinearisationData,
    inverse: Mat2,
}

impl LinearModel {
    pub fn new(matrix: IntMatrix) -> Result<Self, ModelError> {
        let lin = linearisation_of(matrix)?;
        let inverse = matrix.to_real().inverse().expect("nonzero determinant");
        Ok(Self { lin, inverse })
    }
}

impl Endomorphism for LinearModel {
    fn lift_apply(&self, p: CoverPoint) -> CoverPoint {
        self.lin.matrix.apply(p)
    }

    fn jacobian(&self, _p: TorusPoint) -> Mat2 {
        self.lin.matrix.to_real()
    }

    fn linearisation(&self) -> &LinearisationData {
        &self.lin
    }

    fn displacement_sup(&self) -> f64 {
        0.0
    }

    fn lift_inverse(&self, q: CoverPoint) -> Result<CoverPoint, ModelError> {
        Ok(self.inverse.apply(q))
    }
}

/// `p ↦ A·p + ε·(sin 2πy, sin 2πx)` for a hyperbolic integer matrix `A`.
#[derive(Debug, Clone)]
pub struct PerturbedLinearModel {
    lin: LinearisationData,
    eps: f64,
    inverse: Mat2,
}

impl PerturbedLinearModel {
    pub fn new(matrix: IntMatrix, eps: f64) -> Result<Self, ModelError> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "perturbation size eps = {eps} must be finite and non-negative"
            )));
        }
        let lin = linearisation_of(matrix)?;
        if lin.class != LinearClass::Hyperbolic {
            return Err(ModelError::InvalidParameter(format!(
                "matrix {matrix} is {:?}, a hyperbolic matrix is required",
                lin.class
            )));
        }
        let inverse = matrix.to_real().inverse().expect("nonzero determinant");
        Ok(Self { lin, eps, inverse })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The periodic perturbation `φ = f − A`.
    pub fn phi(&self, p: CoverPoint) -> Vec2 {
        Vec2::new(
            self.eps * (2.0 * PI * p.y).sin(),
            self.eps * (2.0 * PI * p.x).sin(),
        )
    }
}

impl Endomorphism for PerturbedLinearModel {
    fn lift_apply(&self, p: CoverPoint) -> CoverPoint {
        self.lin.matrix.apply(p) + self.phi(p)
    }

    fn jacobian(&self, p: TorusPoint) -> Mat2 {
        let [[a, b], [c, d]] = self.lin.matrix.to_real().0;
        let k = 2.0 * PI * self.eps;
        Mat2::new(
            a,
            b + k * (2.0 * PI * p.y()).cos(),
            c + k * (2.0 * PI * p.x()).cos(),
            d,
        )
    }

    fn jacobian_at(&self, p: CoverPoint) -> Mat2 {
        let [[a, b], [c, d]] = self.lin.matrix.to_real().0;
        let k = 2.0 * PI * self.eps;
        Mat2::new(
            a,
            b + k * (2.0 * PI * p.y).cos(),
            c + k * (2.0 * PI * p.x).cos(),
            d,
        )
    }

    fn linearisation(&self) -> &LinearisationData {
        &self.lin
    }

    fn displacement_sup(&self) -> f64 {
        self.eps * std::f64::consts::SQRT_2
    }

    fn displacement(&self, p: CoverPoint) -> Vec2 {
        self.phi(p)
    }

    fn lift_inverse(&self, q: CoverPoint) -> Result<CoverPoint, ModelError> {
        if self.eps == 0.0 {
            return Ok(self.inverse.apply(q));
        }
        super::newton_inverse(self, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_perturbation_is_the_linear_map() {
        let m = PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), 0.0).unwrap();
        for p in [Vec2::new(0.3, -1.7), Vec2::new(12.5, 3.25)] {
            let a = IntMatrix::new(3, 1, 1, 1).apply(p);
            assert_eq!(m.lift_apply(p), a);
        }
    }

    #[test]
    fn linear_inverse_is_exact() {
        let m = LinearModel::new(IntMatrix::new(3, 1, 1, 1)).unwrap();
        let q = Vec2::new(0.7, -0.2);
        let p = m.lift_inverse(q).unwrap();
        assert!((m.lift_apply(p) - q).norm() < 1e-14);
    }

    #[test]
    fn newton_round_trip_on_random_points() {
        let m = PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let back = m.lift_inverse(m.lift_apply(p)).unwrap();
            assert!((back - p).norm() < 1e-10);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let m = PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), 0.05).unwrap();
        let p = Vec2::new(0.21, 0.64);
        let j = m.jacobian(TorusPoint::new(p.x, p.y));
        let h = 1e-6;
        let dx = (m.lift_apply(p + Vec2::new(h, 0.0)) - m.lift_apply(p - Vec2::new(h, 0.0))).x
            / (2.0 * h);
        let dy = (m.lift_apply(p + Vec2::new(0.0, h)) - m.lift_apply(p - Vec2::new(0.0, h))).x
            / (2.0 * h);
        assert!((dx - j.0[0][0]).abs() < 1e-7);
        assert!((dy - j.0[0][1]).abs() < 1e-7);
    }

    #[test]
    fn rejects_non_hyperbolic_or_negative_eps() {
        assert!(PerturbedLinearModel::new(IntMatrix::new(2, 0, 0, 1), 0.1).is_err());
        assert!(PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), -0.1).is_err());
    }
}
