use std::f64::consts::PI;

use super::{linearisation_of, Endomorphism, MobiusCircleMap, ModelError};
use crate::geometry::{CoverPoint, IntMatrix, LinearisationData, Mat2, TorusPoint, Vec2};

/// `(x, y) ↦ (2x + cos 2πy + 1, Ψ(y))` with `Ψ` a Möbius circle map.
///
/// Partial hyperbolicity needs `Ψ'(0) < 1/2` and `Ψ'(1/2) > 2`, i.e. `c > 1/3`.
#[derive(Debug, Clone)]
pub struct IncoherentModel {
    psi: MobiusCircleMap,
    lin: LinearisationData,
    psi_sup: f64,
}

impl IncoherentModel {
    pub const DEFAULT_C: f64 = 0.6;

    pub fn new(c: f64) -> Result<Self, ModelError> {
        let psi = MobiusCircleMap::new(c)?;
        if psi.multiplier() >= 0.5 {
            return Err(ModelError::InvalidParameter(format!(
                "c = {c} gives Ψ'(0) = {} which is not below 1/2",
                psi.multiplier()
            )));
        }
        Ok(Self {
            psi,
            lin: linearisation_of(IntMatrix::new(2, 0, 0, 1))?,
            psi_sup: psi.lift_displacement_sup(),
        })
    }

    pub fn psi(&self) -> &MobiusCircleMap {
        &self.psi
    }
}

impl Default for IncoherentModel {
    fn default() -> Self {
        Self::new(Self::DEFAULT_C).expect("default parameter is valid")
    }
}

impl Endomorphism for IncoherentModel {
    fn lift_apply(&self, p: CoverPoint) -> CoverPoint {
        Vec2::new(2.0 * p.x + (2.0 * PI * p.y).cos() + 1.0, self.psi.lift(p.y))
    }

    fn jacobian(&self, p: TorusPoint) -> Mat2 {
        Mat2::new(
            2.0,
            -2.0 * PI * (2.0 * PI * p.y()).sin(),
            0.0,
            self.psi.derivative(p.y()),
        )
    }

    fn linearisation(&self) -> &LinearisationData {
        &self.lin
    }

    fn displacement_sup(&self) -> f64 {
        // sampled sup of |Ψ̃ − id| plus a margin for the sampling
        2.0 + self.psi_sup * (1.0 + 1e-3)
    }

    fn lift_inverse(&self, q: CoverPoint) -> Result<CoverPoint, ModelError> {
        let y = self.psi.inverse_lift(q.y);
        let x = 0.5 * (q.x - (2.0 * PI * y).cos() - 1.0);
        Ok(Vec2::new(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LinearClass;

    #[test]
    fn origin_is_fixed() {
        let f = IncoherentModel::default();
        let img = f.lift_apply(Vec2::new(0.0, 0.0));
        assert_eq!(img, Vec2::new(2.0, 0.0));
        let t = f.apply_torus(TorusPoint::new(0.0, 0.0));
        assert_eq!((t.x(), t.y()), (0.0, 0.0));
        let back = f.lift_inverse(Vec2::new(2.0, 0.0)).unwrap();
        assert!(back.norm() < 1e-15);
    }

    #[test]
    fn jacobian_at_quarter() {
        let f = IncoherentModel::default();
        let j = f.jacobian(TorusPoint::new(0.3, 0.25));
        assert_eq!(j.0[0][0], 2.0);
        assert!((j.0[0][1] + 2.0 * PI).abs() < 1e-15);
        assert_eq!(j.0[1][0], 0.0);
        assert_eq!(j.0[1][1], f.psi().derivative(0.25));
    }

    #[test]
    fn determinant_is_positive() {
        let f = IncoherentModel::default();
        for i in 0..1000 {
            let y = i as f64 / 1000.0;
            let j = f.jacobian(TorusPoint::new(0.0, y));
            assert!((j.det() - 2.0 * f.psi().derivative(y)).abs() < 1e-12);
            assert!(j.det() > 0.0);
        }
    }

    #[test]
    fn linearisation_is_non_hyperbolic() {
        let f = IncoherentModel::default();
        assert_eq!(f.linearisation().class, LinearClass::NonHyperbolic);
        assert_eq!(f.linearisation().matrix, IntMatrix::new(2, 0, 0, 1));
    }

    #[test]
    fn rejects_weak_contraction() {
        assert!(IncoherentModel::new(0.2).is_err());
    }
}
