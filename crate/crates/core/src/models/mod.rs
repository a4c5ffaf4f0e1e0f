//! Torus endomorphisms: the common interface and the concrete models.

mod cone;
mod incoherent;
mod linear;
mod mobius;

pub use cone::{cone_invariance_check, ConeAxis, ConeFamily, ConeReport};
pub use incoherent::IncoherentModel;
pub use linear::{LinearModel, PerturbedLinearModel};
pub use mobius::MobiusCircleMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    classify_linearisation, cover_to_torus, wrap_unit, CoverPoint, GeometryError, IntMatrix,
    LatticeVector, LinearisationData, Mat2, TorusPoint, Vec2,
};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lift inversion failed to converge (residual {residual:e})")]
    InversionFailure { residual: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A local diffeomorphism of `T²` together with its lift to the cover.
///
/// The lift must satisfy `lift_apply(p + v) = lift_apply(p) + A·v` for every
/// lattice vector `v`, where `A` is the linearisation matrix.
pub trait Endomorphism: Send + Sync {
    fn lift_apply(&self, p: CoverPoint) -> CoverPoint;

    fn jacobian(&self, p: TorusPoint) -> Mat2;

    fn linearisation(&self) -> &LinearisationData;

    /// Upper bound for `sup ‖lift_apply(p) − A·p‖` over the plane.
    fn displacement_sup(&self) -> f64;

    fn apply_torus(&self, p: TorusPoint) -> TorusPoint {
        cover_to_torus(self.lift_apply(p.to_cover()))
    }

    fn jacobian_at(&self, p: CoverPoint) -> Mat2 {
        self.jacobian(cover_to_torus(p))
    }

    /// `f(p) − A·p`, which is `Z²`-periodic.
    fn displacement(&self, p: CoverPoint) -> Vec2 {
        let t = cover_to_torus(p).to_cover();
        self.lift_apply(t) - self.linearisation().matrix.apply(t)
    }

    /// Inverse of the lift, by Newton iteration seeded at `A⁻¹q`.
    fn lift_inverse(&self, q: CoverPoint) -> Result<CoverPoint, ModelError> {
        newton_inverse(self, q)
    }
}

pub(crate) fn newton_inverse<M: Endomorphism + ?Sized>(
    model: &M,
    q: CoverPoint,
) -> Result<CoverPoint, ModelError> {
    let a_inv = model
        .linearisation()
        .matrix
        .to_real()
        .inverse()
        .expect("linearisation is nonsingular");
    let mut p = a_inv.apply(q);
    let tol = NEWTON_TOL * q.norm().max(1.0);
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let r = model.lift_apply(p) - q;
        residual = r.norm();
        if residual <= tol {
            return Ok(p);
        }
        let step = model
            .jacobian_at(p)
            .solve(r)
            .ok_or(ModelError::InversionFailure { residual })?;
        p = p - step;
        if !p.is_finite() {
            break;
        }
    }
    let r = (model.lift_apply(p) - q).norm();
    if r <= tol {
        return Ok(p);
    }
    Err(ModelError::InversionFailure {
        residual: residual.min(r),
    })
}

/// A cover point held as an exact lattice anchor plus a local part in `[0,1)²`.
///
/// Long orbits on the cover leave the range where `f64` coordinates keep
/// enough precision; splitting off the integer part keeps the local part
/// accurate while deck equivariance of the lift moves the anchor exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedPoint {
    pub anchor: LatticeVector,
    pub local: Vec2,
}

impl LiftedPoint {
    pub fn new(p: CoverPoint) -> Self {
        Self::from_parts(LatticeVector::default(), p).expect("finite point")
    }

    pub fn from_parts(anchor: LatticeVector, local: Vec2) -> Option<Self> {
        if !local.is_finite() {
            return None;
        }
        let fx = local.x.floor();
        let fy = local.y.floor();
        let shift = LatticeVector::new(fx as i64, fy as i64);
        let mut local = Vec2::new(local.x - fx, local.y - fy);
        let mut anchor = anchor.checked_add(shift)?;
        // floor of values just below an integer can leave exactly 1.0
        if local.x >= 1.0 {
            local.x -= 1.0;
            anchor.m = anchor.m.checked_add(1)?;
        }
        if local.y >= 1.0 {
            local.y -= 1.0;
            anchor.n = anchor.n.checked_add(1)?;
        }
        Some(Self { anchor, local })
    }

    pub fn to_cover(self) -> CoverPoint {
        self.local.translate(self.anchor)
    }

    pub fn torus(self) -> TorusPoint {
        TorusPoint::new(wrap_unit(self.local.x), wrap_unit(self.local.y))
    }

    /// Offset `self − other` computed with the anchors subtracted exactly.
    pub fn offset_from(self, other: LiftedPoint) -> Option<Vec2> {
        let da = self.anchor.checked_sub(other.anchor)?;
        Some(da.to_vec2() + (self.local - other.local))
    }

    pub fn shifted(self, v: Vec2) -> Option<Self> {
        Self::from_parts(self.anchor, self.local + v)
    }
}

fn overflow() -> ModelError {
    ModelError::Geometry(GeometryError::LatticeOverflow)
}

/// Image of a lifted point under the lift of `model`.
pub fn lifted_forward<M: Endomorphism + ?Sized>(
    model: &M,
    p: LiftedPoint,
) -> Result<LiftedPoint, ModelError> {
    let a = &model.linearisation().matrix;
    let shift = a.checked_apply(p.anchor).ok_or_else(overflow)?;
    LiftedPoint::from_parts(shift, model.lift_apply(p.local)).ok_or_else(overflow)
}

/// Preimage of a lifted point under the lift of `model`.
///
/// With `anchor = A·u + r` (coset representative `r`), the preimage is
/// `f⁻¹(local + r) + u`.
pub fn lifted_backward<M: Endomorphism + ?Sized>(
    model: &M,
    p: LiftedPoint,
) -> Result<LiftedPoint, ModelError> {
    let a = &model.linearisation().matrix;
    let (u, r) = a.coset_split(p.anchor).ok_or_else(overflow)?;
    let pre = model.lift_inverse(p.local + r.to_vec2())?;
    LiftedPoint::from_parts(u, pre).ok_or_else(overflow)
}

pub fn lifted_forward_n<M: Endomorphism + ?Sized>(
    model: &M,
    mut p: LiftedPoint,
    n: usize,
) -> Result<LiftedPoint, ModelError> {
    for _ in 0..n {
        p = lifted_forward(model, p)?;
    }
    Ok(p)
}

pub fn lifted_backward_n<M: Endomorphism + ?Sized>(
    model: &M,
    mut p: LiftedPoint,
    n: usize,
) -> Result<LiftedPoint, ModelError> {
    for _ in 0..n {
        p = lifted_backward(model, p)?;
    }
    Ok(p)
}

/// Largest `‖lift_apply(p) − A·p‖` over an `n × n` grid of the fundamental domain.
pub fn measured_displacement<M: Endomorphism + ?Sized>(model: &M, n: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let p = Vec2::new(i as f64 / n as f64, j as f64 / n as f64);
            best = best.max(model.displacement(p).norm());
        }
    }
    best
}

/// Declarative description of a model, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear { matrix: IntMatrix },
    Perturbed { matrix: IntMatrix, eps: f64 },
    Incoherent { c: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn Endomorphism>, ModelError> {
        Ok(match self {
            ModelSpec::Linear { matrix } => Box::new(LinearModel::new(*matrix)?),
            ModelSpec::Perturbed { matrix, eps } => {
                Box::new(PerturbedLinearModel::new(*matrix, *eps)?)
            }
            ModelSpec::Incoherent { c } => Box::new(IncoherentModel::new(*c)?),
        })
    }
}

pub(crate) fn linearisation_of(matrix: IntMatrix) -> Result<LinearisationData, ModelError> {
    Ok(classify_linearisation(matrix)?)
}
