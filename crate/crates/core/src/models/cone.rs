use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::Endomorphism;
use crate::geometry::{Direction, TorusPoint};

/// Number of directions sampled across each cone, boundary included.
pub const CONE_SAMPLES: usize = 33;

type AxisFn = dyn Fn(TorusPoint) -> Direction + Send + Sync;

#[derive(Clone)]
pub enum ConeAxis {
    Constant(Direction),
    Field(Arc<AxisFn>),
}

impl ConeAxis {
    pub fn field<F>(f: F) -> Self
    where
        F: Fn(TorusPoint) -> Direction + Send + Sync + 'static,
    {
        ConeAxis::Field(Arc::new(f))
    }

    pub fn at(&self, p: TorusPoint) -> Direction {
        match self {
            ConeAxis::Constant(d) => *d,
            ConeAxis::Field(f) => f(p),
        }
    }
}

impl fmt::Debug for ConeAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeAxis::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            ConeAxis::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// A field of closed symmetric cones `{v : ∠(v, axis(p)) ≤ half_angle}`.
#[derive(Debug, Clone)]
pub struct ConeFamily {
    pub axis: ConeAxis,
    half_angle: f64,
}

impl ConeFamily {
    /// `None` unless `0 < half_angle < π/2`.
    pub fn new(axis: ConeAxis, half_angle: f64) -> Option<Self> {
        if half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2 {
            Some(Self { axis, half_angle })
        } else {
            None
        }
    }

    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    pub fn contains(&self, p: TorusPoint, d: Direction) -> bool {
        d.distance(self.axis.at(p)) <= self.half_angle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub grid_n: usize,
    /// `min (half_angle − ∠(Df v, axis(f p)))` over sampled points and cone vectors.
    pub worst_margin_angle: f64,
    /// `min ‖Df v‖/‖v‖` over the same samples.
    pub worst_expansion: f64,
    pub worst_margin_point: [f64; 2],
    pub passed: bool,
}

struct Acc {
    margin: f64,
    point: [f64; 2],
    expansion: f64,
}

impl Acc {
    fn merge(self, o: Acc) -> Acc {
        // ties keep the earlier sample so reductions are order independent
        let (margin, point) = if o.margin < self.margin {
            (o.margin, o.point)
        } else {
            (self.margin, self.point)
        };
        Acc {
            margin,
            point,
            expansion: self.expansion.min(o.expansion),
        }
    }
}

pub fn cone_invariance_check<M: Endomorphism + ?Sized>(
    model: &M,
    cone: &ConeFamily,
    grid_n: usize,
) -> ConeReport {
    let grid_n = grid_n.max(2);
    let h = cone.half_angle();
    let row = |i: usize| -> Acc {
        let mut acc = Acc {
            margin: f64::INFINITY,
            point: [0.0, 0.0],
            expansion: f64::INFINITY,
        };
        for j in 0..grid_n {
            let p = TorusPoint::new(i as f64 / grid_n as f64, j as f64 / grid_n as f64);
            let axis = cone.axis.at(p);
            let target = cone.axis.at(model.apply_torus(p));
            let df = model.jacobian(p);
            for s in 0..CONE_SAMPLES {
                let t = -1.0 + 2.0 * s as f64 / (CONE_SAMPLES - 1) as f64;
                let v = Direction::from_angle(axis.angle() + t * h).unit();
                let w = df.apply(v);
                let margin = h - Direction::from_vector(w).distance(target);
                if margin < acc.margin {
                    acc.margin = margin;
                    acc.point = [p.x(), p.y()];
                }
                acc.expansion = acc.expansion.min(w.norm());
            }
        }
        acc
    };
    let acc = (0..grid_n)
        .into_par_iter()
        .map(row)
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(Acc::merge)
        .expect("grid is non-empty");
    ConeReport {
        grid_n,
        worst_margin_angle: acc.margin,
        worst_expansion: acc.expansion,
        worst_margin_point: acc.point,
        passed: acc.margin > 0.0 && acc.expansion > 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IntMatrix;
    use crate::models::PerturbedLinearModel;

    fn unstable_cone(m: &PerturbedLinearModel, h: f64) -> ConeFamily {
        let v_u = m.linearisation().eigen.unwrap().v_u;
        ConeFamily::new(ConeAxis::Constant(Direction::from_vector(v_u)), h).unwrap()
    }

    #[test]
    fn linear_map_preserves_unstable_cone() {
        let m = PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), 0.0).unwrap();
        let r = cone_invariance_check(&m, &unstable_cone(&m, 0.3), 16);
        assert!(r.passed, "{r:?}");
        assert!(r.worst_expansion > 1.0);
    }

    #[test]
    fn small_perturbation_keeps_cone() {
        let m = PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), 0.05).unwrap();
        let r = cone_invariance_check(&m, &unstable_cone(&m, 0.3), 32);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn large_perturbation_breaks_cone() {
        let m = PerturbedLinearModel::new(IntMatrix::new(3, 1, 1, 1), 1.0).unwrap();
        let r = cone_invariance_check(&m, &unstable_cone(&m, 0.3), 32);
        assert!(!r.passed);
        assert!(r.worst_margin_angle <= 0.0);
    }

    #[test]
    fn half_angle_must_be_acute() {
        let axis = ConeAxis::Constant(Direction::HORIZONTAL);
        assert!(ConeFamily::new(axis.clone(), 0.0).is_none());
        assert!(ConeFamily::new(axis, 1.6).is_none());
    }
}
