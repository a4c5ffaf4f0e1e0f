//! Sampled curves on the cover.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{CoverPoint, Direction, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolylineError {
    #[error("a polyline needs at least two vertices, got {0}")]
    TooShort(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("vertices {0} and {} coincide", .0 + 1)]
    RepeatedVertex(usize),
}

/// An ordered vertex sequence with cumulative arclength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafPolyline {
    vertices: Vec<CoverPoint>,
    arclength: Vec<f64>,
}

impl LeafPolyline {
    pub fn new(vertices: Vec<CoverPoint>) -> Result<Self, PolylineError> {
        if vertices.len() < 2 {
            return Err(PolylineError::TooShort(vertices.len()));
        }
        let mut arclength = Vec::with_capacity(vertices.len());
        arclength.push(0.0);
        for i in 0..vertices.len() {
            if !vertices[i].is_finite() {
                return Err(PolylineError::NonFinite(i));
            }
            if i > 0 {
                let d = vertices[i].distance(vertices[i - 1]);
                if d <= 0.0 {
                    return Err(PolylineError::RepeatedVertex(i - 1));
                }
                arclength.push(arclength[i - 1] + d);
            }
        }
        Ok(Self {
            vertices,
            arclength,
        })
    }

    /// Drops vertices that coincide with their predecessor, then builds.
    pub fn from_points_dedup(points: Vec<CoverPoint>) -> Result<Self, PolylineError> {
        let mut v: Vec<CoverPoint> = Vec::with_capacity(points.len());
        for p in points {
            if v.last().is_none_or(|q| q.distance(p) > 0.0) {
                v.push(p);
            }
        }
        Self::new(v)
    }

    pub fn vertices(&self) -> &[CoverPoint] {
        &self.vertices
    }

    pub fn arclength(&self) -> &[f64] {
        &self.arclength
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        *self.arclength.last().expect("non-empty")
    }

    pub fn first(&self) -> CoverPoint {
        self.vertices[0]
    }

    pub fn last(&self) -> CoverPoint {
        *self.vertices.last().expect("non-empty")
    }

    pub fn segments(&self) -> impl Iterator<Item = (CoverPoint, CoverPoint)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Point at arclength `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> CoverPoint {
        let n = self.vertices.len();
        if s <= 0.0 {
            return self.vertices[0];
        }
        if s >= self.total_length() {
            return self.vertices[n - 1];
        }
        let i = self.arclength.partition_point(|&a| a <= s).max(1) - 1;
        let seg = self.arclength[i + 1] - self.arclength[i];
        let t = (s - self.arclength[i]) / seg;
        self.vertices[i] + t * (self.vertices[i + 1] - self.vertices[i])
    }

    /// Direction of the chord through the neighbours of vertex `i`.
    pub fn tangent_at_vertex(&self, i: usize) -> Direction {
        let n = self.vertices.len();
        let a = self.vertices[i.saturating_sub(1)];
        let b = self.vertices[(i + 1).min(n - 1)];
        Direction::from_vector(b - a)
    }

    pub fn translated(&self, v: Vec2) -> LeafPolyline {
        LeafPolyline {
            vertices: self.vertices.iter().map(|&p| p + v).collect(),
            arclength: self.arclength.clone(),
        }
    }

    pub fn reversed(&self) -> LeafPolyline {
        let mut v = self.vertices.clone();
        v.reverse();
        LeafPolyline::new(v).expect("reversal keeps vertices distinct")
    }

    pub fn max_edge(&self) -> f64 {
        self.arclength
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}
