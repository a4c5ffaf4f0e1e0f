//! Transverse intersection counts between polylines.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::Vec2;
use crate::polyline::LeafPolyline;

const CELL: f64 = 0.05;
/// Orientation values this small count as positive, so a crossing through a
/// shared vertex is counted exactly once.
const SNAP: f64 = 1e-12;

fn side(a: Vec2, b: Vec2, c: Vec2) -> bool {
    (b - a).cross(c - a) >= -SNAP
}

fn segments_cross(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    side(a1, a2, b1) != side(a1, a2, b2) && side(b1, b2, a1) != side(b1, b2, a2)
}

fn cell_range(a: Vec2, b: Vec2) -> (i64, i64, i64, i64) {
    let c = |v: f64| (v / CELL).floor() as i64;
    (
        c(a.x.min(b.x)),
        c(a.x.max(b.x)),
        c(a.y.min(b.y)),
        c(a.y.max(b.y)),
    )
}

/// Segments of one polyline bucketed on a square grid.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    vertices: Vec<Vec2>,
    cells: HashMap<(i64, i64), Vec<u32>>,
    lo: Vec2,
    hi: Vec2,
}

impl SegmentIndex {
    pub fn new(leaf: &LeafPolyline) -> Self {
        let vertices = leaf.vertices().to_vec();
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, w) in vertices.windows(2).enumerate() {
            let (x0, x1, y0, y1) = cell_range(w[0], w[1]);
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    cells.entry((cx, cy)).or_default().push(i as u32);
                }
            }
        }
        for v in &vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        Self {
            vertices,
            cells,
            lo,
            hi,
        }
    }

    fn boxes_overlap(&self, o: &SegmentIndex) -> bool {
        self.lo.x <= o.hi.x && o.lo.x <= self.hi.x && self.lo.y <= o.hi.y && o.lo.y <= self.hi.y
    }

    fn candidates(&self, a: Vec2, b: Vec2, out: &mut Vec<u32>) {
        out.clear();
        let (x0, x1, y0, y1) = cell_range(a, b);
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(v) = self.cells.get(&(cx, cy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Number of transverse crossings with another polyline.
    pub fn crossings(&self, other: &SegmentIndex) -> usize {
        if !self.boxes_overlap(other) {
            return 0;
        }
        let mut count = 0;
        let mut buf = Vec::new();
        for w in other.vertices.windows(2) {
            self.candidates(w[0], w[1], &mut buf);
            for &i in &buf {
                let i = i as usize;
                if segments_cross(self.vertices[i], self.vertices[i + 1], w[0], w[1]) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Crossings between non-adjacent segments of the same polyline.
    pub fn self_crossings(&self) -> usize {
        let mut count = 0;
        let mut buf = Vec::new();
        for (j, w) in self.vertices.windows(2).enumerate() {
            self.candidates(w[0], w[1], &mut buf);
            for &i in &buf {
                let i = i as usize;
                if i + 1 < j && segments_cross(self.vertices[i], self.vertices[i + 1], w[0], w[1]) {
                    count += 1;
                }
            }
        }
        count
    }
}

pub fn count_crossings(a: &LeafPolyline, b: &LeafPolyline) -> usize {
    SegmentIndex::new(a).crossings(&SegmentIndex::new(b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductReport {
    pub centers: usize,
    pub unstables: usize,
    pub pairs_exactly_once: usize,
    /// First offending `(center, unstable, count)`, if any.
    pub first_failure: Option<(usize, usize, usize)>,
    pub passed: bool,
}

/// Every centre leaf must meet every unstable leaf exactly once.
pub fn product_structure_check(
    centers: &[LeafPolyline],
    unstables: &[LeafPolyline],
) -> ProductReport {
    let ci: Vec<SegmentIndex> = centers.par_iter().map(SegmentIndex::new).collect();
    let ui: Vec<SegmentIndex> = unstables.par_iter().map(SegmentIndex::new).collect();
    let counts: Vec<(usize, usize, usize)> = (0..ci.len() * ui.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / ui.len(), k % ui.len());
            (i, j, ci[i].crossings(&ui[j]))
        })
        .collect();
    let ok = counts.iter().filter(|c| c.2 == 1).count();
    let first_failure = counts.iter().find(|c| c.2 != 1).copied();
    ProductReport {
        centers: centers.len(),
        unstables: unstables.len(),
        pairs_exactly_once: ok,
        first_failure,
        passed: first_failure.is_none() && !counts.is_empty(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport {
    pub leaves: usize,
    pub crossings: usize,
    pub self_crossings: usize,
    pub first_pair: Option<(usize, usize)>,
    pub passed: bool,
}

/// Pairwise and self crossings within a leaf family.
pub fn no_crossing_check(leaves: &[LeafPolyline]) -> CrossingReport {
    let idx: Vec<SegmentIndex> = leaves.par_iter().map(SegmentIndex::new).collect();
    let n = idx.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let counts: Vec<usize> = pairs
        .par_iter()
        .map(|&(i, j)| idx[i].crossings(&idx[j]))
        .collect();
    let self_crossings: usize = idx.par_iter().map(|i| i.self_crossings()).sum();
    let crossings = counts.iter().sum();
    let first_pair = pairs
        .iter()
        .zip(&counts)
        .find(|(_, &c)| c > 0)
        .map(|(p, _)| *p);
    CrossingReport {
        leaves: n,
        crossings,
        self_crossings,
        first_pair,
        passed: crossings == 0 && self_crossings == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: Vec2, b: Vec2, n: usize) -> LeafPolyline {
        LeafPolyline::new(
            (0..=n)
                .map(|i| a + (i as f64 / n as f64) * (b - a))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn crossing_lines_meet_once() {
        let a = line(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 37);
        let b = line(Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0), 40);
        assert_eq!(count_crossings(&a, &b), 1);
        assert_eq!(count_crossings(&b, &a), 1);
    }

    #[test]
    fn crossing_through_shared_vertex_counts_once() {
        let a = line(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 20);
        let b = line(Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0), 20);
        assert_eq!(count_crossings(&a, &b), 1);
    }

    #[test]
    fn parallel_lines_never_meet() {
        let a = line(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 1.0), 30);
        let b = line(Vec2::new(-1.0, 0.2), Vec2::new(1.0, 1.2), 30);
        let r = product_structure_check(&[a], &[b]);
        assert!(!r.passed);
        assert_eq!(r.first_failure, Some((0, 0, 0)));
    }

    #[test]
    fn zigzag_meets_line_several_times() {
        let z = LeafPolyline::new(vec![
            Vec2::new(0.0, -1.0),
            Vec2::new(0.2, 1.0),
            Vec2::new(0.4, -1.0),
            Vec2::new(0.6, 1.0),
        ])
        .unwrap();
        let l = line(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 10);
        assert_eq!(count_crossings(&z, &l), 3);
    }

    #[test]
    fn self_crossing_detected() {
        let loopy = LeafPolyline::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.5, -1.0),
        ])
        .unwrap();
        assert_eq!(SegmentIndex::new(&loopy).self_crossings(), 1);
        let r = no_crossing_check(&[loopy]);
        assert!(!r.passed);
    }
}
