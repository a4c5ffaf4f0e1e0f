//! Hand-written SVG output: the branching foliation figure and the leaf atlas.

use std::fmt::Write as _;

use crate::geometry::Vec2;
use crate::incoherent::FigureCurve;
use crate::polyline::LeafPolyline;

pub const SIZE: f64 = 800.0;
const MARGIN: f64 = 100.0;
const SCALE: f64 = 600.0;

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, "<!-- phlab {} -->", env!("CARGO_PKG_VERSION"));
    out.push_str(
        "<style>.sigma{fill:none;stroke:#1f4e9c;stroke-width:1.2}\
         .circle{stroke:#000;stroke-width:1.5}\
         .center{fill:none;stroke:#1f4e9c;stroke-width:0.8}\
         .unstable{fill:none;stroke:#b8321a;stroke-width:0.8}\
         text{font-family:sans-serif;font-size:14px}</style>\n",
    );
    out.push_str(r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    out.push('\n');
}

/// Torus coordinates in the unit square to pixels, `y` growing downwards.
fn px(x: f64, y: f64) -> (f64, f64) {
    (MARGIN + SCALE * x, MARGIN + SCALE * y)
}

fn push_point(d: &mut String, cmd: char, x: f64, y: f64) {
    let (a, b) = px(x, y);
    let _ = write!(d, "{cmd}{a:.3},{b:.3} ");
}

/// Path data of a cover curve drawn modulo 1 in `x`, split where it wraps.
pub fn wrapped_path(curve: &LeafPolyline) -> String {
    let v = curve.vertices();
    let mut d = String::new();
    let k0 = v[0].x.floor();
    push_point(&mut d, 'M', v[0].x - k0, v[0].y);
    for w in v.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ka, kb) = (a.x.floor(), b.x.floor());
        if ka != kb {
            let edge = ka.max(kb);
            let t = (edge - a.x) / (b.x - a.x);
            let y = a.y + t * (b.y - a.y);
            let (from, to) = if kb > ka { (1.0, 0.0) } else { (0.0, 1.0) };
            push_point(&mut d, 'L', from, y);
            push_point(&mut d, 'M', to, y);
        }
        push_point(&mut d, 'L', b.x - kb, b.y);
    }
    d.pop();
    d
}

/// σ-curves plus the circles `y = 0`, `y = 1/2`, `y = 1`.
pub fn figure1(curves: &[FigureCurve]) -> String {
    let mut out = String::new();
    header(&mut out);
    for (label, y) in [("y=0", 0.0), ("y=1/2", 0.5), ("y=1", 1.0)] {
        let (x0, py) = px(0.0, y);
        let (x1, _) = px(1.0, y);
        let _ = writeln!(
            out,
            r#"<line class="circle" x1="{x0:.3}" y1="{py:.3}" x2="{x1:.3}" y2="{py:.3}"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}">{label}</text>"#,
            x1 + 12.0,
            py + 5.0
        );
    }
    for c in curves {
        let _ = writeln!(
            out,
            r#"<path class="sigma" d="{}"/>"#,
            wrapped_path(&c.curve)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Centre and unstable leaves on the cover, scaled to fit.
pub fn atlas(centers: &[LeafPolyline], unstables: &[LeafPolyline]) -> String {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for l in centers.iter().chain(unstables) {
        for v in l.vertices() {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let map = |v: Vec2| {
        (
            MARGIN + SCALE * (v.x - lo.x) / span,
            MARGIN + SCALE * (hi.y - v.y) / span,
        )
    };
    let mut out = String::new();
    header(&mut out);
    for (class, family) in [("center", centers), ("unstable", unstables)] {
        for l in family {
            let mut d = String::new();
            for (i, v) in l.vertices().iter().enumerate() {
                let (a, b) = map(*v);
                let _ = write!(d, "{}{a:.3},{b:.3} ", if i == 0 { 'M' } else { 'L' });
            }
            d.pop();
            let _ = writeln!(out, r#"<path class="{class}" d="{d}"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping_splits_the_path() {
        let l = LeafPolyline::new(vec![
            Vec2::new(0.8, 0.0),
            Vec2::new(1.2, 0.2),
            Vec2::new(1.3, 0.3),
        ])
        .unwrap();
        let d = wrapped_path(&l);
        assert_eq!(d.matches('M').count(), 2);
        assert!(d.contains("L700.000,160.000 M100.000,160.000"));
    }

    #[test]
    fn atlas_has_one_path_per_leaf() {
        let a = LeafPolyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)]).unwrap();
        let b = LeafPolyline::new(vec![Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        let s = atlas(&[a], &[b]);
        assert_eq!(s.matches("class=\"center\"").count(), 1);
        assert_eq!(s.matches("class=\"unstable\"").count(), 1);
    }
}
