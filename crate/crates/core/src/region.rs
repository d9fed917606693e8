//! Mode-collapse regions.
//!
//! For a target `P` and generated `Q`, the region is the convex hull of all
//! `(Q(S), P(S))` over events `S`. Its upper boundary is built by ordering
//! atoms by likelihood ratio `p_i / q_i` (largest first, `q_i = 0` atoms as
//! ratio `+inf`) and accumulating `(sum q, sum p)`. The same object is the
//! hypothesis-testing region with `(false positive, true positive)` axes.

use std::fmt::Write as _;

use crate::dist::{DiscreteDist, PackedDist};
use crate::error::{Error, Result};

/// Turns flatter than this (in cross-product units) are treated as
/// collinear when canonicalizing vertices.
const COLLINEAR_TOLERANCE: f64 = 1e-14;

/// Concave piecewise-linear upper boundary from `(0,0)` to `(1,1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionBoundary {
    vertices: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl RegionBoundary {
    /// Validates monotonicity, endpoints, `delta >= epsilon` and concavity,
    /// each within `1e-12`.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        const TOL: f64 = 1e-12;
        let bad = |msg: String| Err(Error::Domain(format!("invalid boundary: {msg}")));
        if vertices.len() < 2 {
            return bad("fewer than two vertices".into());
        }
        let first = vertices[0];
        let last = vertices[vertices.len() - 1];
        if first.0.abs() > TOL || first.1.abs() > TOL {
            return bad(format!("starts at {first:?}"));
        }
        if (last.0 - 1.0).abs() > TOL || (last.1 - 1.0).abs() > TOL {
            return bad(format!("ends at {last:?}"));
        }
        for (i, w) in vertices.windows(2).enumerate() {
            if w[1].0 < w[0].0 - TOL || w[1].1 < w[0].1 - TOL {
                return bad(format!("vertex {} decreases", i + 1));
            }
        }
        if let Some(v) = vertices.iter().find(|v| v.1 < v.0 - TOL) {
            return bad(format!("vertex {v:?} lies below the diagonal"));
        }
        for w in vertices.windows(3) {
            if cross(w[0], w[1], w[2]) > TOL {
                return bad(format!("not concave at {:?}", w[1]));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Largest `delta` on the boundary at `epsilon` (the top of a vertical
    /// segment if there is one). `epsilon` is clamped to `[0, 1]`.
    pub fn upper_at(&self, epsilon: f64) -> f64 {
        let e = epsilon.clamp(0.0, 1.0);
        let mut best = f64::NEG_INFINITY;
        for w in self.vertices.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if e < x0 || e > x1 {
                continue;
            }
            let y = if x1 == x0 {
                y1
            } else {
                y0 + (y1 - y0) * ((e - x0) / (x1 - x0))
            };
            best = best.max(y);
        }
        best
    }

    /// Maximum vertical gap `delta - epsilon`, which is the total variation
    /// distance of the generating pair.
    pub fn dtv(&self) -> f64 {
        self.vertices
            .iter()
            .map(|&(e, d)| d - e)
            .fold(0.0, f64::max)
    }

    /// Area between the boundary and the diagonal (shoelace on the polygon
    /// closed along `epsilon = delta`).
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let twice: f64 = (0..v.len())
            .map(|i| {
                let a = v[i];
                let b = v[(i + 1) % v.len()];
                a.0 * b.1 - b.0 * a.1
            })
            .sum();
        0.5 * twice.abs()
    }

    /// Whether `(epsilon, delta)` lies in the convexified region, i.e. the
    /// pair exhibits `(epsilon, delta)` mode collapse up to randomization.
    pub fn has_mode_collapse(&self, epsilon: f64, delta: f64) -> Result<bool> {
        if !(0.0 <= epsilon && epsilon < delta && delta <= 1.0) {
            return Err(Error::Domain(format!(
                "need 0 <= epsilon < delta <= 1, got epsilon={epsilon}, delta={delta}"
            )));
        }
        Ok(delta <= self.upper_at(epsilon) + 4.0 * f64::EPSILON)
    }

    /// `true` if `inner` lies under this boundary everywhere, within `tol`.
    /// Both boundaries are piecewise linear, so checking the union of their
    /// breakpoints is exhaustive.
    pub fn contains(&self, inner: &RegionBoundary, tol: f64) -> bool {
        self.vertices
            .iter()
            .chain(&inner.vertices)
            .all(|&(e, _)| inner.upper_at(e) <= self.upper_at(e) + tol)
    }

    /// `epsilon,delta` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,delta\n");
        for (e, d) in &self.vertices {
            let _ = writeln!(s, "{e},{d}");
        }
        s
    }
}

/// Boundary from raw probability vectors of equal length (`p` target,
/// `q` generated).
pub fn boundary_from_probs(p: &[f64], q: &[f64]) -> RegionBoundary {
    assert_eq!(p.len(), q.len(), "probability vectors differ in length");
    let mut head = 0.0;
    let mut finite: Vec<(f64, f64, f64)> = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if qi == 0.0 {
            head += pi;
        } else {
            finite.push((pi / qi, pi, qi));
        }
    }
    finite.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    if head > 0.0 {
        points.push((0.0, head));
    }
    let (mut eps, mut delta) = (0.0, head);
    let mut i = 0;
    while i < finite.len() {
        let ratio = finite[i].0;
        while i < finite.len() && finite[i].0 == ratio {
            delta += finite[i].1;
            eps += finite[i].2;
            i += 1;
        }
        points.push((eps, delta));
    }
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    if points.len() == 1 {
        points.push((1.0, 1.0));
    }

    // Ratio ordering already yields a concave chain; this pass only drops
    // vertices made collinear or slightly convex by rounding.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for pt in points {
        while hull.len() >= 2
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) >= -COLLINEAR_TOLERANCE
        {
            hull.pop();
        }
        if hull.last() != Some(&pt) {
            hull.push(pt);
        }
    }
    RegionBoundary { vertices: hull }
}

pub fn region_boundary(p: &DiscreteDist, q: &DiscreteDist) -> Result<RegionBoundary> {
    p.check_same_labels(q)?;
    Ok(boundary_from_probs(p.probs(), q.probs()))
}

pub fn region_boundary_packed(p: &PackedDist, q: &PackedDist) -> Result<RegionBoundary> {
    p.base().check_same_labels(q.base())?;
    if p.degree() != q.degree() {
        return Err(Error::LabelMismatch(format!(
            "packing degrees {} and {}",
            p.degree(),
            q.degree()
        )));
    }
    Ok(boundary_from_probs(p.probs(), q.probs()))
}

pub fn dtv_from_boundary(b: &RegionBoundary) -> f64 {
    b.dtv()
}

pub fn region_area(b: &RegionBoundary) -> f64 {
    b.area()
}

pub fn has_mode_collapse(b: &RegionBoundary, epsilon: f64, delta: f64) -> Result<bool> {
    b.has_mode_collapse(epsilon, delta)
}
