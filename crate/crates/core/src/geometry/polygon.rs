//! Simple closed polygons used to describe walls, limiters and target
//! plasma shapes.
//!
//! Everything downstream (level sets, cut cells, boundary integrals)
//! assumes the polygon is simple (no self-intersections) and oriented
//! counterclockwise, so construction validates both.

use crate::error::{GsError, Result};

#[derive(Debug, Clone)]
pub struct BoundaryPolygon {
    /// Vertices in CCW order. The closing edge (last -> first) is implicit.
    verts: Vec<[f64; 2]>,
}

impl BoundaryPolygon {
    pub fn new(verts: Vec<[f64; 2]>) -> Result<Self> {
        if verts.len() < 3 {
            return Err(GsError::Geometry(format!(
                "polygon needs at least 3 vertices, got {}",
                verts.len()
            )));
        }
        for (k, v) in verts.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(GsError::Geometry(format!("polygon vertex {k} is not finite")));
            }
        }
        let n = verts.len();
        for k in 0..n {
            let a = verts[k];
            let b = verts[(k + 1) % n];
            if a == b {
                return Err(GsError::Geometry(format!(
                    "polygon has a zero-length edge at vertex {k}"
                )));
            }
        }
        let poly = Self { verts };
        let area2 = poly.signed_area2();
        if area2.abs() < 1e-300 {
            return Err(GsError::Geometry("polygon has zero area".into()));
        }
        if area2 < 0.0 {
            return Err(GsError::Geometry(
                "polygon vertices must be ordered counterclockwise".into(),
            ));
        }
        poly.check_simple()?;
        Ok(poly)
    }

    /// Axis-aligned rectangle, CCW.
    pub fn rectangle(r0: f64, r1: f64, z0: f64, z1: f64) -> Result<Self> {
        Self::new(vec![[r0, z0], [r1, z0], [r1, z1], [r0, z1]])
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.verts
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Edge k runs from vertex k to vertex (k + 1) mod n.
    pub fn edge(&self, k: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.verts.len();
        (self.verts[k], self.verts[(k + 1) % n])
    }

    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.verts {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Twice the signed area (shoelace sum); positive for CCW.
    pub fn signed_area2(&self) -> f64 {
        let n = self.verts.len();
        let mut s = 0.0;
        for k in 0..n {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % n];
            s += a[0] * b[1] - b[0] * a[1];
        }
        s
    }

    pub fn area(&self) -> f64 {
        0.5 * self.signed_area2()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.verts.len())
            .map(|k| {
                let (a, b) = self.edge(k);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Area centroid from the shoelace decomposition:
    ///   C = (1/3) * sum (v_k + v_{k+1}) * cross_k / sum cross_k,
    /// with cross_k = x_k y_{k+1} - x_{k+1} y_k.
    pub fn centroid(&self) -> Result<[f64; 2]> {
        centroid_of_loop(&self.verts)
    }

    /// Winding number of the polygon around p (0 outside, +1 inside for a
    /// simple CCW polygon). Points exactly on an edge may land on either
    /// side; callers that care use `distance` == 0 to detect that case.
    pub fn winding_number(&self, p: [f64; 2]) -> i32 {
        let n = self.verts.len();
        let mut w = 0i32;
        for k in 0..n {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % n];
            if a[1] <= p[1] {
                if b[1] > p[1] && is_left(a, b, p) > 0.0 {
                    w += 1;
                }
            } else if b[1] <= p[1] && is_left(a, b, p) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.winding_number(p) != 0
    }

    /// Inside test by summing the angles subtended by each edge, kept as a
    /// slow cross-check of `winding_number` (|sum| is 2*pi inside, ~0
    /// outside).
    pub fn inside_by_angle_scan(&self, p: [f64; 2]) -> bool {
        let n = self.verts.len();
        let mut total = 0.0f64;
        for k in 0..n {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % n];
            let t0 = (a[1] - p[1]).atan2(a[0] - p[0]);
            let t1 = (b[1] - p[1]).atan2(b[0] - p[0]);
            let mut d = t1 - t0;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d <= -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            total += d;
        }
        total.abs() > std::f64::consts::PI
    }

    /// Unsigned distance to the polygon boundary.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let n = self.verts.len();
        let mut best = f64::INFINITY;
        for k in 0..n {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % n];
            best = best.min(point_segment_distance(p, a, b));
        }
        best
    }

    /// Point on the polygon boundary closest to `p`.
    pub fn closest_point(&self, p: [f64; 2]) -> [f64; 2] {
        let n = self.verts.len();
        let mut best = f64::INFINITY;
        let mut q = self.verts[0];
        for k in 0..n {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % n];
            let ab = [b[0] - a[0], b[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            if d2 < best {
                best = d2;
                q = c;
            }
        }
        q
    }

    /// Signed distance: positive outside the domain, negative inside,
    /// zero on the boundary.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let d = self.distance(p);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Resample the polygon outline at `n` points equally spaced in arc
    /// length (useful for generating control points on a target shape).
    pub fn sample_by_arclength(&self, n: usize) -> Vec<[f64; 2]> {
        let nv = self.verts.len();
        let mut cum = Vec::with_capacity(nv + 1);
        cum.push(0.0);
        for k in 0..nv {
            let (a, b) = self.edge(k);
            let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cum.push(cum[k] + l);
        }
        let total = *cum.last().unwrap();
        let mut out = Vec::with_capacity(n);
        let mut k = 0usize;
        for m in 0..n {
            let s = total * m as f64 / n as f64;
            while k + 1 < nv && cum[k + 1] < s {
                k += 1;
            }
            let (a, b) = self.edge(k);
            let seg = cum[k + 1] - cum[k];
            let t = if seg > 0.0 { (s - cum[k]) / seg } else { 0.0 };
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        out
    }

    /// O(n^2) self-intersection scan with a bounding-box prefilter. Only
    /// run at construction; walls have at most a few thousand vertices.
    fn check_simple(&self) -> Result<()> {
        let n = self.verts.len();
        for i in 0..n {
            let (a0, a1) = self.edge(i);
            let (alox, ahix) = minmax(a0[0], a1[0]);
            let (aloy, ahiy) = minmax(a0[1], a1[1]);
            for j in (i + 2)..n {
                // Skip the closing edge's shared endpoint with edge 0.
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (b0, b1) = self.edge(j);
                if b0[0].max(b1[0]) < alox
                    || b0[0].min(b1[0]) > ahix
                    || b0[1].max(b1[1]) < aloy
                    || b0[1].min(b1[1]) > ahiy
                {
                    continue;
                }
                if segments_properly_intersect(a0, a1, b0, b1) {
                    return Err(GsError::Geometry(format!(
                        "polygon self-intersects (edges {i} and {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Shoelace centroid of an explicit vertex loop (shared with cut-cell
/// polygons, which are not `BoundaryPolygon`s).
pub fn centroid_of_loop(verts: &[[f64; 2]]) -> Result<[f64; 2]> {
    let n = verts.len();
    if n < 3 {
        return Err(GsError::Geometry("centroid of a degenerate loop".into()));
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sc = 0.0;
    for k in 0..n {
        let a = verts[k];
        let b = verts[(k + 1) % n];
        let cross = a[0] * b[1] - b[0] * a[1];
        sx += (a[0] + b[0]) * cross;
        sy += (a[1] + b[1]) * cross;
        sc += cross;
    }
    if sc.abs() < 1e-300 {
        return Err(GsError::Geometry("centroid of a zero-area loop".into()));
    }
    Ok([sx / (3.0 * sc), sy / (3.0 * sc)])
}

/// Twice the signed area of an explicit vertex loop.
pub fn area2_of_loop(verts: &[[f64; 2]]) -> f64 {
    let n = verts.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = verts[k];
        let b = verts[(k + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    s
}

#[inline]
fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// > 0 if p is left of the directed line a -> b.
#[inline]
fn is_left(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy).sqrt()
}

/// Proper crossing test for non-adjacent edges; touching at an endpoint of
/// either segment counts as an intersection (walls must not do that either).
fn segments_properly_intersect(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> bool {
    let d1 = is_left(a0, a1, b0);
    let d2 = is_left(a0, a1, b1);
    let d3 = is_left(b0, b1, a0);
    let d4 = is_left(b0, b1, a1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Collinear overlap / endpoint touching.
    let on = |d: f64, p: [f64; 2], s0: [f64; 2], s1: [f64; 2]| {
        d == 0.0
            && p[0] >= s0[0].min(s1[0])
            && p[0] <= s0[0].max(s1[0])
            && p[1] >= s0[1].min(s1[1])
            && p[1] <= s0[1].max(s1[1])
    };
    on(d1, b0, a0, a1) || on(d2, b1, a0, a1) || on(d3, a0, b0, b1) || on(d4, a1, b0, b1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> BoundaryPolygon {
        BoundaryPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    /// Independent centroid oracle: fan triangulation from vertex 0 with
    /// area-weighted triangle centroids.
    fn fan_centroid(verts: &[[f64; 2]]) -> [f64; 2] {
        let mut ax = 0.0;
        let mut ay = 0.0;
        let mut aa = 0.0;
        for k in 1..verts.len() - 1 {
            let (p, q, r) = (verts[0], verts[k], verts[k + 1]);
            let a = 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
            let cx = (p[0] + q[0] + r[0]) / 3.0;
            let cy = (p[1] + q[1] + r[1]) / 3.0;
            ax += a * cx;
            ay += a * cy;
            aa += a;
        }
        [ax / aa, ay / aa]
    }

    #[test]
    fn square_basics() {
        let sq = unit_square();
        assert!((sq.area() - 1.0).abs() < 1e-15);
        let c = sq.centroid().unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
        assert!(sq.contains([0.5, 0.5]));
        assert!(!sq.contains([1.5, 0.5]));
        assert!((sq.signed_distance([0.5, 0.5]) + 0.5).abs() < 1e-15);
        assert!((sq.signed_distance([2.0, 0.5]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centroid_matches_fan_triangulation_oracle() {
        // Non-convex hexagon.
        let verts = vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 0.4],
            [0.7, 1.3],
            [0.0, 1.0],
        ];
        let poly = BoundaryPolygon::new(verts.clone()).unwrap();
        let want = fan_centroid(&verts);
        let got = poly.centroid().unwrap();
        assert!((got[0] - want[0]).abs() < 1e-14, "{got:?} vs {want:?}");
        assert!((got[1] - want[1]).abs() < 1e-14);
    }

    #[test]
    fn winding_agrees_with_angle_scan() {
        let verts = vec![
            [1.0, 0.0],
            [2.0, 0.4],
            [2.4, 1.5],
            [1.5, 2.2],
            [0.4, 1.8],
            [0.2, 0.6],
        ];
        let poly = BoundaryPolygon::new(verts).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let p = [0.0 + 2.6 * i as f64 / 39.0, -0.2 + 2.7 * j as f64 / 39.0];
                if poly.distance(p) < 1e-9 {
                    continue;
                }
                assert_eq!(
                    poly.contains(p),
                    poly.inside_by_angle_scan(p),
                    "disagreement at {p:?}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(BoundaryPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // Clockwise.
        assert!(
            BoundaryPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err()
        );
        // Bowtie.
        assert!(
            BoundaryPolygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err()
        );
        // Repeated vertex.
        assert!(BoundaryPolygon::new(vec![
            [0.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0]
        ])
        .is_err());
    }

    #[test]
    fn arclength_sampling_is_even() {
        let sq = unit_square();
        let pts = sq.sample_by_arclength(8);
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], [0.0, 0.0]);
        assert!((pts[1][0] - 0.5).abs() < 1e-14 && pts[1][1] == 0.0);
        assert!((pts[2][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn closest_point_agrees_with_distance() {
        let sq = unit_square();
        // interior point: nearest edge is the bottom
        let q = sq.closest_point([0.3, 0.2]);
        assert!((q[0] - 0.3).abs() < 1e-14 && q[1].abs() < 1e-14);
        // outside a corner: snaps to the vertex
        let q = sq.closest_point([1.5, 1.5]);
        assert!((q[0] - 1.0).abs() < 1e-14 && (q[1] - 1.0).abs() < 1e-14);
        for i in 0..20 {
            let p = [1.37 * i as f64 / 19.0 - 0.2, 0.11 + 0.06 * i as f64];
            let q = sq.closest_point(p);
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            assert!((d - sq.distance(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn signed_distance_sign_matches_winding_oracle() {
        let verts = vec![
            [1.0, -0.2],
            [1.8, 0.1],
            [2.0, 1.0],
            [1.2, 1.6],
            [0.3, 1.2],
            [0.2, 0.3],
        ];
        let poly = BoundaryPolygon::new(verts).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                let p = [0.0 + 2.2 * i as f64 / 24.0, -0.4 + 2.2 * j as f64 / 24.0];
                let sd = poly.signed_distance(p);
                if sd.abs() < 1e-9 {
                    continue;
                }
                assert_eq!(sd < 0.0, poly.winding_number(p) != 0);
            }
        }
    }
}
