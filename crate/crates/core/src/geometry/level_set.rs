//! Signed distance to the wall polygon, sampled at cell corners.
//!
//! Sign convention: positive outside the computational domain, negative
//! inside, zero on the boundary. Cell classification and edge apertures
//! are all derived from these corner values, so this is the single place
//! where "inside" is decided.
//!
//! Distances use a uniform spatial bin over the polygon edges (corner
//! counts times edge counts gets large on convergence-study meshes);
//! the inside/outside sign uses one crossing-parity sweep per corner row,
//! which is O(edges) per row instead of per corner.

use crate::error::Result;
use crate::geometry::polygon::{point_segment_distance, BoundaryPolygon};
use crate::grid::CartesianGrid;

#[derive(Debug, Clone)]
pub struct LevelSet {
    /// Corners per row (= grid.nr + 1).
    pub ncr: usize,
    /// Corner rows (= grid.nz + 1).
    pub ncz: usize,
    /// Signed distance at corner (ic, jc), flat index jc * ncr + ic.
    pub phi: Vec<f64>,
}

impl LevelSet {
    #[inline]
    pub fn at(&self, ic: usize, jc: usize) -> f64 {
        debug_assert!(ic < self.ncr && jc < self.ncz);
        self.phi[jc * self.ncr + ic]
    }
}

/// Spatial index over polygon edges for nearest-distance queries.
struct SegmentBins {
    x0: f64,
    y0: f64,
    w: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl SegmentBins {
    fn build(poly: &BoundaryPolygon) -> Self {
        let (lo, hi) = poly.bbox();
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let n_target = (poly.len() as f64).sqrt().ceil() as usize;
        let n = n_target.clamp(8, 256);
        let w = span / n as f64;
        let nx = (((hi[0] - lo[0]) / w).ceil() as usize + 1).max(1);
        let ny = (((hi[1] - lo[1]) / w).ceil() as usize + 1).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        for k in 0..poly.len() {
            let (a, b) = poly.edge(k);
            let ix0 = (((a[0].min(b[0]) - lo[0]) / w).floor() as isize).clamp(0, nx as isize - 1);
            let ix1 = (((a[0].max(b[0]) - lo[0]) / w).floor() as isize).clamp(0, nx as isize - 1);
            let iy0 = (((a[1].min(b[1]) - lo[1]) / w).floor() as isize).clamp(0, ny as isize - 1);
            let iy1 = (((a[1].max(b[1]) - lo[1]) / w).floor() as isize).clamp(0, ny as isize - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy as usize * nx + ix as usize].push(k as u32);
                }
            }
        }
        Self { x0: lo[0], y0: lo[1], w, nx, ny, bins }
    }

    /// Exact distance from p to the polygon, searching bins in expanding
    /// rings around p until no closer edge can exist.
    fn distance(&self, poly: &BoundaryPolygon, p: [f64; 2]) -> f64 {
        let cx = ((p[0] - self.x0) / self.w).floor() as isize;
        let cy = ((p[1] - self.y0) / self.w).floor() as isize;
        let cx = cx.clamp(0, self.nx as isize - 1);
        let cy = cy.clamp(0, self.ny as isize - 1);
        // Offset of p from the searched bin region (nonzero when p lies
        // outside the polygon bounding box).
        let qx = p[0].clamp(self.x0, self.x0 + self.nx as f64 * self.w);
        let qy = p[1].clamp(self.y0, self.y0 + self.ny as f64 * self.w);
        let d_out = ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt();

        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny) as isize + 1;
        for ring in 0..=max_ring {
            // Any edge in a bin at Chebyshev ring r is at least this far away.
            let lower = d_out + ((ring - 1).max(0) as f64) * self.w;
            if best <= lower {
                break;
            }
            for iy in (cy - ring)..=(cy + ring) {
                if iy < 0 || iy >= self.ny as isize {
                    continue;
                }
                for ix in (cx - ring)..=(cx + ring) {
                    if ix < 0 || ix >= self.nx as isize {
                        continue;
                    }
                    // Ring boundary only.
                    if (iy - cy).abs() != ring && (ix - cx).abs() != ring {
                        continue;
                    }
                    for &k in &self.bins[iy as usize * self.nx + ix as usize] {
                        let (a, b) = poly.edge(k as usize);
                        best = best.min(point_segment_distance(p, a, b));
                    }
                }
            }
        }
        debug_assert!(best.is_finite());
        best
    }
}

/// Sample the signed distance to `poly` at every cell corner of `grid`.
pub fn build_level_set(grid: &CartesianGrid, poly: &BoundaryPolygon) -> Result<LevelSet> {
    let ncr = grid.nr + 1;
    let ncz = grid.nz + 1;
    let bins = SegmentBins::build(poly);
    let (lo, hi) = poly.bbox();
    let zero_tol = 1e-12 * ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();

    let mut phi = vec![0.0f64; ncr * ncz];
    let mut crossings: Vec<f64> = Vec::new();
    for jc in 0..ncz {
        let y = grid.corner(0, jc)[1];
        // All x where the polygon outline crosses this corner row. The
        // half-open convention (a.y <= y < b.y or b.y <= y < a.y) counts
        // vertex touches exactly once.
        crossings.clear();
        for k in 0..poly.len() {
            let (a, b) = poly.edge(k);
            if (a[1] <= y && y < b[1]) || (b[1] <= y && y < a[1]) {
                crossings.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
            }
        }
        crossings.sort_by(|u, v| u.partial_cmp(v).unwrap());
        for ic in 0..ncr {
            let p = grid.corner(ic, jc);
            let d = bins.distance(poly, p);
            let v = if d <= zero_tol {
                0.0
            } else {
                let n_left = crossings.partition_point(|&x| x < p[0]);
                if n_left % 2 == 1 {
                    -d
                } else {
                    d
                }
            };
            phi[jc * ncr + ic] = v;
        }
    }
    Ok(LevelSet { ncr, ncz, phi })
}
