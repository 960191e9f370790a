//! Critical points of the poloidal flux and the normalization built on them.
//!
//! An equilibrium field is organized by its critical points: the magnetic
//! axis (an extremum of ψ) and any X-points (saddles). The search runs in
//! two stages. A coarse pass computes ‖∇ψ‖² at every grid point by central
//! differences and keeps the handful of local minima as candidates; each
//! candidate then seeds a Newton iteration on ∇ψ = 0 using a smooth local
//! representation of the field — a 6×6-node tensor-product barycentric
//! interpolant, whose differentiated form supplies consistent gradients
//! and Hessians off the grid.
//!
//! From the classified points, [`select_normalization`] picks the axis
//! value ψ_o and the separatrix value ψ_X defining the normalized flux
//! ψ̄ = (ψ − ψ_o)/(ψ_X − ψ_o), falling back to the wall ("limited"
//! plasma) when no saddle exists inside the domain.

use rayon::prelude::*;

use crate::error::{GsError, Result};
use crate::geometry::CutCellMesh;
use crate::interp::Bary2D;

/// Nodes per side of the local interpolation window.
const WINDOW: usize = 6;
/// Blend degree of the window interpolant.
const WINDOW_DEGREE: usize = 4;
/// Candidates kept after the coarse scan.
const MAX_CANDIDATES: usize = 10;
/// Newton iteration budget per candidate.
const NEWTON_MAX_ITER: usize = 50;
/// Gradient tolerance, relative to the largest coarse gradient.
const NEWTON_TOL_REL: f64 = 1e-8;
/// Merge radius for duplicate roots, in units of the larger grid spacing.
const DEDUP_SPACINGS: f64 = 2.0;

/// How a critical point curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    /// Local minimum of ψ (det H > 0, positive curvature).
    Minimum,
    /// Local maximum of ψ (det H > 0, negative curvature).
    Maximum,
    /// Saddle of ψ (det H < 0): an X-point candidate.
    Saddle,
}

impl CriticalKind {
    /// Minima and maxima are magnetic-axis candidates.
    pub fn is_extremum(self) -> bool {
        matches!(self, CriticalKind::Minimum | CriticalKind::Maximum)
    }
}

/// A converged zero of ∇ψ with its classification.
#[derive(Debug, Clone, Copy)]
pub struct CriticalPoint {
    pub r: f64,
    pub z: f64,
    pub psi: f64,
    pub kind: CriticalKind,
    /// Hessian determinant ψ_RR ψ_ZZ − ψ_RZ² at the point.
    pub hessian_det: f64,
}

/// The flux normalization: axis and separatrix values with their
/// locations. ψ̄(axis) = 0 and ψ̄(x_point) = 1 by construction.
#[derive(Debug, Clone, Copy)]
pub struct Normalization {
    pub axis: [f64; 2],
    pub psi_axis: f64,
    /// Saddle location, or the wall touch point for a limited plasma.
    pub x_point: [f64; 2],
    pub psi_x: f64,
    /// True when ψ_X came from the wall rather than a saddle.
    pub limited: bool,
}

impl Normalization {
    /// Normalized flux of a raw ψ value.
    pub fn psi_bar(&self, psi: f64) -> f64 {
        (psi - self.psi_axis) / (self.psi_x - self.psi_axis)
    }
}

/// Find the critical points of a grid flux field.
///
/// `psi` is a full grid vector (one entry per grid point; inactive entries
/// are ignored). Returned points are deduplicated, classified, restricted
/// to the interior of the wall polygon, and sorted by ψ value. Candidates
/// whose Newton iteration stalls, walks out of the active region, or lands
/// on a degenerate Hessian are dropped with a debug log, not an error: the
/// coarse scan deliberately over-collects.
pub fn find_critical_points(mesh: &CutCellMesh, psi: &[f64]) -> Result<Vec<CriticalPoint>> {
    let g = &mesh.grid;
    let n = g.n_points();
    if psi.len() != n {
        return Err(GsError::Config(format!(
            "flux field has {} entries, grid has {n} points",
            psi.len()
        )));
    }
    if g.nr < WINDOW || g.nz < WINDOW {
        return Err(GsError::Config(format!(
            "critical-point search needs at least {WINDOW} points per direction, got {}x{}",
            g.nr, g.nz
        )));
    }

    // Coarse pass: squared gradient magnitude by central differences,
    // infinity where a stencil arm would leave the active set.
    let (nr, nz) = (g.nr, g.nz);
    let mut g2 = vec![f64::INFINITY; n];
    g2.par_chunks_mut(nr).enumerate().for_each(|(j, row)| {
        if j == 0 || j == nz - 1 {
            return;
        }
        for (i, v) in row.iter_mut().enumerate().take(nr - 1).skip(1) {
            let idx = g.idx(i, j);
            let ok = mesh.is_active_idx(idx)
                && mesh.is_active_idx(idx - 1)
                && mesh.is_active_idx(idx + 1)
                && mesh.is_active_idx(idx - nr)
                && mesh.is_active_idx(idx + nr);
            if ok {
                let dr = (psi[idx + 1] - psi[idx - 1]) / (2.0 * g.dr);
                let dz = (psi[idx + nr] - psi[idx - nr]) / (2.0 * g.dz);
                *v = dr * dr + dz * dz;
            }
        }
    });

    let scale2 = g2.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    if scale2 == 0.0 {
        // A constant field has no isolated critical points.
        return Ok(Vec::new());
    }
    let tol = NEWTON_TOL_REL * scale2.sqrt();

    // Keep grid points that minimize ‖∇ψ‖² over their 3×3 neighbourhood,
    // then the lowest few of those.
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for j in 1..nz - 1 {
        for i in 1..nr - 1 {
            let idx = g.idx(i, j);
            let v = g2[idx];
            if !v.is_finite() {
                continue;
            }
            let mut lowest = true;
            'nbhd: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let nb = (idx as i64 + dj * nr as i64 + di) as usize;
                    if g2[nb] < v {
                        lowest = false;
                        break 'nbhd;
                    }
                }
            }
            if lowest {
                candidates.push((v, idx));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(MAX_CANDIDATES);

    let mut found: Vec<(f64, CriticalPoint)> = Vec::new();
    for &(_, idx) in &candidates {
        let (i, j) = g.ij(idx);
        match newton_refine(mesh, psi, [g.r(i), g.z(j)], tol) {
            Some(hit) => found.push(hit),
            None => log::debug!(
                "critical-point candidate at ({:.4}, {:.4}) dropped",
                g.r(i),
                g.z(j)
            ),
        }
    }

    // Merge duplicates (best gradient residual wins), then keep points
    // inside the wall.
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radius = DEDUP_SPACINGS * g.dr.max(g.dz);
    let mut points: Vec<CriticalPoint> = Vec::new();
    for (_, p) in found {
        let dup = points
            .iter()
            .any(|q| (q.r - p.r).hypot(q.z - p.z) <= radius);
        if !dup && mesh.polygon.contains([p.r, p.z]) {
            points.push(p);
        }
    }
    points.sort_by(|a, b| a.psi.total_cmp(&b.psi));
    Ok(points)
}

/// Newton iteration on ∇ψ = 0 from one coarse candidate. Returns the
/// converged point with its final gradient norm, or `None` when the run
/// should be discarded.
fn newton_refine(
    mesh: &CutCellMesh,
    psi: &[f64],
    start: [f64; 2],
    tol: f64,
) -> Option<(f64, CriticalPoint)> {
    let g = &mesh.grid;
    let (mut r, mut z) = (start[0], start[1]);
    let r_lo = g.r0;
    let r_hi = g.r(g.nr - 1);
    let z_lo = g.z0;
    let z_hi = g.z(g.nz - 1);

    for _ in 0..NEWTON_MAX_ITER {
        // 6×6 window of grid nodes around the current point, pulled inside
        // the grid near its edges. Every node must carry a live value.
        let ib = window_base((r - g.r0) / g.dr, g.nr);
        let jb = window_base((z - g.z0) / g.dz, g.nz);
        let mut f = [0.0; WINDOW * WINDOW];
        for wj in 0..WINDOW {
            for wi in 0..WINDOW {
                let idx = g.idx(ib + wi, jb + wj);
                if !mesh.is_active_idx(idx) {
                    return None;
                }
                f[wj * WINDOW + wi] = psi[idx];
            }
        }
        let xs: Vec<f64> = (0..WINDOW).map(|k| g.r(ib + k)).collect();
        let ys: Vec<f64> = (0..WINDOW).map(|k| g.z(jb + k)).collect();
        let jet = Bary2D::uniform(xs, ys, WINDOW_DEGREE).ok()?.eval(&f, r, z);

        let gnorm = jet.fx.hypot(jet.fy);
        let det = jet.fxx * jet.fyy - jet.fxy * jet.fxy;
        if gnorm <= tol {
            let hscale = jet.fxx * jet.fxx + 2.0 * jet.fxy * jet.fxy + jet.fyy * jet.fyy;
            if det.abs() <= 1e-12 * hscale {
                // Degenerate stationary point: unclassifiable.
                return None;
            }
            let kind = if det > 0.0 {
                if jet.fxx + jet.fyy > 0.0 {
                    CriticalKind::Minimum
                } else {
                    CriticalKind::Maximum
                }
            } else {
                CriticalKind::Saddle
            };
            return Some((
                gnorm,
                CriticalPoint { r, z, psi: jet.f, kind, hessian_det: det },
            ));
        }
        if det == 0.0 {
            return None;
        }
        let mut sr = (jet.fxy * jet.fy - jet.fyy * jet.fx) / det;
        let mut sz = (jet.fxy * jet.fx - jet.fxx * jet.fy) / det;
        // Trust the quadratic model only out to a couple of cells.
        let stretch = (sr.abs() / (2.0 * g.dr)).max(sz.abs() / (2.0 * g.dz));
        if stretch > 1.0 {
            sr /= stretch;
            sz /= stretch;
        }
        r += sr;
        z += sz;
        if r < r_lo || r > r_hi || z < z_lo || z > z_hi {
            return None;
        }
    }
    None
}

/// First node index of a window that brackets fractional grid coordinate
/// `t` near its middle, clamped to the grid.
///
/// Within a whisker of a node, that node's window is used from both sides:
/// otherwise the stencil — and its tiny gradient noise — would flip with
/// the sign of the offset, and a Newton iterate sitting on a node line
/// (common for up-down symmetric fields) could ping-pong between the two
/// stencils' near-zero gradients without ever satisfying the tolerance.
fn window_base(t: f64, n: usize) -> usize {
    let tn = t.round();
    let t_eff = if (t - tn).abs() <= 1e-3 { tn } else { t };
    let half = (WINDOW / 2 - 1) as f64;
    let base = t_eff.floor() - half;
    base.clamp(0.0, (n - WINDOW) as f64) as usize
}

/// Choose the axis and separatrix values from a set of critical points.
///
/// Exactly one extremum must be present — several (or none) means the
/// iterate does not describe a single nested equilibrium and further
/// iteration cannot repair it. Among saddles, the separatrix is the one
/// reached first walking outward from the axis: the smallest saddle ψ when
/// the axis is a minimum, the largest when it is a maximum. Without any
/// saddle the plasma is limited by the wall and ψ_X is taken from the
/// facet-midpoint flux `facet_psi` (same ordering rule), so the last
/// closed surface touches the wall.
pub fn select_normalization(
    points: &[CriticalPoint],
    mesh: &CutCellMesh,
    facet_psi: &[f64],
) -> Result<Normalization> {
    if facet_psi.len() != mesh.facets.len() {
        return Err(GsError::Config(format!(
            "facet flux has {} entries, wall has {} facets",
            facet_psi.len(),
            mesh.facets.len()
        )));
    }
    let extrema: Vec<&CriticalPoint> = points.iter().filter(|p| p.kind.is_extremum()).collect();
    let axis = match extrema.as_slice() {
        [one] => **one,
        [] => {
            return Err(GsError::InvalidSolution(format!(
                "no magnetic axis among {} critical points",
                points.len()
            )))
        }
        many => {
            return Err(GsError::InvalidSolution(format!(
                "{} magnetic axes found (field is not a single nested equilibrium)",
                many.len()
            )))
        }
    };
    let convex = axis.kind == CriticalKind::Minimum;

    let saddle = points
        .iter()
        .filter(|p| p.kind == CriticalKind::Saddle)
        .fold(None::<&CriticalPoint>, |best, p| match best {
            None => Some(p),
            Some(b) => {
                let better = if convex { p.psi < b.psi } else { p.psi > b.psi };
                Some(if better { p } else { b })
            }
        });

    let (x_point, psi_x, limited) = match saddle {
        Some(s) => ([s.r, s.z], s.psi, false),
        None => {
            // Limited plasma: the boundary flux is taken where the nested
            // surfaces first touch the wall.
            let k = (0..facet_psi.len())
                .reduce(|a, b| {
                    let better = if convex {
                        facet_psi[b] < facet_psi[a]
                    } else {
                        facet_psi[b] > facet_psi[a]
                    };
                    if better {
                        b
                    } else {
                        a
                    }
                })
                .ok_or_else(|| GsError::Internal("mesh has no wall facets".into()))?;
            (mesh.facets[k].midpoint, facet_psi[k], true)
        }
    };

    if psi_x == axis.psi {
        return Err(GsError::InvalidSolution(
            "axis and separatrix flux coincide; normalization is undefined".into(),
        ));
    }
    Ok(Normalization {
        axis: [axis.r, axis.z],
        psi_axis: axis.psi,
        x_point,
        psi_x,
        limited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cut_cell_mesh, BoundaryPolygon};
    use crate::grid::CartesianGrid;
    use crate::manufactured::{grid_field, Soloviev};
    use approx::assert_relative_eq;

    fn rect_mesh(n: usize) -> CutCellMesh {
        let grid = CartesianGrid::from_extents(1.0, 2.0, -0.5, 0.5, n, n).unwrap();
        let wall = BoundaryPolygon::rectangle(1.08, 1.92, -0.42, 0.42).unwrap();
        build_cut_cell_mesh(&grid, &wall).unwrap()
    }

    #[test]
    fn quadratic_bowl_yields_one_minimum() {
        let mesh = rect_mesh(41);
        let (r0, z0) = (1.47, 0.06);
        let psi = grid_field(&mesh, |r, z| (r - r0).powi(2) + (z - z0).powi(2));
        let pts = find_critical_points(&mesh, &psi).unwrap();
        assert_eq!(pts.len(), 1);
        let p = &pts[0];
        assert_eq!(p.kind, CriticalKind::Minimum);
        assert!(p.hessian_det > 0.0);
        // The interpolant reproduces quadratics exactly, so Newton lands on
        // the analytic minimum.
        assert_relative_eq!(p.r, r0, epsilon = 1e-9);
        assert_relative_eq!(p.z, z0, epsilon = 1e-9);
        assert!(p.psi.abs() < 1e-12);
    }

    #[test]
    fn pure_saddle_is_classified() {
        let mesh = rect_mesh(41);
        let (r0, z0) = (1.52, -0.04);
        let psi = grid_field(&mesh, |r, z| (r - r0).powi(2) - (z - z0).powi(2));
        let pts = find_critical_points(&mesh, &psi).unwrap();
        assert_eq!(pts.len(), 1);
        let p = &pts[0];
        assert_eq!(p.kind, CriticalKind::Saddle);
        assert!(p.hessian_det < 0.0);
        assert_relative_eq!(p.r, r0, epsilon = 1e-9);
        assert_relative_eq!(p.z, z0, epsilon = 1e-9);
    }

    #[test]
    fn soloviev_axis_matches_the_analytic_location() {
        let sol = Soloviev::iter_like();
        let wall = sol.boundary(256).unwrap();
        let grid = CartesianGrid::from_extents(0.60, 1.40, -0.63, 0.63, 121, 161).unwrap();
        let mesh = build_cut_cell_mesh(&grid, &wall).unwrap();
        let psi = grid_field(&mesh, |r, z| sol.psi(r, z));
        let pts = find_critical_points(&mesh, &psi).unwrap();
        let axes: Vec<_> = pts.iter().filter(|p| p.kind.is_extremum()).collect();
        assert_eq!(axes.len(), 1);
        let (ra, za, pa) = sol.magnetic_axis();
        // ψ is a polynomial of degree four, reproduced exactly by the
        // window interpolant: the search hits the true axis to far better
        // than the micrometre the solver promises.
        assert!((axes[0].r - ra).hypot(axes[0].z - za) < 1e-6);
        assert_relative_eq!(axes[0].psi, pa, max_relative = 1e-9);
        assert_eq!(axes[0].kind, CriticalKind::Minimum);
    }

    #[test]
    fn locations_survive_affine_rescaling() {
        let mesh = rect_mesh(41);
        let (r0, z0) = (1.44, 0.03);
        // A bowl with a saddle-ish ripple so both kinds are present.
        let base = |r: f64, z: f64| {
            (r - r0).powi(2) + (z - z0).powi(2) + 0.3 * (r - r0).powi(2) * (z - z0).powi(2)
        };
        let psi = grid_field(&mesh, base);
        let reference = find_critical_points(&mesh, &psi).unwrap();
        assert!(!reference.is_empty());
        for &(a, b) in &[(2.0, 0.0), (-3.5, 0.7), (0.25, -1.3)] {
            let scaled = grid_field(&mesh, |r, z| a * base(r, z) + b);
            let pts = find_critical_points(&mesh, &scaled).unwrap();
            assert_eq!(pts.len(), reference.len());
            for q in &reference {
                let hit = pts
                    .iter()
                    .find(|p| (p.r - q.r).hypot(p.z - q.z) < 1e-7)
                    .expect("critical point moved under affine rescaling");
                let want = match (q.kind, a < 0.0) {
                    (CriticalKind::Minimum, true) => CriticalKind::Maximum,
                    (CriticalKind::Maximum, true) => CriticalKind::Minimum,
                    (k, _) => k,
                };
                assert_eq!(hit.kind, want);
            }
        }
    }

    fn point(r: f64, z: f64, psi: f64, kind: CriticalKind) -> CriticalPoint {
        let det = if kind == CriticalKind::Saddle { -1.0 } else { 1.0 };
        CriticalPoint { r, z, psi, kind, hessian_det: det }
    }

    #[test]
    fn saddle_selection_follows_the_ordering_rule() {
        let mesh = rect_mesh(17);
        let fp = vec![0.0; mesh.facets.len()];

        // Convex field: the lowest saddle bounds the plasma.
        let pts = vec![
            point(1.5, 0.0, -2.0, CriticalKind::Minimum),
            point(1.3, 0.2, -0.5, CriticalKind::Saddle),
            point(1.7, -0.2, -0.1, CriticalKind::Saddle),
        ];
        let n = select_normalization(&pts, &mesh, &fp).unwrap();
        assert_eq!(n.psi_axis, -2.0);
        assert_eq!(n.psi_x, -0.5);
        assert_eq!(n.x_point, [1.3, 0.2]);
        assert!(!n.limited);
        assert_relative_eq!(n.psi_bar(-2.0), 0.0);
        assert_relative_eq!(n.psi_bar(-0.5), 1.0);

        // Concave field: mirrored rule.
        let pts = vec![
            point(1.5, 0.0, 2.0, CriticalKind::Maximum),
            point(1.4, 0.1, 0.3, CriticalKind::Saddle),
            point(1.6, -0.1, 0.9, CriticalKind::Saddle),
        ];
        let n = select_normalization(&pts, &mesh, &fp).unwrap();
        assert_eq!(n.psi_x, 0.9);
    }

    #[test]
    fn degenerate_point_sets_are_rejected() {
        let mesh = rect_mesh(17);
        let fp = vec![0.0; mesh.facets.len()];
        let two = vec![
            point(1.3, 0.0, -1.0, CriticalKind::Minimum),
            point(1.7, 0.0, -0.9, CriticalKind::Minimum),
        ];
        assert!(matches!(
            select_normalization(&two, &mesh, &fp),
            Err(GsError::InvalidSolution(_))
        ));
        let none = vec![point(1.5, 0.1, -0.2, CriticalKind::Saddle)];
        assert!(matches!(
            select_normalization(&none, &mesh, &fp),
            Err(GsError::InvalidSolution(_))
        ));
        assert!(matches!(
            select_normalization(&[], &mesh, &fp),
            Err(GsError::InvalidSolution(_))
        ));
    }

    #[test]
    fn limited_plasma_takes_the_wall_touch_point() {
        let mesh = rect_mesh(41);
        let (r0, z0) = (1.35, 0.03);
        let bowl = |r: f64, z: f64| (r - r0).powi(2) + (z - z0).powi(2);
        let psi = grid_field(&mesh, bowl);
        let pts = find_critical_points(&mesh, &psi).unwrap();
        let fp: Vec<f64> = mesh
            .facets
            .iter()
            .map(|f| bowl(f.midpoint[0], f.midpoint[1]))
            .collect();
        let n = select_normalization(&pts, &mesh, &fp).unwrap();
        assert!(n.limited);
        // First contact is on the nearest wall, here the inner one.
        let k = (0..fp.len())
            .min_by(|&a, &b| fp[a].total_cmp(&fp[b]))
            .unwrap();
        assert_eq!(n.psi_x, fp[k]);
        assert_eq!(n.x_point, mesh.facets[k].midpoint);
        assert!((n.x_point[0] - 1.08).abs() < 1e-12);
        // ψ̄ stays below one inside the touched surface.
        assert!(n.psi_bar(bowl(r0 + 0.1, z0)) < 1.0);
    }
}
