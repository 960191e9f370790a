//! Boundary values of the poloidal flux from Green's function integrals.
//!
//! The flux on the wall splits into the plasma part and the coil part.
//! Two routes to the plasma part are implemented:
//!
//! * a volume integral of G against the toroidal current over the covered
//!   cells (straightforward, O(cells) kernel evaluations per wall point);
//! * the von Hagenow reduction to a line integral: solve the same problem
//!   once with zero Dirichlet data (the field `U`), then integrate
//!   (dl/R) G dU/dn over the wall.
//!
//! Both are exposed; they must agree, and the agreement under refinement
//! is one of the standing verification checks. The line integral is the
//! production path: its weights are a dense (wall points x wall facets)
//! matrix computed once per mesh and reused every outer iteration.
//!
//! The kernel is logarithmically singular when an evaluation point meets
//! a quadrature node, so the composite-midpoint rule is patched in two
//! deterministic, mesh-scaled ways. A point sitting on a node evaluates
//! that segment's kernel shifted radially inward to the log-mean
//! distance len/(2e), which integrates the leading ln(1/rho) behavior
//! over the segment exactly (dropping the term instead leaves an
//! O(h log h) hole; shifting by len/2 misstates the log mean -- both
//! visibly break the agreement with the volume formulation). A segment
//! merely near the point (closer than its own length) is subdivided
//! eightfold so the midpoint rule sees the kernel's curvature.

use rayon::prelude::*;

use crate::coils::CoilSet;
use crate::elliptic::{solve, Operator, SolveOptions, SolveStats};
use crate::error::{GsError, Result};
use crate::geometry::CutCellMesh;
use crate::greens::greens_function;
use crate::MU0;

/// Solve the homogeneous-Dirichlet problem for the source field `s`
/// (full-length grid vector, evaluated at covered centroids): the `U` of
/// the line-integral boundary formulation.
pub fn solve_homogeneous_u(
    op: &Operator,
    s: &[f64],
    warm: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let zero_bc = vec![0.0; op.facet_rhs_coef.len()];
    let b = op.rhs(s, &zero_bc, None);
    solve(&op.matrix, &b, warm, opts)
}

/// Outward normal derivative of `u` at every wall facet midpoint, with
/// the homogeneous boundary value built in.
pub fn facet_normal_derivatives(op: &Operator, u: &[f64]) -> Vec<f64> {
    (0..op.facet_stencils.len())
        .map(|k| op.facet_normal_gradient(k, u, 0.0))
        .collect()
}

/// Precomputed kernel weights tying wall facets and coils to a fixed set
/// of evaluation points. Immutable after construction; rebuilding is only
/// needed when the mesh or the coil geometry changes.
#[derive(Debug, Clone)]
pub struct BoundaryWeights {
    pub eval_points: Vec<[f64; 2]>,
    n_facets: usize,
    n_coils: usize,
    /// (length/R) G per (evaluation point, facet), evaluation-major,
    /// singularity rules applied.
    w_line: Vec<f64>,
    /// Flux at each evaluation point per unit per-turn current in each
    /// coil: -mu0 * turns * G summed over sub-loops.
    w_coil: Vec<f64>,
}

impl BoundaryWeights {
    /// Weights with the evaluation points at the wall facet midpoints --
    /// the layout used by the free-boundary iteration itself.
    pub fn at_facet_midpoints(mesh: &CutCellMesh, coils: &CoilSet) -> Result<Self> {
        let pts = mesh.facets.iter().map(|f| f.midpoint).collect();
        Self::precompute(mesh, coils, pts)
    }

    pub fn precompute(
        mesh: &CutCellMesh,
        coils: &CoilSet,
        eval_points: Vec<[f64; 2]>,
    ) -> Result<Self> {
        coils.validate_outside(&mesh.polygon)?;
        let n_facets = mesh.facets.len();
        let n_coils = coils.len();

        let mut w_line = vec![0.0; eval_points.len() * n_facets];
        w_line
            .par_chunks_mut(n_facets.max(1))
            .zip(eval_points.par_iter())
            .for_each(|(row, &p)| {
                if n_facets > 0 {
                    line_weight_row(mesh, p, row);
                }
            });

        let mut w_coil = vec![0.0; eval_points.len() * n_coils];
        let sub: Vec<Vec<(f64, f64, f64)>> = (0..n_coils).map(|i| coils.subcoils(i)).collect();
        w_coil
            .par_chunks_mut(n_coils.max(1))
            .zip(eval_points.par_iter())
            .for_each(|(row, &p)| {
                for (i, loops) in sub.iter().enumerate() {
                    let mut g = 0.0;
                    for &(r, z, t) in loops {
                        // Coils are validated outside the wall, so the
                        // kernel cannot degenerate here.
                        g += t * greens_function(r, z, p[0], p[1]).unwrap_or(0.0);
                    }
                    row[i] = -MU0 * g;
                }
            });

        Ok(BoundaryWeights { eval_points, n_facets, n_coils, w_line, w_coil })
    }

    pub fn n_eval(&self) -> usize {
        self.eval_points.len()
    }

    fn line_row(&self, j: usize) -> &[f64] {
        &self.w_line[j * self.n_facets..(j + 1) * self.n_facets]
    }

    fn coil_row(&self, j: usize) -> &[f64] {
        &self.w_coil[j * self.n_coils..(j + 1) * self.n_coils]
    }

    /// Flux at evaluation point `j` per unit per-turn current of coil `i`.
    pub fn coil_weight(&self, j: usize, i: usize) -> f64 {
        self.coil_row(j)[i]
    }

    /// The coil-free part of the flux at every evaluation point:
    /// −∮(dl/R) G ∂U/∂n, with `q` the wall normal derivatives. This is
    /// what the external currents must complete to reach a target flux.
    pub fn line_flux(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.n_facets {
            return Err(GsError::Config(format!(
                "weights built for {} facets, got {} normal derivatives",
                self.n_facets,
                q.len()
            )));
        }
        Ok((0..self.n_eval())
            .into_par_iter()
            .map(|j| {
                let mut s = 0.0;
                for (w, qf) in self.line_row(j).iter().zip(q) {
                    s -= w * qf;
                }
                s
            })
            .collect())
    }
}

/// One row of line-integral weights: (length/R) G(node; p) over all wall
/// facets, with the singularity rules from the module docs.
const NEAR_SUBDIVISION: usize = 8;

/// (1/R_node) G(node; p), with p moved radially inward to the log-mean
/// distance of the node's segment when it sits closer than that.
fn kernel_at(node: [f64; 2], p: [f64; 2], seg_len: f64) -> f64 {
    let rho_star = seg_len / (2.0 * std::f64::consts::E);
    let d2 = (p[0] - node[0]).powi(2) + (p[1] - node[1]).powi(2);
    let pe = if d2 < rho_star * rho_star {
        // Clamped so a coarse, strongly anisotropic mesh cannot push the
        // shifted point through the axis.
        [(p[0] - rho_star).max(0.5 * p[0]), p[1]]
    } else {
        p
    };
    greens_function(node[0], node[1], pe[0], pe[1]).unwrap_or(0.0) / node[0]
}

fn line_weight_row(mesh: &CutCellMesh, p: [f64; 2], row: &mut [f64]) {
    let scale = 1.0 + p[0].abs() + p[1].abs();
    let tiny = 1e-12 * scale;
    for (f, facet) in mesh.facets.iter().enumerate() {
        let mid = facet.midpoint;
        let len = facet.length;
        let d2 = (p[0] - mid[0]).powi(2) + (p[1] - mid[1]).powi(2);
        row[f] = if d2 > tiny * tiny && d2 < len * len {
            // Near but not on the segment: refine the rule locally.
            let sub = len / NEAR_SUBDIVISION as f64;
            let mut w = 0.0;
            for k in 0..NEAR_SUBDIVISION {
                let t = (k as f64 + 0.5) / NEAR_SUBDIVISION as f64;
                let node = [
                    facet.p0[0] + t * (facet.p1[0] - facet.p0[0]),
                    facet.p0[1] + t * (facet.p1[1] - facet.p0[1]),
                ];
                w += sub * kernel_at(node, p, sub);
            }
            w
        } else {
            // On the node (log-mean shift inside) or comfortably away.
            len * kernel_at(mid, p, len)
        };
    }
}

/// Wall flux via the line-integral formulation: `q` is dU/dn at the wall
/// facets, currents are read from the coil set.
pub fn hagenow_boundary(
    weights: &BoundaryWeights,
    coils: &CoilSet,
    q: &[f64],
) -> Result<Vec<f64>> {
    if q.len() != weights.n_facets || coils.len() != weights.n_coils {
        return Err(GsError::Config(format!(
            "weights built for {} facets / {} coils, got {} / {}",
            weights.n_facets,
            weights.n_coils,
            q.len(),
            coils.len()
        )));
    }
    let currents = coils.currents();
    let psi: Vec<f64> = (0..weights.n_eval())
        .into_par_iter()
        .map(|j| {
            let mut s = 0.0;
            for (w, qf) in weights.line_row(j).iter().zip(q) {
                s -= w * qf;
            }
            for (w, i) in weights.coil_row(j).iter().zip(&currents) {
                s += w * i;
            }
            s
        })
        .collect();
    Ok(psi)
}

/// Wall flux via the volume integral of the kernel against the toroidal
/// current. `s` is the full-length source field (the same vector handed
/// to the solver); mu0 R J = s, so the integrand reduces to G s / R.
pub fn volume_integral_boundary(
    mesh: &CutCellMesh,
    coils: &CoilSet,
    s: &[f64],
    eval_points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    coils.validate_outside(&mesh.polygon)?;
    let cell_area = mesh.grid.cell_area();
    let currents = coils.currents();
    let psi: Result<Vec<f64>> = eval_points
        .par_iter()
        .map(|&p| {
            let mut acc = 0.0;
            for &idx in &mesh.active {
                let c = mesh.centroid[idx];
                let w = mesh.lambda[idx] * cell_area / c[0];
                if s[idx] != 0.0 {
                    acc -= w * s[idx] * greens_function(c[0], c[1], p[0], p[1])?;
                }
            }
            for i in 0..coils.len() {
                acc += currents[i] * coils.flux_per_unit_current(i, p)?;
            }
            Ok(acc)
        })
        .collect();
    psi
}

/// Flux estimate at a point strictly inside the domain: the line-integral
/// expression plus the homogeneous solution interpolated at the point.
/// Used to seed the free-boundary iteration away from the wall.
pub fn interior_estimate(
    mesh: &CutCellMesh,
    coils: &CoilSet,
    q: &[f64],
    u: &[f64],
    p: [f64; 2],
) -> Result<f64> {
    if mesh.polygon.signed_distance(p) >= 0.0 {
        return Err(GsError::Geometry(format!(
            "interior estimate requested outside the domain at ({}, {})",
            p[0], p[1]
        )));
    }
    let mut row = vec![0.0; mesh.facets.len()];
    line_weight_row(mesh, p, &mut row);
    let mut psi = 0.0;
    for (w, qf) in row.iter().zip(q) {
        psi -= w * qf;
    }
    psi += coils.coil_flux(p)?;
    psi += interior_u(mesh, u, p)?;
    Ok(psi)
}

/// Bilinear interpolation of the grid field `u` at `p`, restricted to
/// active corners; falls back to the heaviest active corner when the
/// four-point patch is broken by the wall.
pub fn interior_u(mesh: &CutCellMesh, u: &[f64], p: [f64; 2]) -> Result<f64> {
    let grid = &mesh.grid;
    let (i, j, fr, fz) = grid
        .locate(p)
        .ok_or_else(|| GsError::Geometry("point outside the grid".into()))?;
    let corners = [
        (grid.idx(i, j), (1.0 - fr) * (1.0 - fz)),
        (grid.idx(i + 1, j), fr * (1.0 - fz)),
        (grid.idx(i, j + 1), (1.0 - fr) * fz),
        (grid.idx(i + 1, j + 1), fr * fz),
    ];
    if corners.iter().all(|&(idx, _)| mesh.is_active_idx(idx)) {
        return Ok(corners.iter().map(|&(idx, w)| w * u[idx]).sum());
    }
    corners
        .iter()
        .filter(|&&(idx, _)| mesh.is_active_idx(idx))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|&(idx, _)| u[idx])
        .ok_or_else(|| GsError::Geometry("no active grid point near the request".into()))
}

/// The line-integral flux estimate on every active grid point, as an
/// initial guess for the full field. Inside the wall the homogeneous
/// solution is added back; active points whose grid node falls outside
/// the wall (cut-cell corners) get the vacuum expression alone, which is
/// the correct continuation there.
pub fn initial_guess_field(
    mesh: &CutCellMesh,
    coils: &CoilSet,
    q: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    let grid = &mesh.grid;
    let currents = coils.currents();
    let mut psi = vec![0.0; grid.n_points()];
    let per_coil: Vec<Vec<(f64, f64, f64)>> = (0..coils.len()).map(|i| coils.subcoils(i)).collect();

    let rows: Result<Vec<(usize, f64)>> = mesh
        .active
        .par_iter()
        .map(|&idx| {
            let (i, j) = grid.ij(idx);
            let p = grid.point(i, j);
            let mut row = vec![0.0; mesh.facets.len()];
            line_weight_row(mesh, p, &mut row);
            let mut v = 0.0;
            for (w, qf) in row.iter().zip(q) {
                v -= w * qf;
            }
            for (loops, cur) in per_coil.iter().zip(&currents) {
                let mut g = 0.0;
                for &(r, z, t) in loops {
                    g += t * greens_function(r, z, p[0], p[1])?;
                }
                v -= MU0 * g * cur;
            }
            if mesh.polygon.signed_distance(p) < 0.0 {
                v += u[idx];
            }
            Ok((idx, v))
        })
        .collect();
    for (idx, v) in rows? {
        psi[idx] = v;
    }
    Ok(psi)
}
