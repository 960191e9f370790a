//! Conservative finite-volume discretization of the Grad-Shafranov
//! operator R d/dR (1/R dpsi/dR) + d2psi/dZ2 on the cut-cell mesh.
//!
//! Each active cell balances the metric fluxes (1/R) dpsi/dn over its
//! covered boundary: partial cell edges use aperture-weighted gradients
//! interpolated toward the covered part of the edge (Johansen & Colella),
//! and wall facets close the balance with a one-sided normal-derivative
//! stencil anchored at the facet midpoint, where the Dirichlet value
//! lives. Exterior grid points carry identity rows so the system stays
//! full-size and index-aligned with the grid.

use super::csr::{CsrBuilder, CsrMatrix};
use crate::error::{GsError, Result};
use crate::geometry::{CellClass, CutCellMesh};

/// Normal-derivative stencil of one wall facet:
/// q = bc_coef * psi_f + sum_k terms[k].1 * psi[terms[k].0],
/// where q approximates the *outward* normal derivative of psi at the
/// facet midpoint and psi_f is the Dirichlet value there.
#[derive(Debug, Clone)]
pub struct FacetStencil {
    pub terms: Vec<(usize, f64)>,
    pub bc_coef: f64,
    /// Distance from the facet midpoint to the first interpolation point.
    pub d1: f64,
}

/// The assembled operator. The matrix acts on the full grid vector; the
/// Dirichlet wall data enters through per-facet right-hand-side weights.
#[derive(Debug)]
pub struct Operator {
    pub matrix: CsrMatrix,
    /// Per facet, aligned with `mesh.facets`.
    pub facet_stencils: Vec<FacetStencil>,
    /// rhs[cell(k)] += facet_rhs_coef[k] * psi_f[k].
    pub facet_rhs_coef: Vec<f64>,
    facet_cell: Vec<usize>,
    /// 1/R at the source evaluation point (covered centroid); 0 outside.
    inv_r_eval: Vec<f64>,
    active_mask: Vec<bool>,
}

impl Operator {
    /// Right-hand side for source values `s` (evaluated at each cell's
    /// covered centroid), facet Dirichlet values, and optional values to
    /// pin at exterior points (defaults to zero).
    pub fn rhs(&self, s: &[f64], facet_psi: &[f64], exterior: Option<&[f64]>) -> Vec<f64> {
        let n = self.matrix.n;
        debug_assert_eq!(s.len(), n);
        debug_assert_eq!(facet_psi.len(), self.facet_rhs_coef.len());
        let mut b = vec![0.0; n];
        for idx in 0..n {
            b[idx] = if self.active_mask[idx] {
                s[idx] * self.inv_r_eval[idx]
            } else {
                exterior.map_or(0.0, |e| e[idx])
            };
        }
        for k in 0..self.facet_rhs_coef.len() {
            b[self.facet_cell[k]] += self.facet_rhs_coef[k] * facet_psi[k];
        }
        b
    }

    /// Outward normal derivative of a discrete field at facet `k`, given
    /// the field's Dirichlet value at the facet midpoint.
    pub fn facet_normal_gradient(&self, k: usize, psi: &[f64], psi_f: f64) -> f64 {
        let st = &self.facet_stencils[k];
        let mut q = st.bc_coef * psi_f;
        for &(c, w) in &st.terms {
            q += w * psi[c];
        }
        q
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.active_mask[idx]
    }
}

/// Quadratic (or linear, near gaps) Lagrange interpolation weights along
/// one grid line. `along_z`: interpolate in Z at fixed column `line`;
/// otherwise in R at fixed row. Only all-active windows are used.
fn lagrange_on_line(
    mesh: &CutCellMesh,
    along_z: bool,
    line: usize,
    t: f64,
) -> Option<Vec<(usize, f64)>> {
    let grid = &mesh.grid;
    let (n_axis, t0, h) =
        if along_z { (grid.nz, grid.z0, grid.dz) } else { (grid.nr, grid.r0, grid.dr) };
    let coord = |k: usize| t0 + h * k as f64;
    let idx_of = |k: usize| if along_z { grid.idx(line, k) } else { grid.idx(k, line) };
    let frac = (t - t0) / h;
    let near = frac.round().max(0.0).min((n_axis - 1) as f64) as isize;

    // Three-point windows, centered first, then shifted one step toward
    // the target side; wider shifts would extrapolate.
    let starts = if frac < near as f64 {
        [near - 1, near - 2, near]
    } else {
        [near - 1, near, near - 2]
    };
    for s in starts {
        if s < 0 || s + 2 >= n_axis as isize {
            continue;
        }
        let s = s as usize;
        if (s..=s + 2).all(|k| mesh.is_active_idx(idx_of(k))) {
            let x: Vec<f64> = (s..=s + 2).map(coord).collect();
            let mut out = Vec::with_capacity(3);
            for m in 0..3 {
                let mut w = 1.0;
                for l in 0..3 {
                    if l != m {
                        w *= (t - x[l]) / (x[m] - x[l]);
                    }
                }
                out.push((idx_of(s + m), w));
            }
            return Some(out);
        }
    }
    // Two-point fallback on the bracketing pair.
    let lo = frac.floor().max(0.0).min((n_axis - 2) as f64) as usize;
    if mesh.is_active_idx(idx_of(lo)) && mesh.is_active_idx(idx_of(lo + 1)) {
        let w1 = (t - coord(lo)) / h;
        return Some(vec![(idx_of(lo), 1.0 - w1), (idx_of(lo + 1), w1)]);
    }
    None
}

/// Build the outward-normal-derivative stencil for one facet: cast a ray
/// from the midpoint along the inward normal, interpolate the field where
/// it crosses the first two grid lines beyond the facet's own cell, and
/// differentiate the quadratic through (0, psi_f), (d1, psi1), (d2, psi2).
fn facet_stencil(mesh: &CutCellMesh, fk: usize) -> Result<FacetStencil> {
    let f = &mesh.facets[fk];
    let grid = &mesh.grid;
    let (ci, cj) = grid.ij(f.cell);
    let n = f.normal_in;
    let march_r = n[0].abs() >= n[1].abs();
    let step: isize = if march_r { n[0].signum() as isize } else { n[1].signum() as isize };

    let n_lines = (if march_r { grid.nr } else { grid.nz }) as isize;
    let mut probes: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(2);
    for k in 1..=2isize {
        let line = if march_r { ci as isize + k * step } else { cj as isize + k * step };
        if line < 0 || line >= n_lines {
            break;
        }
        let (s, along_z, t) = if march_r {
            let s = (grid.r(line as usize) - f.midpoint[0]) / n[0];
            (s, true, f.midpoint[1] + s * n[1])
        } else {
            let s = (grid.z(line as usize) - f.midpoint[1]) / n[1];
            (s, false, f.midpoint[0] + s * n[0])
        };
        match lagrange_on_line(mesh, along_z, line as usize, t) {
            Some(w) => probes.push((s, w)),
            None => break,
        }
    }

    match probes.len() {
        0 => Err(GsError::Geometry(format!(
            "cannot build a wall-gradient stencil for the facet of cell ({ci}, {cj}): \
             no active interior points along its normal"
        ))),
        1 => {
            let (d1, w1) = &probes[0];
            let terms = w1.iter().map(|&(c, w)| (c, -w / d1)).collect();
            Ok(FacetStencil { terms, bc_coef: 1.0 / d1, d1: *d1 })
        }
        _ => {
            let (d1, w1) = &probes[0];
            let (d2, w2) = &probes[1];
            let a1 = (d2 / d1) / (d2 - d1);
            let a2 = (d1 / d2) / (d2 - d1);
            let mut terms: Vec<(usize, f64)> =
                w1.iter().map(|&(c, w)| (c, -a1 * w)).collect();
            terms.extend(w2.iter().map(|&(c, w)| (c, a2 * w)));
            Ok(FacetStencil { terms, bc_coef: a1 - a2, d1: *d1 })
        }
    }
}

/// Assemble the operator matrix and facet stencils for a mesh.
pub fn assemble(mesh: &CutCellMesh) -> Result<Operator> {
    let grid = &mesh.grid;
    let n = grid.n_points();
    let cell_area = grid.cell_area();

    // Facet stencils first (they feed matrix rows).
    let mut facet_stencils = Vec::with_capacity(mesh.facets.len());
    for k in 0..mesh.facets.len() {
        facet_stencils.push(facet_stencil(mesh, k)?);
    }

    let mut builder = CsrBuilder::new(n);
    let mut facet_rhs_coef = vec![0.0; mesh.facets.len()];
    let mut facet_cell = vec![0usize; mesh.facets.len()];
    let mut inv_r_eval = vec![0.0; n];
    let mut active_mask = vec![false; n];
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(16);

    // One edge's contribution to the row of `own`, toward neighbor `nb`:
    //   C * [w_own (psi_nb - psi_own) + w_side (psi_nb_s - psi_own_s)].
    // All shared quantities are derived from the edge itself so the two
    // adjacent rows see bitwise-identical fluxes (exact telescoping).
    struct EdgeTerm {
        coef: f64,
        nb: usize,
        side: Option<(usize, usize)>, // (own_side, nb_side)
        w_own: f64,
        w_side: f64,
    }

    let edge_term = |i: usize, j: usize, dir: usize| -> Option<EdgeTerm> {
        // dir: 0 = W, 1 = E, 2 = S, 3 = N.
        let vertical = dir < 2;
        let a = if vertical {
            mesh.ap_vertical(if dir == 1 { i + 1 } else { i }, j)
        } else {
            mesh.ap_horizontal(i, if dir == 3 { j + 1 } else { j })
        };
        if a == 0.0 {
            return None;
        }
        let (nb_i, nb_j) = match dir {
            0 => (i - 1, j),
            1 => (i + 1, j),
            2 => (i, j - 1),
            _ => (i, j + 1),
        };
        let nb = grid.idx(nb_i, nb_j);
        debug_assert!(mesh.is_active_idx(nb), "live edge into exterior cell");

        // Face metric: length / (R h_perp).
        let (coef_geo, side_pair) = if vertical {
            let ie = if dir == 1 { i + 1 } else { i };
            let r_face = grid.corner(ie, 0)[0];
            // Covered side of a partial edge: toward the corner inside.
            let side_j = if a < 1.0 {
                if mesh.phi_corner(ie, j) <= 0.0 {
                    j.checked_sub(1)
                } else {
                    Some(j + 1)
                }
            } else {
                None
            };
            (
                grid.dz / (r_face * grid.dr),
                side_j.map(|js| (grid.idx(i, js), grid.idx(nb_i, js))),
            )
        } else {
            let je = if dir == 3 { j + 1 } else { j };
            // Metric radius at the covered segment's midpoint.
            let r_left = grid.corner(i, 0)[0];
            let r_right = grid.corner(i + 1, 0)[0];
            let (r_m, side_i) = if a >= 1.0 {
                (grid.r(i), None)
            } else if mesh.phi_corner(i, je) <= 0.0 {
                (r_left + 0.5 * a * grid.dr, i.checked_sub(1))
            } else {
                (r_right - 0.5 * a * grid.dr, Some(i + 1))
            };
            (
                grid.dr / (r_m * grid.dz),
                side_i.map(|is| (grid.idx(is, j), grid.idx(is, nb_j))),
            )
        };

        // Side-row interpolation only when both side cells exist and are
        // active; otherwise fall back to the face-centered gradient.
        let side = side_pair.filter(|&(a_s, b_s)| {
            mesh.is_active_idx(a_s) && mesh.is_active_idx(b_s)
        });
        let (w_own, w_side) = if side.is_some() {
            (0.5 * (1.0 + a), 0.5 * (1.0 - a))
        } else {
            (1.0, 0.0)
        };
        Some(EdgeTerm { coef: a * coef_geo, nb, side, w_own, w_side })
    };

    let mut fk = 0usize;
    for idx in 0..n {
        let (i, j) = grid.ij(idx);
        if mesh.class[idx] == CellClass::Exterior {
            row.push((idx, 1.0));
            builder.push_row(&mut row)?;
            continue;
        }
        active_mask[idx] = true;
        inv_r_eval[idx] = 1.0 / mesh.centroid[idx][0];
        let row_scale = 1.0 / (mesh.lambda[idx] * cell_area);

        for dir in 0..4 {
            if let Some(e) = edge_term(i, j, dir) {
                let c = row_scale * e.coef;
                row.push((e.nb, c * e.w_own));
                row.push((idx, -c * e.w_own));
                if let Some((own_s, nb_s)) = e.side {
                    row.push((nb_s, c * e.w_side));
                    row.push((own_s, -c * e.w_side));
                }
            }
        }

        for f in mesh.facets_of(idx) {
            let st = &facet_stencils[fk];
            let w = row_scale * f.length / f.midpoint[0];
            for &(col, v) in &st.terms {
                row.push((col, w * v));
            }
            facet_rhs_coef[fk] = -w * st.bc_coef;
            facet_cell[fk] = idx;
            fk += 1;
        }
        builder.push_row(&mut row)?;
    }
    debug_assert_eq!(fk, mesh.facets.len());

    Ok(Operator {
        matrix: builder.finish()?,
        facet_stencils,
        facet_rhs_coef,
        facet_cell,
        inv_r_eval,
        active_mask,
    })
}
