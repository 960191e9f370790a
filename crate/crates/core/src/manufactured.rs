//! Verification problems with closed-form solutions.
//!
//! Two fixed-boundary cases drive the convergence studies: a Soloviev
//! equilibrium whose flux function is an explicit quartic (linear source),
//! and a trigonometric field manufactured for the nonlinear solver path.
//! Both are posed inside the same D-shaped cross section. Boundary data
//! lives on the true wall: the scheme carries it at the reconstructed wall
//! facets, so the measured error includes the geometric boundary treatment
//! exactly as a production solve would.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::elliptic::{assemble, solve, Operator, SolveOptions};
use crate::error::{GsError, Result};
use crate::geometry::{build_cut_cell_mesh, BoundaryPolygon, CutCellMesh};
use crate::grid::CartesianGrid;
use crate::relax::{Aitken, AitkenOptions};

/// Soloviev equilibrium: ψ = R⁴/8 + D₁ + D₂R² + D₃(R⁴ − 4R²Z²), an exact
/// solution of Δ*ψ = R².
#[derive(Debug, Clone, Copy)]
pub struct Soloviev {
    pub eps: f64,
    pub kappa: f64,
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Soloviev {
    /// Fit the free coefficients so that ψ vanishes at the outer and inner
    /// equatorial points (1 ± ε, 0) and at the high point (1 − δε, κε),
    /// which pins an aspect ratio, elongation and triangularity.
    pub fn new(eps: f64, kappa: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(GsError::Config(format!(
                "inverse aspect ratio must lie in (0, 1), got {eps}"
            )));
        }
        let a = 1.0 + eps;
        let b = 1.0 - eps;
        let c = 1.0 - delta * eps;
        let zt = kappa * eps;
        #[rustfmt::skip]
        let m = Matrix3::new(
            1.0, a * a, a.powi(4),
            1.0, b * b, b.powi(4),
            1.0, c * c, c.powi(4) - 4.0 * c * c * zt * zt,
        );
        let rhs = Vector3::new(-a.powi(4), -b.powi(4), -c.powi(4)) / 8.0;
        let d = m.lu().solve(&rhs).ok_or_else(|| {
            GsError::Config(format!(
                "degenerate cross-section parameters (eps={eps}, kappa={kappa}, delta={delta})"
            ))
        })?;
        Ok(Self {
            eps,
            kappa,
            delta,
            d1: d[0],
            d2: d[1],
            d3: d[2],
        })
    }

    /// The reactor-like cross section (ε = 0.32, κ = 1.7, δ = 0.33) used
    /// throughout the verification suite.
    pub fn iter_like() -> Self {
        Self::new(0.32, 1.7, 0.33).expect("reference parameters are valid")
    }

    pub fn psi(&self, r: f64, z: f64) -> f64 {
        let r2 = r * r;
        r2 * r2 / 8.0 + self.d1 + self.d2 * r2 + self.d3 * (r2 * r2 - 4.0 * r2 * z * z)
    }

    /// (∂ψ/∂R, ∂ψ/∂Z).
    pub fn psi_grad(&self, r: f64, z: f64) -> (f64, f64) {
        let r2 = r * r;
        let dr = 0.5 * r2 * r
            + 2.0 * self.d2 * r
            + self.d3 * (4.0 * r2 * r - 8.0 * r * z * z);
        let dz = -8.0 * self.d3 * r2 * z;
        (dr, dz)
    }

    /// Right-hand side S of Δ*ψ = S satisfied by this field.
    pub fn source(&self, r: f64, _z: f64) -> f64 {
        r * r
    }

    /// Location and flux value of the magnetic axis. The field is up-down
    /// symmetric, so the axis sits on the midplane where ∂ψ/∂R vanishes.
    pub fn magnetic_axis(&self) -> (f64, f64, f64) {
        let r2 = -2.0 * self.d2 / (0.5 + 4.0 * self.d3);
        let r = r2.sqrt();
        (r, 0.0, self.psi(r, 0.0))
    }

    /// Polygonal wall tracing the ψ = 0 contour.
    ///
    /// R stations are Chebyshev points on [1−ε, 1+ε], clustered at the
    /// equatorial ends where the contour turns vertical; the matching Z ≥ 0
    /// ordinate is found by bisection and mirrored across the midplane.
    /// `n_half` counts the stations along one branch.
    pub fn boundary(&self, n_half: usize) -> Result<BoundaryPolygon> {
        if n_half < 16 {
            return Err(GsError::Config(format!(
                "wall resolution too coarse: {n_half} stations (need at least 16)"
            )));
        }
        let n = n_half;
        let mut upper = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let r = 1.0 - self.eps * (PI * k as f64 / n as f64).cos();
            let z = if k == 0 || k == n { 0.0 } else { self.upper_z(r)? };
            upper.push([r, z]);
        }
        // counter-clockwise: from the outer equator up and over the top,
        // back along the mirrored lower branch
        let mut verts = Vec::with_capacity(2 * n);
        for v in upper.iter().skip(1).rev() {
            verts.push(*v);
        }
        verts.push(upper[0]);
        for v in upper.iter().take(n).skip(1) {
            verts.push([v[0], -v[1]]);
        }
        BoundaryPolygon::new(verts)
    }

    /// Z > 0 root of ψ(r, ·) = 0. ψ is even in Z and grows away from the
    /// midplane (D₃ < 0 for conventional shapes), so the first sign change
    /// above a midplane point inside the section brackets the contour.
    fn upper_z(&self, r: f64) -> Result<f64> {
        if self.psi(r, 0.0) >= 0.0 {
            return Err(GsError::Config(format!(
                "midplane point R = {r} lies outside the cross section"
            )));
        }
        let mut lo = 0.0f64;
        let mut hi = 1.2 * self.kappa * self.eps;
        let mut tries = 0;
        while self.psi(r, hi) <= 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 8 {
                return Err(GsError::Config(format!(
                    "no zero crossing of psi above the midplane at R = {r}"
                )));
            }
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.psi(r, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Manufactured nonlinear problem: Δ*ψ = −F(R, Z, ψ) with the exact
/// solution ψ*(R, Z) = sin(K_R(R + R₀))·cos(K_Z Z).
///
/// The bracketed part of F vanishes identically at ψ = ψ*, so the exact
/// field satisfies the equation while any other iterate feels a genuinely
/// nonlinear (quadratic and exponential) source.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearCase {
    pub k_r: f64,
    pub k_z: f64,
    pub r_shift: f64,
}

impl Default for NonlinearCase {
    fn default() -> Self {
        Self {
            k_r: 1.15 * PI,
            k_z: 1.15,
            r_shift: -0.5,
        }
    }
}

impl NonlinearCase {
    pub fn exact(&self, r: f64, z: f64) -> f64 {
        (self.k_r * (r + self.r_shift)).sin() * (self.k_z * z).cos()
    }

    /// F(R, Z, ψ); the equation is posed as Δ*ψ = −F.
    pub fn f(&self, r: f64, z: f64, psi: f64) -> f64 {
        let star = self.exact(r, z);
        let cc = (self.k_r * (r + self.r_shift)).cos() * (self.k_z * z).cos();
        (self.k_r * self.k_r + self.k_z * self.k_z) * psi
            + self.k_r / r * cc
            + r * (star * star - psi * psi + (-star).exp() - (-psi).exp())
    }
}

/// Evaluate a source S(R, Z) at every active cell's covered centroid,
/// matching the quadrature the discrete operator uses for its right-hand
/// side. Inactive entries are zero.
pub fn source_field(mesh: &CutCellMesh, s: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = mesh.grid.n_points();
    let mut out = vec![0.0; n];
    for (idx, v) in out.iter_mut().enumerate() {
        if mesh.is_active_idx(idx) {
            let c = mesh.centroid[idx];
            *v = s(c[0], c[1]);
        }
    }
    out
}

/// Evaluate a boundary field at every wall facet midpoint, in facet order.
pub fn dirichlet_field(mesh: &CutCellMesh, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    mesh.facets
        .iter()
        .map(|f| g(f.midpoint[0], f.midpoint[1]))
        .collect()
}

/// Evaluate a field at the grid points of active cells (zero elsewhere).
pub fn grid_field(mesh: &CutCellMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let g = &mesh.grid;
    let mut out = vec![0.0; g.n_points()];
    for (idx, v) in out.iter_mut().enumerate() {
        if mesh.is_active_idx(idx) {
            let (i, j) = g.ij(idx);
            *v = f(g.r(i), g.z(j));
        }
    }
    out
}

/// Volume-weighted error norms over the active points: L1 and L2 carry a
/// Λ·ΔR·ΔZ weight per cell, L∞ is the plain maximum.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn error_norms(
    mesh: &CutCellMesh,
    psi: &[f64],
    exact: impl Fn(f64, f64) -> f64,
) -> ErrorNorms {
    let w0 = mesh.grid.cell_area();
    let (mut l1, mut l2, mut linf) = (0.0f64, 0.0f64, 0.0f64);
    for idx in 0..mesh.grid.n_points() {
        if !mesh.is_active_idx(idx) {
            continue;
        }
        let (i, j) = mesh.grid.ij(idx);
        let e = (psi[idx] - exact(mesh.grid.r(i), mesh.grid.z(j))).abs();
        let w = mesh.lambda[idx] * w0;
        l1 += w * e;
        l2 += w * e * e;
        linf = linf.max(e);
    }
    ErrorNorms {
        l1,
        l2: l2.sqrt(),
        linf,
    }
}

/// Picard iteration for a fixed-boundary problem with a ψ-dependent source
/// S(R, Z, ψ), under-relaxed with [`Aitken`]. Returns the converged field
/// and the number of sweeps. `psi0` seeds both the source evaluation and
/// the linear-solver warm start; convergence is declared when the relaxed
/// update falls below `tol` in the max norm over active points.
#[allow(clippy::too_many_arguments)]
pub fn picard_fixed(
    mesh: &CutCellMesh,
    op: &Operator,
    facet_psi: &[f64],
    source: impl Fn(f64, f64, f64) -> f64,
    psi0: &[f64],
    tol: f64,
    max_iter: usize,
    relax: AitkenOptions,
    solve_opts: &SolveOptions,
) -> Result<(Vec<f64>, usize)> {
    let n = mesh.grid.n_points();
    let mut psi = psi0.to_vec();
    // pin inactive points to the identity-row value so increments vanish there
    for (idx, v) in psi.iter_mut().enumerate() {
        if !mesh.is_active_idx(idx) {
            *v = 0.0;
        }
    }
    let mut aitken = Aitken::new(relax);
    let mut s = vec![0.0; n];
    for it in 1..=max_iter {
        for (idx, sv) in s.iter_mut().enumerate() {
            if mesh.is_active_idx(idx) {
                let c = mesh.centroid[idx];
                *sv = source(c[0], c[1], psi[idx]);
            }
        }
        let b = op.rhs(&s, facet_psi, None);
        let (tilde, _) = solve(&op.matrix, &b, Some(&psi), solve_opts)?;
        let mut d = vec![0.0; n];
        for idx in 0..n {
            if mesh.is_active_idx(idx) {
                d[idx] = psi[idx] - tilde[idx];
            }
        }
        let alpha = aitken.step(&d);
        let mut step_inf = 0.0f64;
        for (p, di) in psi.iter_mut().zip(&d) {
            let upd = alpha * di;
            *p -= upd;
            step_inf = step_inf.max(upd.abs());
        }
        log::debug!("picard sweep {it}: step {step_inf:.3e}, alpha {alpha:.3}");
        if step_inf < tol {
            return Ok((psi, it));
        }
    }
    Err(GsError::NonConvergence(format!(
        "picard iteration still above tolerance {tol:.1e} after {max_iter} sweeps"
    )))
}

/// Which verification problem a convergence study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerificationCase {
    SolovievLinear,
    NonlinearManufactured,
}

/// One mesh level of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct LadderRow {
    pub nr: usize,
    pub nz: usize,
    pub n_active: usize,
    pub norms: ErrorNorms,
    /// log₂ error ratios against the previous level: [L1, L2, L∞].
    pub orders: Option<[f64; 3]>,
}

/// Frame around the D-shaped verification wall, wide enough that the wall
/// never reaches the outermost cell ring on any ladder mesh.
pub const LADDER_EXTENTS: (f64, f64, f64, f64) = (0.60, 1.40, -0.63, 0.63);

/// Grid sizes of the verification ladder (total points, active plus
/// inactive); every level halves the spacing of the one before.
pub const LADDER: [(usize, usize); 5] =
    [(31, 41), (61, 81), (121, 161), (241, 321), (481, 641)];

/// Solve `case` on each ladder mesh and report error norms and observed
/// orders. `wall_stations` controls the polygon resolution of the shared
/// wall (the domain is the polygon itself, so this does not need to scale
/// with the mesh).
pub fn convergence_study(
    case: VerificationCase,
    ladder: &[(usize, usize)],
    wall_stations: usize,
    opts: &SolveOptions,
) -> Result<Vec<LadderRow>> {
    if ladder.len() < 2 {
        return Err(GsError::Config(
            "a convergence study needs at least two meshes".into(),
        ));
    }
    for w in ladder.windows(2) {
        if w[1].0 != 2 * w[0].0 - 1 || w[1].1 != 2 * w[0].1 - 1 {
            return Err(GsError::Config(format!(
                "mesh {}x{} does not halve the spacing of {}x{}",
                w[1].0, w[1].1, w[0].0, w[0].1
            )));
        }
    }
    let sol = Soloviev::iter_like();
    let wall = sol.boundary(wall_stations)?;
    let mms = NonlinearCase::default();
    let (r0, r1, z0, z1) = LADDER_EXTENTS;

    let mut rows: Vec<LadderRow> = Vec::with_capacity(ladder.len());
    for &(nr, nz) in ladder {
        let grid = CartesianGrid::from_extents(r0, r1, z0, z1, nr, nz)?;
        let mesh = build_cut_cell_mesh(&grid, &wall)?;
        let op = assemble(&mesh)?;
        let psi = match case {
            VerificationCase::SolovievLinear => {
                // the fixed-boundary problem poses psi = 0 on the wall
                let s = source_field(&mesh, |r, z| sol.source(r, z));
                let bc = vec![0.0; mesh.facets.len()];
                let b = op.rhs(&s, &bc, None);
                solve(&op.matrix, &b, None, opts)?.0
            }
            VerificationCase::NonlinearManufactured => {
                // Dirichlet data is a wall field: evaluate it at the true
                // wall point nearest each reconstructed facet midpoint
                let bc: Vec<f64> = mesh
                    .facets
                    .iter()
                    .map(|f| {
                        let q = wall.closest_point(f.midpoint);
                        mms.exact(q[0], q[1])
                    })
                    .collect();
                let zero = vec![0.0; grid.n_points()];
                picard_fixed(
                    &mesh,
                    &op,
                    &bc,
                    |r, z, p| -mms.f(r, z, p),
                    &zero,
                    1e-10,
                    80,
                    AitkenOptions::default(),
                    opts,
                )?
                .0
            }
        };
        let norms = match case {
            VerificationCase::SolovievLinear => error_norms(&mesh, &psi, |r, z| sol.psi(r, z)),
            VerificationCase::NonlinearManufactured => {
                error_norms(&mesh, &psi, |r, z| mms.exact(r, z))
            }
        };
        let orders = rows.last().map(|prev| {
            [
                (prev.norms.l1 / norms.l1).log2(),
                (prev.norms.l2 / norms.l2).log2(),
                (prev.norms.linf / norms.linf).log2(),
            ]
        });
        log::info!(
            "{case:?} {nr}x{nz}: L1 {:.3e}  L2 {:.3e}  Linf {:.3e}  orders {:?}",
            norms.l1,
            norms.l2,
            norms.linf,
            orders
        );
        rows.push(LadderRow {
            nr,
            nz,
            n_active: mesh.n_active(),
            norms,
            orders,
        });
    }
    Ok(rows)
}
