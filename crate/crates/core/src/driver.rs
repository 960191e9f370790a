//! Coupled solve loops.
//!
//! The inner loop is a relaxed Picard iteration for the flux on a fixed
//! wall-data vector; the outer loop closes the free-boundary problem by
//! refitting coil currents to the shape target and regenerating the wall
//! data from the boundary integral. Both loops share the same relaxation
//! engine and write rows into one iteration log, so a run can be audited
//! (or plotted) from the log alone.

use log::warn;

use crate::boundary::{
    facet_normal_derivatives, hagenow_boundary, initial_guess_field, solve_homogeneous_u,
    BoundaryWeights,
};
use crate::coils::CoilSet;
use crate::critical::{find_critical_points, select_normalization, Normalization};
use crate::elliptic::{assemble, solve, Operator, SolveOptions};
use crate::error::{GsError, Result};
use crate::geometry::{BoundaryPolygon, CutCellMesh};
use crate::optimizer::{
    build_constraint_rows, solve_currents, CoilSolveConfig, ShapeTarget, DEFAULT_CONTROL_POINTS,
};
use crate::profiles::{source_term, ProfileTable};
use crate::relax::{Aitken, AitkenOptions};

/// Knobs shared by the fixed- and free-boundary drivers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Inner stop: the sweep loop ends once ‖α·Δψ‖∞ falls below this.
    pub eps_inner: f64,
    /// Outer stop: the run ends once ‖α·Δψ_b‖∞ on the wall data falls
    /// below this.
    pub eps_outer: f64,
    /// Sweep cap for one inner loop; reaching it is logged, not fatal,
    /// since the next outer cycle moves the wall data anyway.
    pub n_max: usize,
    /// Outer cycle cap; reaching it is a hard failure.
    pub m_max: usize,
    /// Relaxation clamps, shared by both loops. Pinning
    /// `lambda_min == lambda_max` freezes α for baseline comparisons.
    pub relax: AitkenOptions,
    /// Settings for every linear solve.
    pub linear: SolveOptions,
    /// Ridge weight for the coil current fit.
    pub gamma: f64,
    /// Keep the currents from cycle zero as the ridge reference for the
    /// whole run instead of re-normalizing against the latest fit.
    pub freeze_reference: bool,
    /// Number of control points sampled along the target outline.
    pub n_control: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_inner: 4.0e-3,
            eps_outer: 2.0e-2,
            n_max: 50,
            m_max: 50,
            relax: AitkenOptions::default(),
            // Tight: the wall rows scale like 1/(λh²), so a loose relative
            // residual leaves visible absolute error in the field.
            linear: SolveOptions::tight(),
            gamma: 1.0e-15,
            freeze_reference: false,
            n_control: DEFAULT_CONTROL_POINTS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inner > 0.0 && self.eps_inner.is_finite()) {
            return Err(GsError::Config(format!(
                "inner tolerance must be positive and finite, got {}",
                self.eps_inner
            )));
        }
        if !(self.eps_outer > 0.0 && self.eps_outer.is_finite()) {
            return Err(GsError::Config(format!(
                "outer tolerance must be positive and finite, got {}",
                self.eps_outer
            )));
        }
        if self.n_max == 0 || self.m_max == 0 {
            return Err(GsError::Config(
                "iteration caps must be at least 1".into(),
            ));
        }
        let r = &self.relax;
        if !(r.lambda_min >= 0.0 && r.lambda_min <= r.lambda_max && r.lambda_max < 1.0) {
            return Err(GsError::Config(format!(
                "relaxation clamps need 0 <= min <= max < 1, got [{}, {}]",
                r.lambda_min, r.lambda_max
            )));
        }
        if !r.lambda_init.is_finite() {
            return Err(GsError::Config("initial relaxation parameter must be finite".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(GsError::Config(format!(
                "ridge weight must be non-negative and finite, got {}",
                self.gamma
            )));
        }
        if self.n_control == 0 {
            return Err(GsError::Config("need at least one control point".into()));
        }
        Ok(())
    }
}

/// Which loop an iteration-log row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopLevel {
    Inner,
    Outer,
}

/// One row of the iteration log.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub level: LoopLevel,
    /// Outer cycle the row belongs to; 0 for a standalone inner run.
    pub outer: usize,
    /// 1-based position within the row's own loop.
    pub index: usize,
    /// ‖α·Δ‖∞ of the update that was actually applied.
    pub residual: f64,
    /// Relaxation factor used for that update.
    pub alpha: f64,
    pub psi_axis: f64,
    pub psi_x: f64,
    /// Coil currents in force when the row was written; empty for
    /// fixed-boundary runs.
    pub currents: Vec<f64>,
}

impl IterationRecord {
    pub fn csv_header(n_coils: usize) -> String {
        let mut line = String::from("level,outer,index,residual,alpha,psi_axis,psi_x");
        for i in 0..n_coils {
            line.push_str(&format!(",current_{i}"));
        }
        line
    }

    pub fn csv_row(&self) -> String {
        let level = match self.level {
            LoopLevel::Inner => "inner",
            LoopLevel::Outer => "outer",
        };
        let mut line = format!(
            "{level},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.outer, self.index, self.residual, self.alpha, self.psi_axis, self.psi_x
        );
        for c in &self.currents {
            line.push_str(&format!(",{c:.17e}"));
        }
        line
    }
}

/// Outcome of one inner loop.
#[derive(Debug)]
pub struct InnerResult {
    pub psi: Vec<f64>,
    /// Normalization of the field as it entered the final sweep.
    pub normalization: Normalization,
    pub iterations: usize,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
}

/// Relaxed Picard iteration for the flux under fixed wall data.
///
/// Every sweep re-derives the normalization (axis and separatrix move as
/// the field converges), rebuilds the source, solves, and applies the
/// relaxed update ψ ← ψ − α(ψ − ψ̃). Hitting the sweep cap only logs a
/// warning; a degenerate normalization aborts with `InvalidSolution`.
pub fn inner_loop(
    mesh: &CutCellMesh,
    op: &Operator,
    facet_psi: &[f64],
    profiles: &ProfileTable,
    psi_init: &[f64],
    config: &SolverConfig,
) -> Result<InnerResult> {
    config.validate()?;
    let n = mesh.grid.n_points();
    if psi_init.len() != n {
        return Err(GsError::Config(format!(
            "initial field has {} entries for a {} x {} grid",
            psi_init.len(),
            mesh.grid.nr,
            mesh.grid.nz
        )));
    }
    if facet_psi.len() != mesh.facets.len() {
        return Err(GsError::Config(format!(
            "{} wall values for {} facets",
            facet_psi.len(),
            mesh.facets.len()
        )));
    }

    let mut psi = psi_init.to_vec();
    for (idx, v) in psi.iter_mut().enumerate() {
        if !mesh.is_active_idx(idx) {
            *v = 0.0;
        }
    }

    let mut aitken = Aitken::new(config.relax);
    let mut records = Vec::new();
    let mut last_norm: Option<Normalization> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut d = vec![0.0; n];

    for sweep in 1..=config.n_max {
        iterations = sweep;
        let points = find_critical_points(mesh, &psi)?;
        let norm = select_normalization(&points, mesh, facet_psi)?;
        let s = source_term(mesh, &psi, &norm, profiles)?;
        let b = op.rhs(&s, facet_psi, None);
        let (tilde, _) = solve(&op.matrix, &b, Some(&psi), &config.linear)?;

        let mut d_inf = 0.0_f64;
        for i in 0..n {
            d[i] = psi[i] - tilde[i];
            d_inf = d_inf.max(d[i].abs());
        }
        let alpha = aitken.step(&d);
        for i in 0..n {
            psi[i] -= alpha * d[i];
        }
        let residual = alpha * d_inf;

        records.push(IterationRecord {
            level: LoopLevel::Inner,
            outer: 0,
            index: sweep,
            residual,
            alpha,
            psi_axis: norm.psi_axis,
            psi_x: norm.psi_x,
            currents: Vec::new(),
        });
        last_norm = Some(norm);

        if residual < config.eps_inner {
            converged = true;
            break;
        }
    }

    if !converged {
        let last = records.last().map_or(f64::NAN, |r| r.residual);
        warn!(
            "inner loop stopped at the sweep cap ({}) with residual {last:.3e}",
            config.n_max
        );
    }

    Ok(InnerResult {
        psi,
        normalization: last_norm.expect("at least one sweep ran"),
        iterations,
        converged,
        records,
    })
}

/// Source specification for a fixed-boundary solve.
#[derive(Debug, Clone, Copy)]
pub enum FixedSource<'a> {
    /// Known source values per grid point (evaluated at the covered
    /// centroids): a single linear solve.
    Field(&'a [f64]),
    /// Profile tables driving the nonlinear iteration; the normalization
    /// is rebuilt from scratch, so no initial field is needed.
    Profiles(&'a ProfileTable),
}

/// A fixed-boundary solution.
#[derive(Debug)]
pub struct FixedBoundarySolution {
    pub psi: Vec<f64>,
    /// Flux normalization of the final field. `None` on the linear `Field`
    /// path, which never derives one.
    pub normalization: Option<Normalization>,
    /// Per-sweep iteration log; empty on the `Field` path.
    pub records: Vec<IterationRecord>,
}

/// Solve the fixed-boundary problem for given wall data.
pub fn solve_fixed_boundary(
    mesh: &CutCellMesh,
    facet_psi: &[f64],
    source: FixedSource,
    config: &SolverConfig,
) -> Result<FixedBoundarySolution> {
    config.validate()?;
    if facet_psi.len() != mesh.facets.len() {
        return Err(GsError::Config(format!(
            "{} wall values for {} facets",
            facet_psi.len(),
            mesh.facets.len()
        )));
    }
    let op = assemble(mesh)?;
    match source {
        FixedSource::Field(s) => {
            if s.len() != mesh.grid.n_points() {
                return Err(GsError::Config(format!(
                    "source field has {} entries for a {} x {} grid",
                    s.len(),
                    mesh.grid.nr,
                    mesh.grid.nz
                )));
            }
            let b = op.rhs(s, facet_psi, None);
            let (psi, _) = solve(&op.matrix, &b, None, &config.linear)?;
            Ok(FixedBoundarySolution { psi, normalization: None, records: Vec::new() })
        }
        FixedSource::Profiles(table) => {
            // Seed with a unit-source solve: any smooth dome with a single
            // extremum lets the first normalization land, after which the
            // profiles set the real scale.
            let ones = vec![1.0; mesh.grid.n_points()];
            let b = op.rhs(&ones, facet_psi, None);
            let (seed, _) = solve(&op.matrix, &b, None, &config.linear)?;
            let inner = inner_loop(mesh, &op, facet_psi, table, &seed, config)?;
            if !inner.converged {
                let last = inner.records.last().map_or(f64::NAN, |r| r.residual);
                return Err(GsError::NonConvergence(format!(
                    "fixed-boundary iteration stalled: {} sweeps, residual {last:.3e} \
                     (tolerance {:.3e})",
                    inner.iterations, config.eps_inner
                )));
            }
            Ok(FixedBoundarySolution {
                psi: inner.psi,
                normalization: Some(inner.normalization),
                records: inner.records,
            })
        }
    }
}

/// A converged free-boundary equilibrium.
#[derive(Debug)]
pub struct FreeBoundarySolution {
    pub psi: Vec<f64>,
    /// Wall data at the facet midpoints, consistent with `psi`.
    pub psi_b: Vec<f64>,
    /// Fitted per-turn coil currents, A.
    pub currents: Vec<f64>,
    pub normalization: Normalization,
    pub outer_iterations: usize,
    pub records: Vec<IterationRecord>,
}

/// Solve the free-boundary problem: find the flux, the wall data, and the
/// coil currents that together satisfy the interior equation, the exterior
/// field representation, and the shape target.
///
/// `psi_init` seeds the normalization for cycle zero (a fixed-boundary
/// solve of the same profiles is a good choice). The target outline is
/// resampled into `config.n_control` equally spaced control stations.
pub fn solve_free_boundary(
    mesh: &CutCellMesh,
    coils: &CoilSet,
    profiles: &ProfileTable,
    target: &BoundaryPolygon,
    psi_init: &[f64],
    config: &SolverConfig,
) -> Result<FreeBoundarySolution> {
    config.validate()?;
    let n = mesh.grid.n_points();
    let n_facets = mesh.facets.len();
    if psi_init.len() != n {
        return Err(GsError::Config(format!(
            "initial field has {} entries for a {} x {} grid",
            psi_init.len(),
            mesh.grid.nr,
            mesh.grid.nz
        )));
    }
    if coils.is_empty() {
        return Err(GsError::Config("free-boundary solve needs at least one coil".into()));
    }

    let control = ShapeTarget::sample_polyline(target, config.n_control)?;
    let op = assemble(mesh)?;
    let facet_weights = BoundaryWeights::at_facet_midpoints(mesh, coils)?;
    let mut machine = coils.clone();

    // Cycle zero: normalize the seed field against homogeneous wall data,
    // fit currents once, and synthesize the first wall values.
    let zero_bc = vec![0.0; n_facets];
    let points = find_critical_points(mesh, psi_init)?;
    let mut norm = select_normalization(&points, mesh, &zero_bc)?;
    let s = source_term(mesh, psi_init, &norm, profiles)?;
    let (mut u, _) = solve_homogeneous_u(&op, &s, None, &config.linear)?;
    let mut q = facet_normal_derivatives(&op, &u);
    let (a_mat, b_vec) = build_constraint_rows(mesh, &machine, &control, &q, &u, norm.psi_x)?;
    let mut currents =
        solve_currents(&a_mat, &b_vec, &CoilSolveConfig { gamma: config.gamma, reference: None })?;
    machine.set_currents(&currents)?;
    let mut reference = currents.clone();
    let mut psi_b = hagenow_boundary(&facet_weights, &machine, &q)?;
    let mut psi = initial_guess_field(mesh, &machine, &q, &u)?;

    let mut aitken = Aitken::new(config.relax);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut d_b = vec![0.0; n_facets];

    for cycle in 1..=config.m_max {
        let inner = inner_loop(mesh, &op, &psi_b, profiles, &psi, config)?;
        let InnerResult { psi: psi_next, records: inner_records, .. } = inner;
        psi = psi_next;
        for mut rec in inner_records {
            rec.outer = cycle;
            rec.currents = currents.clone();
            records.push(rec);
        }

        // Normalize the post-update field, refit the currents, and
        // regenerate the wall data.
        let points = find_critical_points(mesh, &psi)?;
        norm = select_normalization(&points, mesh, &psi_b)?;
        let s = source_term(mesh, &psi, &norm, profiles)?;
        let (u_next, _) = solve_homogeneous_u(&op, &s, Some(&u), &config.linear)?;
        u = u_next;
        q = facet_normal_derivatives(&op, &u);
        let (a_mat, b_vec) = build_constraint_rows(mesh, &machine, &control, &q, &u, norm.psi_x)?;
        currents = solve_currents(
            &a_mat,
            &b_vec,
            &CoilSolveConfig { gamma: config.gamma, reference: Some(reference.clone()) },
        )?;
        if !config.freeze_reference {
            reference = currents.clone();
        }
        machine.set_currents(&currents)?;
        let tilde_b = hagenow_boundary(&facet_weights, &machine, &q)?;

        let mut d_inf = 0.0_f64;
        for k in 0..n_facets {
            d_b[k] = psi_b[k] - tilde_b[k];
            d_inf = d_inf.max(d_b[k].abs());
        }
        let alpha = aitken.step(&d_b);
        for k in 0..n_facets {
            psi_b[k] -= alpha * d_b[k];
        }
        let residual = alpha * d_inf;

        records.push(IterationRecord {
            level: LoopLevel::Outer,
            outer: cycle,
            index: cycle,
            residual,
            alpha,
            psi_axis: norm.psi_axis,
            psi_x: norm.psi_x,
            currents: currents.clone(),
        });

        if residual < config.eps_outer {
            return Ok(FreeBoundarySolution {
                psi,
                psi_b,
                currents,
                normalization: norm,
                outer_iterations: cycle,
                records,
            });
        }
    }

    let tail: Vec<String> = records
        .iter()
        .rev()
        .filter(|r| r.level == LoopLevel::Outer)
        .take(5)
        .map(|r| format!("{:.3e}", r.residual))
        .collect();
    Err(GsError::NonConvergence(format!(
        "free-boundary cycle stalled after {} passes; last wall residuals (newest first): {}",
        config.m_max,
        tail.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use crate::coils::Coil;
    use crate::geometry::build_cut_cell_mesh;
    use crate::grid::CartesianGrid;
    use crate::manufactured::Soloviev;
    use crate::MU0;

    fn soloviev_mesh(nr: usize, nz: usize) -> (Soloviev, CutCellMesh) {
        let sol = Soloviev::iter_like();
        let wall = sol.boundary(96).unwrap();
        let grid = CartesianGrid::from_extents(0.60, 1.40, -0.63, 0.63, nr, nz).unwrap();
        let mesh = build_cut_cell_mesh(&grid, &wall).unwrap();
        (sol, mesh)
    }

    /// Profile tables whose Picard fixed point is the Soloviev field: a
    /// linear pressure with slope matched to the axis depth and a flat g,
    /// so the source reduces to R² at the converged normalization.
    fn soloviev_profiles(sol: &Soloviev) -> ProfileTable {
        let (_, _, psi_axis) = sol.magnetic_axis();
        let p0 = -psi_axis / MU0;
        let n = 5;
        let p = (0..n).map(|k| p0 * (1.0 - k as f64 / (n - 1) as f64)).collect();
        let g = vec![1.0; n];
        ProfileTable::new(p, g).unwrap()
    }

    #[test]
    fn zero_source_keeps_a_constant_dirichlet_field() {
        let (_, mesh) = soloviev_mesh(31, 41);
        let zeros = vec![0.0; mesh.grid.n_points()];
        let c = 0.7;
        let facet_psi = vec![c; mesh.facets.len()];
        let config = SolverConfig::default();
        let psi =
            solve_fixed_boundary(&mesh, &facet_psi, FixedSource::Field(&zeros), &config)
                .unwrap()
                .psi;
        let worst = mesh
            .active
            .iter()
            .map(|&idx| (psi[idx] - c).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-7, "constant field not reproduced, off by {worst:.3e}");
    }

    #[test]
    fn profile_solve_recovers_the_soloviev_field() {
        let (sol, mesh) = soloviev_mesh(61, 81);
        let table = soloviev_profiles(&sol);
        let facet_psi: Vec<f64> =
            mesh.facets.iter().map(|f| sol.psi(f.midpoint[0], f.midpoint[1])).collect();
        let config = SolverConfig { eps_inner: 1.0e-6, ..SolverConfig::default() };
        let psi =
            solve_fixed_boundary(&mesh, &facet_psi, FixedSource::Profiles(&table), &config)
                .unwrap()
                .psi;

        let mut worst = 0.0_f64;
        for &idx in &mesh.active {
            let (i, j) = mesh.grid.ij(idx);
            let [r, z] = mesh.grid.point(i, j);
            worst = worst.max((psi[idx] - sol.psi(r, z)).abs());
        }
        // Budget: discretization error at this resolution plus the small
        // scale shift from the wall-limited normalization.
        assert!(worst < 1e-2, "profile solve drifted from the analytic field by {worst:.3e}");

        let (_, _, psi_axis) = sol.magnetic_axis();
        let computed_min = mesh.active.iter().map(|&i| psi[i]).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(computed_min, psi_axis, epsilon = 2e-3);
    }

    #[test]
    fn inner_records_follow_the_relaxation_clamps() {
        let (sol, mesh) = soloviev_mesh(31, 41);
        let table = soloviev_profiles(&sol);
        let facet_psi: Vec<f64> =
            mesh.facets.iter().map(|f| sol.psi(f.midpoint[0], f.midpoint[1])).collect();
        let psi0: Vec<f64> = (0..mesh.grid.n_points())
            .map(|idx| {
                let (i, j) = mesh.grid.ij(idx);
                let [r, z] = mesh.grid.point(i, j);
                sol.psi(r, z)
            })
            .collect();
        let op = assemble(&mesh).unwrap();
        let config = SolverConfig { eps_inner: 1.0e-6, ..SolverConfig::default() };
        let inner = inner_loop(&mesh, &op, &facet_psi, &table, &psi0, &config).unwrap();

        assert!(inner.converged, "inner loop failed to converge from the exact field");
        assert_eq!(inner.records.len(), inner.iterations);
        let first = &inner.records[0];
        assert_abs_diff_eq!(first.alpha, 1.0 - config.relax.lambda_init, epsilon = 1e-15);
        for (k, rec) in inner.records.iter().enumerate() {
            assert_eq!(rec.level, LoopLevel::Inner);
            assert_eq!(rec.index, k + 1);
            assert!(rec.residual.is_finite());
            assert!(rec.alpha >= 1.0 - config.relax.lambda_max - 1e-15);
            assert!(rec.alpha <= 1.0 - config.relax.lambda_min + 1e-15);
        }
        assert!(inner.records.last().unwrap().residual < config.eps_inner);
        assert!(!inner.normalization.limited || inner.normalization.psi_x.is_finite());
    }

    fn synthetic_machine() -> (CutCellMesh, CoilSet, ProfileTable, BoundaryPolygon) {
        let grid = CartesianGrid::from_extents(0.85, 2.15, -0.70, 0.70, 49, 49).unwrap();
        let wall = BoundaryPolygon::rectangle(1.0, 2.0, -0.55, 0.55).unwrap();
        let mesh = build_cut_cell_mesh(&grid, &wall).unwrap();
        let coils = CoilSet::new(vec![
            Coil::point("in", 0.60, 0.0, 60.0),
            Coil::point("top", 2.45, 0.85, 80.0),
            Coil::point("bot", 2.45, -0.85, 80.0),
        ])
        .unwrap();
        let n = 5;
        let p0 = 2.0e4;
        let p = (0..n).map(|k| p0 * (1.0 - k as f64 / (n - 1) as f64)).collect();
        let g = vec![2.0; n];
        let table = ProfileTable::new(p, g).unwrap();
        let target = BoundaryPolygon::rectangle(1.10, 1.90, -0.45, 0.45).unwrap();
        (mesh, coils, table, target)
    }

    #[test]
    fn free_boundary_cycle_converges_on_a_synthetic_machine() {
        let (mesh, coils, table, target) = synthetic_machine();
        let config = SolverConfig {
            eps_inner: 1.0e-5,
            eps_outer: 1.0e-4,
            m_max: 40,
            ..SolverConfig::default()
        };
        let zeros = vec![0.0; mesh.facets.len()];
        let seed =
            solve_fixed_boundary(&mesh, &zeros, FixedSource::Profiles(&table), &config)
                .unwrap()
                .psi;
        let sol = solve_free_boundary(&mesh, &coils, &table, &target, &seed, &config).unwrap();

        assert!(sol.outer_iterations <= config.m_max);
        assert_eq!(sol.currents.len(), coils.len());
        assert!(sol.currents.iter().all(|c| c.is_finite()));
        assert!(sol.psi_b.iter().all(|v| v.is_finite()));
        assert!(
            (sol.normalization.psi_x - sol.normalization.psi_axis).abs() > 0.0,
            "degenerate normalization"
        );

        // The last outer row carries the converged residual and clamped
        // relaxation factors.
        let outer_rows: Vec<&IterationRecord> =
            sol.records.iter().filter(|r| r.level == LoopLevel::Outer).collect();
        assert_eq!(outer_rows.len(), sol.outer_iterations);
        assert!(outer_rows.last().unwrap().residual < config.eps_outer);
        for row in &outer_rows {
            assert!(row.alpha >= 1.0 - config.relax.lambda_max - 1e-15);
            assert!(row.alpha <= 1.0 - config.relax.lambda_min + 1e-15);
            assert_eq!(row.currents.len(), coils.len());
        }

        // Inner rows of one cycle snapshot the currents in force there.
        let first_inner =
            sol.records.iter().find(|r| r.level == LoopLevel::Inner).unwrap();
        assert_eq!(first_inner.outer, 1);
        assert_eq!(first_inner.currents.len(), coils.len());
    }

    #[test]
    fn outer_cycle_cap_raises_non_convergence() {
        let (mesh, coils, table, target) = synthetic_machine();
        let config = SolverConfig {
            eps_inner: 1.0e-2,
            eps_outer: 1.0e-300,
            n_max: 5,
            m_max: 2,
            ..SolverConfig::default()
        };
        let zeros = vec![0.0; mesh.facets.len()];
        let seed = solve_fixed_boundary(&mesh, &zeros, FixedSource::Profiles(&table), &config)
            .unwrap()
            .psi;
        let err = solve_free_boundary(&mesh, &coils, &table, &target, &seed, &config).unwrap_err();
        assert!(matches!(err, GsError::NonConvergence(_)), "got {err:?}");
    }

    #[test]
    fn config_validation_rejects_bad_settings() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());

        let relax = |lambda_min: f64, lambda_max: f64| AitkenOptions {
            lambda_min,
            lambda_max,
            ..AitkenOptions::default()
        };

        let c = SolverConfig { eps_inner: 0.0, ..SolverConfig::default() };
        assert!(c.validate().is_err());

        let c = SolverConfig { m_max: 0, ..SolverConfig::default() };
        assert!(c.validate().is_err());

        let c = SolverConfig { relax: relax(0.8, 0.5), ..SolverConfig::default() };
        assert!(c.validate().is_err());

        let c = SolverConfig { relax: relax(0.0, 1.0), ..SolverConfig::default() };
        assert!(c.validate().is_err());

        let c = SolverConfig { gamma: -1.0, ..SolverConfig::default() };
        assert!(c.validate().is_err());

        // Pinned relaxation (min == max) is legal: it is how fixed-α
        // baselines are run.
        let c = SolverConfig { relax: relax(0.3, 0.3), ..SolverConfig::default() };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn csv_rows_match_the_header_shape() {
        let rec = IterationRecord {
            level: LoopLevel::Outer,
            outer: 3,
            index: 3,
            residual: 1.25e-4,
            alpha: 0.7,
            psi_axis: -0.04,
            psi_x: 0.001,
            currents: vec![1.0e5, -2.0e4],
        };
        let header = IterationRecord::csv_header(2);
        assert_eq!(header.split(',').count(), rec.csv_row().split(',').count());
        assert!(rec.csv_row().starts_with("outer,3,3,"));
    }
}
