//! Plasma profiles p(ψ̄), g(ψ̄) and the equilibrium source term.
//!
//! Pressure and the toroidal field function arrive as tables over the
//! normalized flux and are evaluated with the same Floater-Hormann
//! barycentric family the critical-point search uses (degree 4): node
//! values are reproduced exactly, the interpolant is pole-free, and its
//! differentiated form gives the dp/dψ̄ and g·dg/dψ̄ factors the source
//! needs. Evaluation clamps ψ̄ to the tabulated interval [0, 1] — the
//! profiles are physically meaningless outside the plasma — while the
//! *support* of the source is decided on the unclamped value.

use std::collections::VecDeque;

use crate::critical::Normalization;
use crate::error::{GsError, Result};
use crate::geometry::CutCellMesh;
use crate::interp::Bary1D;
use crate::MU0;

/// Blend degree of the profile interpolant.
const PROFILE_DEGREE: usize = 4;

/// Tabulated p(ψ̄) and g(ψ̄) on equispaced nodes spanning [0, 1].
#[derive(Debug, Clone)]
pub struct ProfileTable {
    p: Vec<f64>,
    g: Vec<f64>,
    bary: Bary1D,
}

impl ProfileTable {
    /// Build a table from node values; node k sits at ψ̄ = k/(n−1).
    pub fn new(p: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if p.len() != g.len() {
            return Err(GsError::Config(format!(
                "profile columns disagree: {} pressure rows, {} field rows",
                p.len(),
                g.len()
            )));
        }
        let n = p.len();
        if n < PROFILE_DEGREE + 1 {
            return Err(GsError::Config(format!(
                "profile table needs at least {} rows, got {n}",
                PROFILE_DEGREE + 1
            )));
        }
        if p.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(GsError::Config("profile table contains non-finite values".into()));
        }
        let nodes: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let bary = Bary1D::uniform(nodes, PROFILE_DEGREE)?;
        Ok(Self { p, g, bary })
    }

    /// Parse the text form: an optional header line, then one `ψ̄ p g` row
    /// per node. Blank lines and `#` comments are skipped. The ψ̄ column
    /// must be equispaced and span [0, 1].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<[f64; 3]> = Vec::new();
        let mut header_seen = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<Vec<f64>> =
                fields.iter().map(|t| t.parse::<f64>().ok()).collect();
            match parsed {
                Some(vals) if vals.len() == 3 => rows.push([vals[0], vals[1], vals[2]]),
                Some(_) => {
                    return Err(GsError::Config(format!(
                        "profile line {}: expected 3 columns (psibar p g), got {}",
                        ln + 1,
                        fields.len()
                    )))
                }
                None if !header_seen && rows.is_empty() => header_seen = true,
                None => {
                    return Err(GsError::Config(format!(
                        "profile line {}: unreadable numbers: {line:?}",
                        ln + 1
                    )))
                }
            }
        }
        let n = rows.len();
        if n < PROFILE_DEGREE + 1 {
            return Err(GsError::Config(format!(
                "profile table needs at least {} rows, got {n}",
                PROFILE_DEGREE + 1
            )));
        }
        let h = 1.0 / (n - 1) as f64;
        for (k, row) in rows.iter().enumerate() {
            let want = k as f64 * h;
            if (row[0] - want).abs() > 1e-9 {
                return Err(GsError::Config(format!(
                    "profile nodes must be equispaced on [0, 1]: row {} has psibar = {}, expected {want}",
                    k + 1,
                    row[0]
                )));
            }
        }
        Self::new(rows.iter().map(|r| r[1]).collect(), rows.iter().map(|r| r[2]).collect())
    }

    pub fn n_nodes(&self) -> usize {
        self.p.len()
    }

    /// A copy with every pressure node multiplied by `factor`, the field
    /// function left alone — the usual knob for pressure scans.
    pub fn scale_pressure(&self, factor: f64) -> Result<Self> {
        Self::new(self.p.iter().map(|v| v * factor).collect(), self.g.clone())
    }

    /// (p, g) at the clamped normalized flux.
    pub fn eval(&self, psibar: f64) -> (f64, f64) {
        let x = psibar.clamp(0.0, 1.0);
        (self.bary.eval(&self.p, x).0, self.bary.eval(&self.g, x).0)
    }

    /// (dp/dψ̄, dg/dψ̄) at the clamped normalized flux.
    pub fn eval_derivative(&self, psibar: f64) -> (f64, f64) {
        let x = psibar.clamp(0.0, 1.0);
        (self.bary.eval(&self.p, x).1, self.bary.eval(&self.g, x).1)
    }
}

/// Cells carrying plasma: active, unclamped ψ̄ < 1, and 4-connected to the
/// magnetic axis through cells of the same kind. The connectivity pass
/// drops spurious pockets where ψ̄ happens to dip below one far from the
/// axis (near coils, say) — the source must live on one nested region.
pub fn plasma_mask(
    mesh: &CutCellMesh,
    psi: &[f64],
    norm: &Normalization,
) -> Result<Vec<bool>> {
    let g = &mesh.grid;
    let n = g.n_points();
    if psi.len() != n {
        return Err(GsError::Config(format!(
            "flux field has {} entries, grid has {n} points",
            psi.len()
        )));
    }
    let in_plasma =
        |idx: usize| mesh.is_active_idx(idx) && norm.psi_bar(psi[idx]) < 1.0;

    // Seed at the grid point nearest the axis, widening one ring if the
    // rounding lands on a wall-clipped cell.
    let ia = ((norm.axis[0] - g.r0) / g.dr).round().clamp(0.0, (g.nr - 1) as f64) as usize;
    let ja = ((norm.axis[1] - g.z0) / g.dz).round().clamp(0.0, (g.nz - 1) as f64) as usize;
    let mut seed = None;
    'search: for dj in -1i64..=1 {
        for di in -1i64..=1 {
            let i = ia as i64 + di;
            let j = ja as i64 + dj;
            if i < 0 || j < 0 || i >= g.nr as i64 || j >= g.nz as i64 {
                continue;
            }
            let idx = g.idx(i as usize, j as usize);
            if in_plasma(idx) {
                seed = Some(idx);
                break 'search;
            }
        }
    }
    let seed = seed.ok_or_else(|| {
        GsError::InvalidSolution(format!(
            "no plasma cell near the magnetic axis at ({:.4}, {:.4})",
            norm.axis[0], norm.axis[1]
        ))
    })?;

    let mut mask = vec![false; n];
    let mut queue = VecDeque::from([seed]);
    mask[seed] = true;
    while let Some(idx) = queue.pop_front() {
        let (i, j) = g.ij(idx);
        let push = |nb: usize, mask: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            if !mask[nb] && in_plasma(nb) {
                mask[nb] = true;
                queue.push_back(nb);
            }
        };
        if i > 0 {
            push(idx - 1, &mut mask, &mut queue);
        }
        if i + 1 < g.nr {
            push(idx + 1, &mut mask, &mut queue);
        }
        if j > 0 {
            push(idx - g.nr, &mut mask, &mut queue);
        }
        if j + 1 < g.nz {
            push(idx + g.nr, &mut mask, &mut queue);
        }
    }
    Ok(mask)
}

/// The Grad-Shafranov right-hand side μ₀ R J_φ = −(μ₀ R² dp/dψ + g dg/dψ)
/// at every active cell's covered centroid; zero outside the plasma
/// region. The tabulated derivatives are taken in ψ̄, so both terms carry
/// the chain-rule factor 1/(ψ_X − ψ_o).
pub fn source_term(
    mesh: &CutCellMesh,
    psi: &[f64],
    norm: &Normalization,
    table: &ProfileTable,
) -> Result<Vec<f64>> {
    let mask = plasma_mask(mesh, psi, norm)?;
    let denom = norm.psi_x - norm.psi_axis;
    let mut s = vec![0.0; psi.len()];
    for (idx, sv) in s.iter_mut().enumerate() {
        if !mask[idx] {
            continue;
        }
        let pb = norm.psi_bar(psi[idx]);
        let (dp, dg) = table.eval_derivative(pb);
        let (_, gv) = table.eval(pb);
        let rc = mesh.centroid[idx][0];
        *sv = -(MU0 * rc * rc * dp + gv * dg) / denom;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cut_cell_mesh, BoundaryPolygon};
    use crate::grid::CartesianGrid;
    use crate::manufactured::grid_field;
    use approx::assert_relative_eq;

    fn rect_mesh(n: usize) -> CutCellMesh {
        let grid = CartesianGrid::from_extents(1.0, 2.0, -0.5, 0.5, n, n).unwrap();
        let wall = BoundaryPolygon::rectangle(1.08, 1.92, -0.42, 0.42).unwrap();
        build_cut_cell_mesh(&grid, &wall).unwrap()
    }

    fn bowl_norm(r0: f64, z0: f64, psi_x: f64) -> Normalization {
        Normalization {
            axis: [r0, z0],
            psi_axis: 0.0,
            x_point: [r0 + psi_x.sqrt(), z0],
            psi_x,
            limited: true,
        }
    }

    #[test]
    fn tables_reproduce_nodes_and_quartics() {
        let n = 11;
        let quartic = |x: f64| 0.3 + x - 2.0 * x.powi(2) + 0.5 * x.powi(3) + 0.25 * x.powi(4);
        let cubic = |x: f64| 1.0 - 0.4 * x + 0.1 * x.powi(3);
        let p: Vec<f64> = (0..n).map(|k| quartic(k as f64 / (n - 1) as f64)).collect();
        let g: Vec<f64> = (0..n).map(|k| cubic(k as f64 / (n - 1) as f64)).collect();
        let t = ProfileTable::new(p.clone(), g).unwrap();
        for k in 0..n {
            let x = k as f64 / (n - 1) as f64;
            assert_eq!(t.eval(x).0, p[k]);
        }
        for &x in &[0.037, 0.5, 0.81, 0.999] {
            let (pv, gv) = t.eval(x);
            assert_relative_eq!(pv, quartic(x), max_relative = 1e-12);
            assert_relative_eq!(gv, cubic(x), max_relative = 1e-12);
        }
        // Clamping pins values outside the tabulated interval.
        assert_eq!(t.eval(-0.3), t.eval(0.0));
        assert_eq!(t.eval(1.7), t.eval(1.0));
    }

    #[test]
    fn derivatives_match_analytic_slopes() {
        let n = 9;
        let p: Vec<f64> = (0..n)
            .map(|k| {
                let x = k as f64 / (n - 1) as f64;
                1.0 - x * x
            })
            .collect();
        let g: Vec<f64> = (0..n)
            .map(|k| 3.0 + 0.5 * k as f64 / (n - 1) as f64)
            .collect();
        let t = ProfileTable::new(p, g).unwrap();
        let (dp, dg) = t.eval_derivative(0.5);
        assert_relative_eq!(dp, -1.0, epsilon = 1e-10);
        assert_relative_eq!(dg, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn text_parsing_round_trips_and_validates() {
        let text = "\
# pedestal-free test profiles
psibar      p          g
0.00        1.0e4      5.30
0.25        0.8e4      5.25
 0.5        0.5e4      5.20

0.75        0.2e4      5.10
1.0         0.0        5.00
";
        let t = ProfileTable::from_text(text).unwrap();
        assert_eq!(t.n_nodes(), 5);
        assert_eq!(t.eval(0.25), (0.8e4, 5.25));
        assert_eq!(t.eval(1.0), (0.0, 5.0));

        assert!(ProfileTable::from_text("psibar p g\n0 1 1\n0.5 1 1\n1 1 1\n").is_err());
        let skew = "0 1 1\n0.2 1 1\n0.5 1 1\n0.75 1 1\n1 1 1\n";
        assert!(ProfileTable::from_text(skew).is_err());
        let junk = "0 1 1\n0.25 one 1\n0.5 1 1\n0.75 1 1\n1 1 1\n";
        assert!(ProfileTable::from_text(junk).is_err());
        assert!(ProfileTable::from_text("0 1\n0.5 1\n1 1\n").is_err());
    }

    #[test]
    fn constant_profiles_give_zero_source() {
        let mesh = rect_mesh(33);
        let psi = grid_field(&mesh, |r, z| (r - 1.5).powi(2) + z.powi(2));
        let norm = bowl_norm(1.5, 0.0, 0.02);
        let t = ProfileTable::new(vec![2.0e4; 6], vec![5.3; 6]).unwrap();
        let s = source_term(&mesh, &psi, &norm, &t).unwrap();
        // The interpolant differentiates a constant to rounding noise, not
        // to an exact zero; the bound is that noise scaled like the source.
        let tol = 1e-12 * (MU0 * 4.0 * 2.0e4 + 5.3 * 5.3) / norm.psi_x;
        assert!(s.iter().all(|v| v.abs() < tol));
    }

    #[test]
    fn linear_pressure_gives_the_quadratic_r_source() {
        let mesh = rect_mesh(33);
        let bowl = |r: f64, z: f64| (r - 1.5).powi(2) + z.powi(2);
        let psi = grid_field(&mesh, bowl);
        let norm = bowl_norm(1.5, 0.0, 0.02);
        let slope = -3.0e4;
        let p: Vec<f64> = (0..7).map(|k| 3.0e4 + slope * k as f64 / 6.0).collect();
        let t = ProfileTable::new(p, vec![5.3; 7]).unwrap();
        let s = source_term(&mesh, &psi, &norm, &t).unwrap();
        let mut checked = 0;
        for (idx, &sv) in s.iter().enumerate() {
            if !mesh.is_active_idx(idx) {
                assert_eq!(sv, 0.0);
                continue;
            }
            let pb = norm.psi_bar(psi[idx]);
            let rc = mesh.centroid[idx][0];
            if pb < 1.0 {
                assert_relative_eq!(
                    sv,
                    -MU0 * rc * rc * slope / norm.psi_x,
                    max_relative = 1e-9
                );
                checked += 1;
            } else {
                // ψ̄ ≥ 1 (e.g. 1.2 further out): no plasma, no source.
                assert_eq!(sv, 0.0);
            }
        }
        assert!(checked > 20, "plasma region unexpectedly small: {checked}");
    }

    #[test]
    fn source_support_stays_connected_to_the_axis() {
        let mesh = rect_mesh(65);
        // Two disjoint wells; the axis owns the left one.
        let two_wells = |r: f64, z: f64| {
            let a = (r - 1.25).powi(2) + z.powi(2);
            let b = (r - 1.75).powi(2) + z.powi(2);
            a.min(b)
        };
        let psi = grid_field(&mesh, two_wells);
        let norm = bowl_norm(1.25, 0.0, 0.02);
        let p: Vec<f64> = (0..6).map(|k| 1.0e4 * (1.0 - k as f64 / 5.0)).collect();
        let t = ProfileTable::new(p, vec![5.3; 6]).unwrap();
        let mask = plasma_mask(&mesh, &psi, &norm).unwrap();
        let s = source_term(&mesh, &psi, &norm, &t).unwrap();
        let (mut left, mut right) = (0usize, 0usize);
        for (idx, &m) in mask.iter().enumerate() {
            if !mesh.is_active_idx(idx) {
                continue;
            }
            let (i, _) = mesh.grid.ij(idx);
            let r = mesh.grid.r(i);
            let pb = norm.psi_bar(psi[idx]);
            if pb < 1.0 && r > 1.5 {
                // ψ̄ qualifies but the pocket is disconnected: excluded.
                assert!(!m);
                assert_eq!(s[idx], 0.0);
                right += 1;
            }
            if m {
                assert!(r < 1.5);
                assert!(s[idx] != 0.0);
                left += 1;
            }
        }
        assert!(left > 10, "axis well too small: {left}");
        assert!(right > 10, "detached well too small: {right}");
    }
}
