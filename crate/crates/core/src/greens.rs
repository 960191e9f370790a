//! Complete elliptic integrals and the toroidal Green's function.
//!
//! `greens_function` evaluates the fundamental solution of the
//! Grad-Shafranov operator,
//!
//! ```text
//! G(R, Z; R', Z') = (1/2pi) (sqrt(R R') / k) [(2 - k^2) K(k) - 2 E(k)],
//! k^2 = 4 R R' / ((R + R')^2 + (Z - Z')^2),
//! ```
//!
//! the poloidal flux induced at one point by a unit toroidal current loop
//! at the other. K and E come from the arithmetic-geometric mean, which
//! converges quadratically and holds full double precision over the whole
//! modulus range. The bracket cancels to O(k^4) as the loops separate, so
//! below a small-k threshold the closed form is swapped for its series.

use crate::error::{GsError, Result};

/// m = k^2 below which `greens_function` uses the series form. The direct
/// bracket loses roughly eps/k^4 of its relative accuracy to cancellation
/// while the truncated series is off by ~0.35 m^5; both sit near 1e-10 at
/// this crossover.
const SERIES_SWITCH_M: f64 = 1e-2;

/// Complete elliptic integrals (K(k), E(k)) of the first and second kind,
/// by the arithmetic-geometric mean.
///
/// Accurate to full double precision for k in [0, 1); k >= 1 (where K
/// diverges) and NaN are rejected.
pub fn elliptic_ke(k: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&k) {
        return Err(GsError::Config(format!(
            "elliptic modulus must lie in [0, 1), got {k}"
        )));
    }
    // (1 - k)(1 + k) instead of 1 - k^2: near k = 1 the direct form loses
    // half the digits of the complementary modulus.
    let mut a = 1.0_f64;
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    let mut c = k;
    let mut sum = 0.5 * c * c;
    let mut pow2 = 0.5;
    for _ in 0..64 {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow2 *= 2.0;
        sum += pow2 * c * c;
    }
    let big_k = std::f64::consts::FRAC_PI_2 / a;
    let big_e = big_k * (1.0 - sum);
    Ok((big_k, big_e))
}

/// Green's function of the Grad-Shafranov operator for source loop (r, z)
/// and evaluation point (rp, zp). Symmetric under swapping the two points.
///
/// Coincident points are a genuine singularity of the kernel; callers
/// integrating over the boundary must regularize (see the boundary-value
/// module), so they are rejected here rather than smoothed over.
pub fn greens_function(r: f64, z: f64, rp: f64, zp: f64) -> Result<f64> {
    if !(r > 0.0 && rp > 0.0) {
        return Err(GsError::Config(format!(
            "Green's function needs positive radii, got R = {r}, R' = {rp}"
        )));
    }
    let d2 = (r + rp) * (r + rp) + (z - zp) * (z - zp);
    let m = 4.0 * r * rp / d2;
    let root_rr = (r * rp).sqrt();
    if m < SERIES_SWITCH_M {
        // (2 - m)K - 2E = (pi/2)(m^2/8)(1 + 3m/4 + 75m^2/128 + ...); the
        // prefactors fold into k^3/32. Terms through m^4 keep the
        // truncation error below the crossover's 1e-10.
        let series = 1.0
            + m * (3.0 / 4.0
                + m * (75.0 / 128.0 + m * (245.0 / 512.0 + m * (6615.0 / 16384.0))));
        return Ok(root_rr * m * m.sqrt() / 32.0 * series);
    }
    if m >= 1.0 {
        return Err(GsError::Geometry(
            "Green's function evaluated at coincident points".into(),
        ));
    }
    let k = m.sqrt();
    let (big_k, big_e) = elliptic_ke(k)?;
    Ok(root_rr / (2.0 * std::f64::consts::PI) / k * ((2.0 - m) * big_k - 2.0 * big_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::assemble;
    use crate::geometry::{build_cut_cell_mesh, BoundaryPolygon, CellClass};
    use crate::grid::CartesianGrid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn ke_endpoint_and_frozen_values() {
        let (k0, e0) = elliptic_ke(0.0).unwrap();
        assert_eq!(k0, std::f64::consts::FRAC_PI_2);
        assert_eq!(e0, std::f64::consts::FRAC_PI_2);

        // High-precision reference values.
        let (k, e) = elliptic_ke(0.5).unwrap();
        assert_abs_diff_eq!(k, 1.685_750_354_812_596, epsilon = 1e-13);
        assert_abs_diff_eq!(e, 1.467_462_209_339_427_2, epsilon = 1e-13);
        let (k, e) = elliptic_ke(0.9).unwrap();
        assert_abs_diff_eq!(k, 2.280_549_138_422_770_2, epsilon = 1e-13);
        assert_abs_diff_eq!(e, 1.171_697_052_781_614_1, epsilon = 1e-13);
    }

    #[test]
    fn ke_near_the_logarithmic_end() {
        let k = 1.0 - 1e-8;
        let (big_k, big_e) = elliptic_ke(k).unwrap();
        assert!(big_k.is_finite() && big_e.is_finite());
        // Reference values at the f64 nearest 1 - 1e-8; K's sensitivity
        // to the modulus is ~1/k'^2 here, so the argument must match the
        // oracle's to the bit.
        assert_abs_diff_eq!(big_k, 10.250_061_189_054_027, epsilon = 1e-12);
        assert_abs_diff_eq!(big_e, 1.000_000_097_500_612, epsilon = 1e-12);
        // K approaches ln(4/k') as k -> 1.
        let kp = ((1.0 - k) * (1.0 + k)).sqrt();
        assert_abs_diff_eq!(big_k, (4.0 / kp).ln(), epsilon = 1e-7);
    }

    #[test]
    fn ke_rejects_bad_moduli() {
        assert!(elliptic_ke(1.0).is_err());
        assert!(elliptic_ke(1.5).is_err());
        assert!(elliptic_ke(-0.1).is_err());
        assert!(elliptic_ke(f64::NAN).is_err());
    }

    #[test]
    fn legendre_relation_holds() {
        // E(k)K(k') + E(k')K(k) - K(k)K(k') = pi/2 for k' = sqrt(1 - k^2).
        for &k in &[0.05_f64, 0.2, 0.4, 0.5, 0.7, 0.9, 0.99, 0.999] {
            let kp = ((1.0 - k) * (1.0 + k)).sqrt();
            let (kk, ek) = elliptic_ke(k).unwrap();
            let (kkp, ekp) = elliptic_ke(kp).unwrap();
            let legendre = ek * kkp + ekp * kk - kk * kkp;
            assert_abs_diff_eq!(legendre, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
        }
    }

    #[test]
    fn greens_is_symmetric_and_matches_references() {
        let g1 = greens_function(1.0, 0.2, 2.0, -0.3).unwrap();
        let g2 = greens_function(2.0, -0.3, 1.0, 0.2).unwrap();
        assert_eq!(g1, g2); // k and sqrt(RR') are symmetric expressions

        assert_relative_eq!(g1, 0.121_500_487_807_850_85, max_relative = 1e-12);
        let g = greens_function(6.2, 0.0, 3.9431, 7.5741).unwrap();
        assert_relative_eq!(g, 0.140_347_616_787_470_48, max_relative = 1e-12);
        // Near-coincident loops: large but finite and still accurate.
        let g = greens_function(1.0, 0.0, 1.001, 0.001).unwrap();
        assert_relative_eq!(g, 1.057_496_397_342_443, max_relative = 1e-10);
    }

    #[test]
    fn series_branch_matches_references_and_decays() {
        // One point per side of the series/direct crossover (m ~ 1e-2).
        let g = greens_function(1.0, 0.0, 1.2, 30.0).unwrap();
        assert_relative_eq!(g, 1.327_933_831_024_093e-5, max_relative = 1e-10);
        let g = greens_function(1.0, 0.0, 1.1, 20.9).unwrap();
        assert_relative_eq!(g, 3.288_546_847_532_085e-5, max_relative = 1e-10);

        // Far field: fixed source, growing separation, G -> 0.
        let mut prev = f64::INFINITY;
        for &dz in &[5.0, 10.0, 20.0, 50.0, 100.0] {
            let g = greens_function(1.0, 0.0, 1.0, dz).unwrap();
            assert!(g > 0.0 && g < prev);
            prev = g;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn greens_rejects_degenerate_inputs() {
        assert!(greens_function(1.0, 0.5, 1.0, 0.5).is_err());
        assert!(greens_function(-1.0, 0.0, 2.0, 0.0).is_err());
        assert!(greens_function(1.0, 0.0, 0.0, 1.0).is_err());
    }

    /// Away from its source loop the Green's function is annihilated by
    /// the operator, so the discrete residual on sampled values is pure
    /// truncation error and must shrink at second order.
    #[test]
    fn discrete_operator_annihilates_greens() {
        let source = [3.9431, 7.5741]; // well outside the mesh box
        let residual = |nr: usize, nz: usize| -> f64 {
            let grid = CartesianGrid::from_extents(1.0, 2.0, -0.5, 0.5, nr, nz).unwrap();
            let wall = BoundaryPolygon::rectangle(1.08, 1.92, -0.42, 0.42).unwrap();
            let mesh = build_cut_cell_mesh(&grid, &wall).unwrap();
            let op = assemble(&mesh).unwrap();

            let g: Vec<f64> = (0..grid.n_points())
                .map(|idx| {
                    let (i, j) = grid.ij(idx);
                    let p = grid.point(i, j);
                    greens_function(source[0], source[1], p[0], p[1]).unwrap()
                })
                .collect();
            let mut ag = vec![0.0; g.len()];
            op.matrix.matvec(&g, &mut ag);

            // Deep-interior rows only: their stencil never reaches a cell
            // whose truncation error is boundary-limited.
            let deep = |i: usize, j: usize| {
                let mut ok = true;
                for di in -2i64..=2 {
                    for dj in -2i64..=2 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        ok &= ii >= 0
                            && jj >= 0
                            && (ii as usize) < grid.nr
                            && (jj as usize) < grid.nz
                            && mesh.class_at(ii as usize, jj as usize) == CellClass::Interior;
                    }
                }
                ok
            };
            let mut worst = 0.0_f64;
            for idx in 0..g.len() {
                let (i, j) = grid.ij(idx);
                if deep(i, j) {
                    worst = worst.max(ag[idx].abs());
                }
            }
            worst
        };

        let coarse = residual(33, 33);
        let fine = residual(65, 65);
        let order = (coarse / fine).log2();
        assert!(
            order > 1.8 && order < 2.6,
            "residual order {order:.2} (coarse {coarse:.3e}, fine {fine:.3e})"
        );
    }
}
