//! Coil currents from shape control points by regularized least squares.
//!
//! Given the homogeneous solution U (and its wall normal derivative q),
//! the flux at an interior point splits into a part fixed by the plasma
//! and a part linear in the coil currents. Asking the total flux at M
//! control points on the desired separatrix to equal ψ_X gives an
//! overdetermined linear system A·I ≈ b for the N_c currents, solved with
//! a Tikhonov term γ‖D·I‖² that keeps the (often nearly collinear) coil
//! columns from fighting each other. D is the identity on the first
//! solve; once reference currents exist, the normalized variant
//! D = diag(1/I_k⁰) measures each coil against its own scale so the
//! penalty is dimensionless.

use nalgebra::{DMatrix, DVector};

use crate::boundary::{interior_u, BoundaryWeights};
use crate::coils::CoilSet;
use crate::error::{GsError, Result};
use crate::geometry::{BoundaryPolygon, CutCellMesh};

/// Control points used when sampling a target boundary, unless told
/// otherwise.
pub const DEFAULT_CONTROL_POINTS: usize = 21;

/// Shape control points on the desired separatrix.
#[derive(Debug, Clone)]
pub struct ShapeTarget {
    points: Vec<[f64; 2]>,
}

impl ShapeTarget {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(GsError::Config("shape target has no control points".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GsError::Config("shape target has non-finite coordinates".into()));
        }
        for (k, p) in points.iter().enumerate() {
            for (l, o) in points.iter().enumerate().skip(k + 1) {
                if p == o {
                    return Err(GsError::Config(format!(
                        "control points {k} and {l} coincide at ({}, {})",
                        p[0], p[1]
                    )));
                }
            }
        }
        Ok(Self { points })
    }

    /// `m` points evenly spaced in arc length along a target outline.
    pub fn sample_polyline(target: &BoundaryPolygon, m: usize) -> Result<Self> {
        Self::new(target.sample_by_arclength(m))
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Regularization settings for one current solve.
#[derive(Debug, Clone)]
pub struct CoilSolveConfig {
    /// Tikhonov weight; dimensionless in the normalized variant.
    pub gamma: f64,
    /// Reference currents I⁰ for the normalized penalty; `None` selects
    /// the plain identity regularizer (the first solve, before any
    /// reference exists).
    pub reference: Option<Vec<f64>>,
}

impl Default for CoilSolveConfig {
    fn default() -> Self {
        Self { gamma: 1e-15, reference: None }
    }
}

impl CoilSolveConfig {
    /// Diagonal of D: 1 for the plain objective, 1/|I_k⁰| for the
    /// normalized one. Vanishing references are floored at 10⁻⁶ of the
    /// largest |I⁰| (or 1 A when all are zero) so a coil that happened to
    /// idle in the previous iterate is not pinned to zero forever.
    pub fn ridge_weights(&self, n_coils: usize) -> Result<Vec<f64>> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(GsError::Config(format!(
                "regularization weight must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        match &self.reference {
            None => Ok(vec![1.0; n_coils]),
            Some(i0) => {
                if i0.len() != n_coils {
                    return Err(GsError::Config(format!(
                        "{} reference currents for {} coils",
                        i0.len(),
                        n_coils
                    )));
                }
                let imax = i0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let floor = if imax > 0.0 { 1e-6 * imax } else { 1.0 };
                Ok(i0.iter().map(|v| 1.0 / v.abs().max(floor)).collect())
            }
        }
    }
}

/// Assemble the control-point system. Row j asks the flux at control
/// point x'_j to reach ψ_X:
///
///   Σ_i μ₀ G(coil_i; x'_j) turns_i · I_i  =  −∮(dl/R) G ∂U/∂n + U(x'_j) − ψ_X.
///
/// `q` holds the wall normal derivatives of the homogeneous solution `u`.
/// Control points must lie strictly inside the wall.
pub fn build_constraint_rows(
    mesh: &CutCellMesh,
    coils: &CoilSet,
    target: &ShapeTarget,
    q: &[f64],
    u: &[f64],
    psi_x: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = target.len();
    let nc = coils.len();
    if m <= nc {
        return Err(GsError::Config(format!(
            "{m} control points cannot constrain {nc} coils; need more points than coils"
        )));
    }
    for (k, p) in target.points().iter().enumerate() {
        if mesh.polygon.signed_distance(*p) >= 0.0 {
            return Err(GsError::Config(format!(
                "control point {k} at ({}, {}) lies outside the wall",
                p[0], p[1]
            )));
        }
    }
    let weights = BoundaryWeights::precompute(mesh, coils, target.points().to_vec())?;
    let line = weights.line_flux(q)?;
    let mut a = DMatrix::zeros(m, nc);
    let mut b = DVector::zeros(m);
    for j in 0..m {
        for i in 0..nc {
            // coil_weight is the flux per unit current; the constraint
            // matrix carries the same coupling on the other side of the
            // equation.
            a[(j, i)] = -weights.coil_weight(j, i);
        }
        b[j] = line[j] + interior_u(mesh, u, target.points()[j])? - psi_x;
    }
    Ok((a, b))
}

/// Minimize ‖A·I − b‖² + γ‖D·I‖² by the normal equations. The system is
/// tiny (a dozen coils), so forming AᵀA costs nothing and the Cholesky
/// factor either exists or the setup is genuinely degenerate.
pub fn solve_currents(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    config: &CoilSolveConfig,
) -> Result<Vec<f64>> {
    let (m, nc) = a.shape();
    if m != b.len() {
        return Err(GsError::Config(format!(
            "constraint matrix has {m} rows, target vector {}",
            b.len()
        )));
    }
    if nc == 0 || m < nc {
        return Err(GsError::Config(format!(
            "cannot determine {nc} currents from {m} constraints"
        )));
    }
    let d = config.ridge_weights(nc)?;
    let mut normal = a.transpose() * a;
    for (k, dk) in d.iter().enumerate() {
        normal[(k, k)] += config.gamma * dk * dk;
    }
    let rhs = a.transpose() * b;
    let chol = normal.cholesky().ok_or_else(|| {
        GsError::Config(
            "coil normal equations are singular: degenerate coil placement with no \
             regularization"
                .into(),
        )
    })?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}
