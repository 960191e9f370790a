//! Barycentric rational interpolation on uniform nodes.
//!
//! The critical-point search needs smooth point values, gradients and
//! Hessians of the discrete flux away from grid points. We use the
//! Floater-Hormann family (Floater & Hormann, Numer. Math. 107, 2007) on
//! small uniform windows: pole-free on the real line, reproduces
//! polynomials up to the blend degree exactly, and the barycentric form
//! differentiates cleanly.

use crate::error::{GsError, Result};

/// Signed Floater-Hormann weights for `n` uniform nodes and blend degree
/// `d`. Common scale factors are dropped (the barycentric form is
/// invariant), leaving the integer pattern; for d = 4 the magnitudes ramp
/// 1, 5, 11, 15, 16, ..., 16, 15, 11, 5, 1 with alternating signs.
pub fn fh_weights_uniform(n: usize, d: usize) -> Result<Vec<f64>> {
    if n < d + 1 {
        return Err(GsError::Config(format!(
            "Floater-Hormann degree {d} needs at least {} nodes, got {n}",
            d + 1
        )));
    }
    let binom = |k: usize| -> f64 {
        let mut b = 1.0;
        for m in 0..k {
            b = b * (d - m) as f64 / (m + 1) as f64;
        }
        b
    };
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        // Windows I_k = {k, ..., k+d} containing node i.
        let k_lo = i.saturating_sub(d);
        let k_hi = i.min(n - 1 - d);
        let mut s = 0.0;
        for k in k_lo..=k_hi {
            s += binom(i - k);
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        w.push(sign * s);
    }
    Ok(w)
}

/// One-dimensional barycentric interpolant with value / first / second
/// derivatives. Nodes must be strictly increasing (uniformity is only
/// assumed by the weight choice).
#[derive(Debug, Clone)]
pub struct Bary1D {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Bary1D {
    pub fn uniform(x: Vec<f64>, d: usize) -> Result<Self> {
        let w = fh_weights_uniform(x.len(), d)?;
        Ok(Self { x, w })
    }

    /// r(t), r'(t), r''(t) for node values `f`.
    ///
    /// Close to a node the rational form is 0/0 and, well before that, its
    /// derivative sums cancel catastrophically (the u², u³ terms of the
    /// nearest node dominate everything else). Inside a guard band around
    /// each node we therefore evaluate from the node itself: value and
    /// derivatives there come from the Schneider-Werner differentiation
    /// matrices (exact for the interpolant at its nodes), carried to t by
    /// a second-order Taylor step. The band is wide enough that the naive
    /// form is still accurate at its edge, so the two branches agree there.
    pub fn eval(&self, f: &[f64], t: f64) -> (f64, f64, f64) {
        debug_assert_eq!(f.len(), self.x.len());
        let n = self.x.len();
        let span = self.x[n - 1] - self.x[0];
        if let Some(k) = self.x.iter().position(|&xi| (t - xi).abs() <= 1e-5 * span) {
            let (r, r1, r2) = self.eval_at_node(f, k);
            let dt = t - self.x[k];
            return (r + dt * (r1 + 0.5 * dt * r2), r1 + dt * r2, r2);
        }
        let (mut n0, mut n1, mut n2) = (0.0, 0.0, 0.0);
        let (mut d0, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let u = 1.0 / (t - self.x[i]);
            let wu = self.w[i] * u;
            n0 += wu * f[i];
            d0 += wu;
            let wu2 = wu * u;
            n1 -= wu2 * f[i];
            d1 -= wu2;
            let wu3 = wu2 * u;
            n2 += 2.0 * wu3 * f[i];
            d2 += 2.0 * wu3;
        }
        let r = n0 / d0;
        let r1 = (n1 - r * d1) / d0;
        let r2 = (n2 - 2.0 * r1 * d1 - r * d2) / d0;
        (r, r1, r2)
    }

    /// Node-exact value and derivatives: rows k of the first and second
    /// barycentric differentiation matrices,
    /// D1[k][j] = (w_j / w_k) / (x_k - x_j) with a zero-sum diagonal, and
    /// D2[k][j] = 2 D1[k][j] (D1[k][k] - 1/(x_k - x_j)), likewise.
    fn eval_at_node(&self, f: &[f64], k: usize) -> (f64, f64, f64) {
        let n = self.x.len();
        let mut d1 = vec![0.0; n];
        let mut diag1 = 0.0;
        for j in 0..n {
            if j != k {
                d1[j] = (self.w[j] / self.w[k]) / (self.x[k] - self.x[j]);
                diag1 -= d1[j];
            }
        }
        let (mut r1, mut r2) = (0.0, 0.0);
        let mut diag2 = 0.0;
        for j in 0..n {
            if j != k {
                let d2 = 2.0 * d1[j] * (diag1 - 1.0 / (self.x[k] - self.x[j]));
                diag2 -= d2;
                r1 += d1[j] * f[j];
                r2 += d2 * f[j];
            }
        }
        r1 += diag1 * f[k];
        r2 += diag2 * f[k];
        (f[k], r1, r2)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }
}

/// Tensor-product interpolant on a rectangular window of a uniform grid.
/// `f` is row-major: `f[j * nx + i]` is the value at `(x[i], y[j])`.
#[derive(Debug, Clone)]
pub struct Bary2D {
    bx: Bary1D,
    by: Bary1D,
    nx: usize,
    ny: usize,
}

/// Value, gradient, Hessian at one point.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

impl Bary2D {
    pub fn uniform(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        let (nx, ny) = (x.len(), y.len());
        Ok(Self { bx: Bary1D::uniform(x, d)?, by: Bary1D::uniform(y, d)?, nx, ny })
    }

    pub fn eval(&self, f: &[f64], x: f64, y: f64) -> Jet2 {
        debug_assert_eq!(f.len(), self.nx * self.ny);
        // Interpolate each row in x, keeping value and x-derivatives...
        let mut g0 = vec![0.0; self.ny];
        let mut g1 = vec![0.0; self.ny];
        let mut g2 = vec![0.0; self.ny];
        for j in 0..self.ny {
            let row = &f[j * self.nx..(j + 1) * self.nx];
            let (a, b, c) = self.bx.eval(row, x);
            g0[j] = a;
            g1[j] = b;
            g2[j] = c;
        }
        // ...then collapse the columns in y.
        let (f0, fy, fyy) = self.by.eval(&g0, y);
        let (fx, fxy, _) = self.by.eval(&g1, y);
        let (fxx, _, _) = self.by.eval(&g2, y);
        Jet2 { f: f0, fx, fy, fxx, fxy, fyy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_pattern_degree_four() {
        let w = fh_weights_uniform(11, 4).unwrap();
        let mag: Vec<f64> = w.iter().map(|v| v.abs()).collect();
        assert_eq!(mag, vec![1., 5., 11., 15., 16., 16., 16., 15., 11., 5., 1.]);
        for (i, v) in w.iter().enumerate() {
            assert_eq!(v.signum(), if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(fh_weights_uniform(4, 4).is_err());
    }

    #[test]
    fn reproduces_quartics_with_derivatives() {
        let n = 9;
        let x: Vec<f64> = (0..n).map(|i| 0.3 + 0.17 * i as f64).collect();
        let b = Bary1D::uniform(x.clone(), 4).unwrap();
        let p = |t: f64| 2.0 - t + 0.5 * t.powi(2) - 0.25 * t.powi(3) + 0.0625 * t.powi(4);
        let p1 = |t: f64| -1.0 + t - 0.75 * t.powi(2) + 0.25 * t.powi(3);
        let p2 = |t: f64| 1.0 - 1.5 * t + 0.75 * t.powi(2);
        let f: Vec<f64> = x.iter().map(|&t| p(t)).collect();
        for &t in &[0.31, 0.77, 1.0001, 1.6, x[0], x[4] + 1e-12] {
            let (r, r1, r2) = b.eval(&f, t);
            assert_relative_eq!(r, p(t), epsilon = 1e-9, max_relative = 1e-9);
            assert_relative_eq!(r1, p1(t), epsilon = 1e-8, max_relative = 1e-8);
            assert_relative_eq!(r2, p2(t), epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn tensor_product_jet_is_exact_for_biquartics() {
        let x: Vec<f64> = (0..6).map(|i| 1.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = (0..6).map(|j| -0.2 + 0.15 * j as f64).collect();
        let b = Bary2D::uniform(x.clone(), y.clone(), 4).unwrap();
        // Separable polynomial, degree 4 in each variable.
        let p = |u: f64, v: f64| (u.powi(4) - 2.0 * u.powi(2) + u) * (1.0 + v.powi(3) - v.powi(4));
        let px = |u: f64, v: f64| (4.0 * u.powi(3) - 4.0 * u + 1.0) * (1.0 + v.powi(3) - v.powi(4));
        let py = |u: f64, v: f64| (u.powi(4) - 2.0 * u.powi(2) + u) * (3.0 * v.powi(2) - 4.0 * v.powi(3));
        let pxx = |u: f64, v: f64| (12.0 * u.powi(2) - 4.0) * (1.0 + v.powi(3) - v.powi(4));
        let pxy = |u: f64, v: f64| (4.0 * u.powi(3) - 4.0 * u + 1.0) * (3.0 * v.powi(2) - 4.0 * v.powi(3));
        let pyy = |u: f64, v: f64| (u.powi(4) - 2.0 * u.powi(2) + u) * (6.0 * v - 12.0 * v.powi(2));
        let mut f = vec![0.0; 36];
        for j in 0..6 {
            for i in 0..6 {
                f[j * 6 + i] = p(x[i], y[j]);
            }
        }
        let (u, v) = (1.234, 0.271);
        let jet = b.eval(&f, u, v);
        assert_relative_eq!(jet.f, p(u, v), max_relative = 1e-10);
        assert_relative_eq!(jet.fx, px(u, v), max_relative = 1e-9);
        assert_relative_eq!(jet.fy, py(u, v), max_relative = 1e-9);
        assert_relative_eq!(jet.fxx, pxx(u, v), max_relative = 1e-7);
        assert_relative_eq!(jet.fxy, pxy(u, v), max_relative = 1e-7);
        assert_relative_eq!(jet.fyy, pyy(u, v), max_relative = 1e-7);
    }

    #[test]
    fn near_node_evaluation_is_stable() {
        let x: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let b = Bary1D::uniform(x.clone(), 4).unwrap();
        let f: Vec<f64> = x.iter().map(|&t| (0.5 * t).sin()).collect();
        for &t in &[3.0, 3.0 + 1e-15, 3.0 - 1e-12, 0.0, 6.0] {
            let (r, r1, r2) = b.eval(&f, t);
            assert!(r.is_finite() && r1.is_finite() && r2.is_finite());
            assert_relative_eq!(r, (0.5 * t).sin(), epsilon = 1e-6);
        }
    }
}
