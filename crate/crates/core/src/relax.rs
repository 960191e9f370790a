//! Adaptive under-relaxation for Picard iterations.
//!
//! The fixed-point updates in this crate are damped as
//! `psi <- psi - alpha * d` where `d = psi - psi_tilde` is the unrelaxed
//! increment of one Picard sweep. A constant `alpha` works but the optimal
//! value is problem-dependent; Aitken's method estimates it on the fly from
//! two successive increments, which is what [`aitken_step`] implements. The
//! estimated parameter `lambda` (with `alpha = 1 - lambda`) is clamped to a
//! configured range so a noisy update can never reverse or freeze the
//! iteration.

use log::debug;

#[derive(Debug, Clone, Copy)]
pub struct AitkenOptions {
    /// λ used before any increment pair is available.
    pub lambda_init: f64,
    /// Lower clamp for λ (0 keeps plain Picard reachable).
    pub lambda_min: f64,
    /// Upper clamp for λ; must stay below 1 or the iteration stalls.
    pub lambda_max: f64,
}

impl Default for AitkenOptions {
    fn default() -> Self {
        Self {
            lambda_init: 0.3,
            lambda_min: 0.0,
            lambda_max: 0.95,
        }
    }
}

impl AitkenOptions {
    /// Narrower clamp range that damps the oscillations seen on
    /// limiter-bounded equilibria.
    pub fn conservative() -> Self {
        Self {
            lambda_max: 0.7,
            ..Self::default()
        }
    }
}

/// One Aitken update.
///
/// `d_prev` and `d_curr` are the unrelaxed increments of two successive
/// sweeps. The new parameter is
///
/// ```text
/// lambda = lambda_prev + (lambda_prev - 1) * ((d_prev - d_curr) . d_curr)
///                                          / |d_prev - d_curr|^2
/// ```
///
/// clamped to the configured range; the relaxation factor is
/// `alpha = 1 - lambda`. A vanishing denominator (stationary increments)
/// keeps the previous parameter.
pub fn aitken_step(
    d_prev: &[f64],
    d_curr: &[f64],
    lambda_prev: f64,
    opts: &AitkenOptions,
) -> (f64, f64) {
    debug_assert_eq!(d_prev.len(), d_curr.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, c) in d_prev.iter().zip(d_curr) {
        let diff = p - c;
        num += diff * c;
        den += diff * diff;
    }
    let lambda = if den > 0.0 {
        lambda_prev + (lambda_prev - 1.0) * num / den
    } else {
        debug!("aitken: stationary increments, keeping lambda = {lambda_prev}");
        lambda_prev
    };
    let lambda = lambda.clamp(opts.lambda_min, opts.lambda_max);
    (lambda, 1.0 - lambda)
}

/// Stateful wrapper around [`aitken_step`] for use inside an iteration loop.
///
/// Feed each unrelaxed increment to [`Aitken::step`] and apply the returned
/// factor. The first call has no increment pair yet and uses the preset λ.
#[derive(Debug, Clone)]
pub struct Aitken {
    opts: AitkenOptions,
    lambda: f64,
    d_prev: Option<Vec<f64>>,
}

impl Aitken {
    pub fn new(opts: AitkenOptions) -> Self {
        let lambda = opts.lambda_init.clamp(opts.lambda_min, opts.lambda_max);
        Self {
            opts,
            lambda,
            d_prev: None,
        }
    }

    /// Drop accumulated state; the next step starts from the preset λ again.
    pub fn reset(&mut self) {
        self.lambda = self.opts.lambda_init.clamp(self.opts.lambda_min, self.opts.lambda_max);
        self.d_prev = None;
    }

    /// Record the next increment and return the factor α for
    /// `psi <- psi - alpha * d`.
    pub fn step(&mut self, d: &[f64]) -> f64 {
        let alpha = match &self.d_prev {
            Some(prev) => {
                let (lambda, alpha) = aitken_step(prev, d, self.lambda, &self.opts);
                self.lambda = lambda;
                alpha
            }
            None => 1.0 - self.lambda,
        };
        self.d_prev = Some(d.to_vec());
        alpha
    }

    /// Current (clamped) relaxation parameter.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}
