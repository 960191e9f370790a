//! External poloidal-field conductors and their flux contributions.
//!
//! A coil is either a point loop or a solenoid (a loop stack with a
//! vertical extent). The stored current is the per-turn current; the flux
//! a coil induces scales with ampere-turns = turns * current and, from
//! the sign convention of the operator's fundamental solution, enters the
//! poloidal flux as -mu0 G per ampere-turn.

use crate::error::{GsError, Result};
use crate::geometry::BoundaryPolygon;
use crate::greens::greens_function;
use crate::MU0;

#[derive(Debug, Clone, PartialEq)]
pub enum CoilKind {
    Point { r: f64, z: f64 },
    Solenoid { r: f64, z_min: f64, z_max: f64 },
}

#[derive(Debug, Clone)]
pub struct Coil {
    pub name: String,
    pub kind: CoilKind,
    /// Number of windings; fractional values are allowed (they encode an
    /// effective winding count).
    pub turns: f64,
    /// Per-turn current, A.
    pub current: f64,
}

impl Coil {
    pub fn point(name: &str, r: f64, z: f64, turns: f64) -> Self {
        Coil { name: name.into(), kind: CoilKind::Point { r, z }, turns, current: 0.0 }
    }

    pub fn solenoid(name: &str, r: f64, z_min: f64, z_max: f64, turns: f64) -> Self {
        Coil {
            name: name.into(),
            kind: CoilKind::Solenoid { r, z_min, z_max },
            turns,
            current: 0.0,
        }
    }
}

/// The machine's conductor set with a fixed solenoid subdivision rule.
#[derive(Debug, Clone)]
pub struct CoilSet {
    pub coils: Vec<Coil>,
    /// Solenoids are stacked as this many equal sub-loops; 20 is enough
    /// for ~1e-4 relative flux accuracy at wall distance (see tests).
    pub n_sub: usize,
}

pub const DEFAULT_SOLENOID_SUBDIVISION: usize = 20;

impl CoilSet {
    pub fn new(coils: Vec<Coil>) -> Result<Self> {
        let set = CoilSet { coils, n_sub: DEFAULT_SOLENOID_SUBDIVISION };
        set.validate()?;
        Ok(set)
    }

    pub fn with_subdivision(mut self, n_sub: usize) -> Result<Self> {
        if n_sub == 0 {
            return Err(GsError::Config("solenoid subdivision must be positive".into()));
        }
        self.n_sub = n_sub;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        for c in &self.coils {
            let r = match c.kind {
                CoilKind::Point { r, .. } => r,
                CoilKind::Solenoid { r, z_min, z_max } => {
                    if !(z_min < z_max) {
                        return Err(GsError::Config(format!(
                            "coil {}: solenoid needs z_min < z_max, got ({z_min}, {z_max})",
                            c.name
                        )));
                    }
                    r
                }
            };
            if !(r > 0.0) {
                return Err(GsError::Config(format!("coil {}: R must be positive", c.name)));
            }
            if !(c.turns > 0.0) {
                return Err(GsError::Config(format!("coil {}: turns must be positive", c.name)));
            }
        }
        Ok(())
    }

    /// An ITER-like poloidal-field set: six ring coils and a five-segment
    /// central solenoid.
    pub fn iter_like() -> Self {
        let coils = vec![
            Coil::point("PF1", 3.9431, 7.5741, 248.6),
            Coil::point("PF2", 8.2851, 6.5398, 115.2),
            Coil::point("PF3", 11.9919, 3.2752, 185.9),
            Coil::point("PF4", 11.9630, -2.2336, 169.9),
            Coil::point("PF5", 8.3908, -6.7269, 216.8),
            Coil::point("PF6", 4.3340, -7.4665, 459.4),
            Coil::solenoid("CS1", 1.696, -5.415, -3.6067, 553.0),
            Coil::solenoid("CS2", 1.696, -3.6067, -1.7983, 553.0),
            Coil::solenoid("CS3", 1.696, -1.7983, 1.8183, 1106.0),
            Coil::solenoid("CS4", 1.696, 1.8183, 3.6267, 553.0),
            Coil::solenoid("CS5", 1.696, 3.6267, 5.435, 553.0),
        ];
        CoilSet { coils, n_sub: DEFAULT_SOLENOID_SUBDIVISION }
    }

    pub fn len(&self) -> usize {
        self.coils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coils.is_empty()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.coils.iter().map(|c| c.current).collect()
    }

    pub fn set_currents(&mut self, currents: &[f64]) -> Result<()> {
        if currents.len() != self.coils.len() {
            return Err(GsError::Config(format!(
                "{} currents for {} coils",
                currents.len(),
                self.coils.len()
            )));
        }
        for (c, &i) in self.coils.iter_mut().zip(currents) {
            c.current = i;
        }
        Ok(())
    }

    /// Sub-loops of coil `i` as (R, Z, effective turns): a point coil is
    /// itself, a solenoid becomes `n_sub` equally spaced loops each
    /// carrying turns / n_sub.
    pub fn subcoils(&self, i: usize) -> Vec<(f64, f64, f64)> {
        let c = &self.coils[i];
        match c.kind {
            CoilKind::Point { r, z } => vec![(r, z, c.turns)],
            CoilKind::Solenoid { r, z_min, z_max } => {
                let dz = (z_max - z_min) / self.n_sub as f64;
                (0..self.n_sub)
                    .map(|k| (r, z_min + (k as f64 + 0.5) * dz, c.turns / self.n_sub as f64))
                    .collect()
            }
        }
    }

    /// Poloidal flux at `p` per unit per-turn current in coil `i`:
    /// -mu0 * sum over sub-loops of G * turns.
    pub fn flux_per_unit_current(&self, i: usize, p: [f64; 2]) -> Result<f64> {
        let mut g_sum = 0.0;
        for (r, z, t) in self.subcoils(i) {
            g_sum += t * greens_function(r, z, p[0], p[1])?;
        }
        Ok(-MU0 * g_sum)
    }

    /// Total coil-induced poloidal flux at `p` for the stored currents.
    pub fn coil_flux(&self, p: [f64; 2]) -> Result<f64> {
        let mut psi = 0.0;
        for i in 0..self.coils.len() {
            psi += self.coils[i].current * self.flux_per_unit_current(i, p)?;
        }
        Ok(psi)
    }

    /// Every conductor must sit strictly outside the computational domain;
    /// a coil inside it would make the vacuum-field split meaningless.
    pub fn validate_outside(&self, wall: &BoundaryPolygon) -> Result<()> {
        for i in 0..self.coils.len() {
            for (r, z, _) in self.subcoils(i) {
                if wall.signed_distance([r, z]) <= 0.0 {
                    return Err(GsError::Config(format!(
                        "coil {} intersects the computational domain at ({r}, {z})",
                        self.coils[i].name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn zero_currents_induce_zero_flux() {
        let coils = CoilSet::iter_like();
        assert_eq!(coils.len(), 11);
        assert_abs_diff_eq!(coils.coil_flux([6.2, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn flux_is_linear_in_the_current() {
        let mut coils = CoilSet::new(vec![Coil::point("PF1", 3.9431, 7.5741, 248.6)]).unwrap();
        coils.set_currents(&[1.0e4]).unwrap();
        let f1 = coils.coil_flux([6.2, 0.0]).unwrap();
        coils.set_currents(&[2.0e4]).unwrap();
        let f2 = coils.coil_flux([6.2, 0.0]).unwrap();
        assert_eq!(f2, 2.0 * f1);

        // One ampere-turn at machine distance: -mu0 G with G ~ 0.14 for
        // this pair, fixed by the Green's function reference values.
        let per_turn = f1 / (1.0e4 * 248.6);
        assert_relative_eq!(per_turn, -MU0 * 0.140_347_616_787_470_48, max_relative = 1e-12);
    }

    #[test]
    fn solenoid_subdivision_is_converged() {
        let cs3 = |n_sub: usize| {
            let set = CoilSet::new(vec![Coil::solenoid("CS3", 1.696, -1.7983, 1.8183, 1106.0)])
                .unwrap()
                .with_subdivision(n_sub)
                .unwrap();
            set.flux_per_unit_current(0, [6.2, 0.5]).unwrap()
        };
        let f20 = cs3(20);
        let f40 = cs3(40);
        assert!(
            ((f20 - f40) / f40).abs() < 1e-4,
            "subdivision 20 vs 40: {f20:.8e} vs {f40:.8e}"
        );
    }

    #[test]
    fn constructor_rejects_bad_coils() {
        assert!(CoilSet::new(vec![Coil::point("a", -1.0, 0.0, 10.0)]).is_err());
        assert!(CoilSet::new(vec![Coil::point("b", 1.0, 0.0, 0.0)]).is_err());
        assert!(CoilSet::new(vec![Coil::solenoid("c", 1.0, 2.0, 1.0, 10.0)]).is_err());
        assert!(CoilSet::new(vec![Coil::point("d", f64::NAN, 0.0, 10.0)]).is_err());
    }

    #[test]
    fn coils_inside_the_wall_are_rejected() {
        let wall = BoundaryPolygon::rectangle(4.0, 8.0, -2.0, 2.0).unwrap();
        let outside = CoilSet::new(vec![Coil::point("ok", 9.0, 0.0, 10.0)]).unwrap();
        assert!(outside.validate_outside(&wall).is_ok());
        let inside = CoilSet::new(vec![Coil::point("bad", 6.0, 0.0, 10.0)]).unwrap();
        assert!(inside.validate_outside(&wall).is_err());
        // A solenoid crossing the wall is caught through its sub-loops.
        let crossing =
            CoilSet::new(vec![Coil::solenoid("span", 6.0, 1.0, 5.0, 10.0)]).unwrap();
        assert!(crossing.validate_outside(&wall).is_err());
    }
}
