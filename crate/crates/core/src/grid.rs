//! Uniform Cartesian grid in the poloidal (R, Z) plane.
//!
//! Grid *points* carry the unknowns. Around each point (i, j) sits a
//! rectangular control cell of size dr x dz, so cell corners live at the
//! half-index positions (i +/- 1/2, j +/- 1/2). A grid with nr x nz points
//! therefore has (nr + 1) x (nz + 1) distinct cell corners.

use crate::error::{GsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    /// Number of grid points along R (>= 4).
    pub nr: usize,
    /// Number of grid points along Z (>= 4).
    pub nz: usize,
    /// R coordinate of point (0, j).
    pub r0: f64,
    /// Z coordinate of point (i, 0).
    pub z0: f64,
    pub dr: f64,
    pub dz: f64,
}

impl CartesianGrid {
    /// Build a grid whose outermost points lie exactly on the given extents.
    pub fn from_extents(
        r_min: f64,
        r_max: f64,
        z_min: f64,
        z_max: f64,
        nr: usize,
        nz: usize,
    ) -> Result<Self> {
        if nr < 4 || nz < 4 {
            return Err(GsError::Config(format!(
                "grid needs at least 4x4 points, got {nr}x{nz}"
            )));
        }
        if !(r_max > r_min) || !(z_max > z_min) {
            return Err(GsError::Config(format!(
                "grid extents must be increasing: R [{r_min}, {r_max}], Z [{z_min}, {z_max}]"
            )));
        }
        let dr = (r_max - r_min) / (nr - 1) as f64;
        let dz = (z_max - z_min) / (nz - 1) as f64;
        // Cells extend half a spacing past the outer points; the whole cell
        // complex must stay at R > 0 for the 1/R metric factors.
        if r_min - 0.5 * dr <= 0.0 {
            return Err(GsError::Config(format!(
                "grid must stay at R > 0 including cell halos (r_min = {r_min}, dr = {dr})"
            )));
        }
        if !dr.is_finite() || !dz.is_finite() || dr <= 0.0 || dz <= 0.0 {
            return Err(GsError::Config("degenerate grid spacing".into()));
        }
        Ok(Self { nr, nz, r0: r_min, z0: z_min, dr, dz })
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.nr * self.nz
    }

    /// Flat index of point (i, j); R varies fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nr && j < self.nz);
        j * self.nr + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nr, idx / self.nr)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r0 + i as f64 * self.dr
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z0 + j as f64 * self.dz
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.r(i), self.z(j)]
    }

    /// Corner (ic, jc) of the cell complex, ic in 0..=nr, jc in 0..=nz.
    /// Corner (i, j) is the lower-left corner of cell (i, j).
    #[inline]
    pub fn corner(&self, ic: usize, jc: usize) -> [f64; 2] {
        [
            self.r0 + (ic as f64 - 0.5) * self.dr,
            self.z0 + (jc as f64 - 0.5) * self.dz,
        ]
    }

    #[inline]
    pub fn corner_idx(&self, ic: usize, jc: usize) -> usize {
        debug_assert!(ic <= self.nr && jc <= self.nz);
        jc * (self.nr + 1) + ic
    }

    /// Fractional cell coordinates of a physical point: returns (i, j, fx, fy)
    /// such that p lies in the bilinear patch spanned by points (i, j) and
    /// (i+1, j+1), with local coordinates (fx, fy) in [0, 1].
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        let x = (p[0] - self.r0) / self.dr;
        let y = (p[1] - self.z0) / self.dz;
        if x < 0.0 || y < 0.0 || x > (self.nr - 1) as f64 || y > (self.nz - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).min(self.nr - 2);
        let j = (y.floor() as usize).min(self.nz - 2);
        Some((i, j, x - i as f64, y - j as f64))
    }

    pub fn cell_area(&self) -> f64 {
        self.dr * self.dz
    }
}
