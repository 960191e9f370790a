//! Free-boundary Grad-Shafranov equilibrium solver on embedded-boundary
//! Cartesian meshes.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`], [`geometry`]: Cartesian mesh, wall polygon, cut cells;
//! * [`elliptic`]: conservative discretization of the Grad-Shafranov
//!   operator and the sparse linear solver;
//! * [`greens`], [`boundary`], [`coils`]: toroidal Green's function,
//!   von Hagenow boundary evaluation, external conductors;
//! * [`critical`], [`source`]: magnetic axis / X-point search and the
//!   plasma current source;
//! * [`optimizer`], [`driver`]: coil-current fit and the nested
//!   free-boundary iteration;
//! * [`manufactured`]: exact solutions used by the verification tests.

// House style for the numerical kernels: indexed loops over several arrays
// with a shared index are clearer than zipped iterators in stencil code, and
// negated comparisons (`!(x > 0.0)`) are used on purpose so that NaN fails
// validation.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod coils;
pub mod critical;
pub mod driver;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod grid;
pub mod interp;
pub mod manufactured;
pub mod optimizer;
pub mod profiles;
pub mod relax;

pub use error::{GsError, Result};

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
