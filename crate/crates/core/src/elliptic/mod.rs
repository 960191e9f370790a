//! Discretization and linear algebra for the Grad-Shafranov operator.

pub mod csr;
pub mod op;
pub mod solve;

pub use csr::{CsrBuilder, CsrMatrix};
pub use op::{assemble, FacetStencil, Operator};
pub use solve::{solve, Ilu0, SolveOptions, SolveStats};
