//! Wall geometry: polygon, signed level set, and the cut-cell mesh.

pub mod cutcell;
pub mod level_set;
pub mod polygon;

pub use cutcell::{build_cut_cell_mesh, CellClass, CutCellMesh, Facet, LAMBDA_PRUNE};
pub use level_set::{build_level_set, LevelSet};
pub use polygon::BoundaryPolygon;
