//! Surface finite elements for tangential Stokes flow on closed level-set
//! surfaces, discretized through an elliptic reformulation that needs no
//! inf-sup compatibility between velocity and pressure spaces.

pub mod ad;
pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod solver;
pub mod sparse;
pub mod study;
pub mod vtk;

pub use error::{Error, Result};
pub use geometry::LevelSetSurface;
pub use mesh::{build_mesh, SurfaceMesh};
