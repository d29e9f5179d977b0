//! Deformation analytics: Jacobian determinant maps, their temporal
//! standard deviation, and projection onto the template surface.

mod jacobian;
mod mesh;

pub use jacobian::{jacobian_map, mean_abs_deviation, sigma_j, SigmaAccumulator};
pub use mesh::{extract_mesh, largest_component, march, project_to_mesh, SurfaceMesh, ISO_LEVEL};
