//! Geometric substrate: isotropic volumes, posed planes, binary masks,
//! signed distance fields and resampling between plane and world space.

mod contour;
mod edt;
pub mod filter;
mod grid;
mod plane;
mod raster;
mod resample;

pub use contour::{subpixel_boundary, subvoxel_boundary, CONTOUR_SIGMA};
pub use edt::{mask_to_sdf, sdf_to_mask, squared_edt, volume_to_sdf};
pub(crate) use grid::trilinear;
pub use grid::{GridSpec, LabelVolume, ScalarVolume, VectorVolume, VolumeGrid};
pub use plane::PlaneFrame;
pub use raster::{Image2D, Mask2D, Raster};
pub use resample::{resample_plane_to_world, union_labels};
