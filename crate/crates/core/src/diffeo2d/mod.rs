//! Diffeomorphic 2D registration between slices and propagation of sparse
//! manual segmentations along each plane's time series.

pub mod field;
mod propagate;
mod register;

pub use field::Field2D;
pub use propagate::{
    fusion_weight, manual_indices, propagate_backward, propagate_forward, propagate_plane, MaskSource,
    PropagatedPlane, PropagationDiagnostics, PropagationParams, CONSISTENCY_MARGIN,
};
pub use register::{mask_image, register_2d, register_masks, ssd, Diffeo2D, RegistrationParams};
