//! Skeleton assembly and template-to-skeleton registration producing the
//! complete dynamic volumes.

pub mod bspline;
pub mod pse;
mod register;
mod skeleton;

pub use pse::{pse_cost, pse_evaluate, PointIndex, PseEvaluation, TRUNCATION};
pub use register::{
    reconstruct_series, register_partial, warp_template, LevelTrace, ReconstructionParams, ReconstructionResult,
};
pub use skeleton::{align_com, build_skeleton, skeleton_from_masks, Skeleton, StaticTemplate};
