//! Time-resolved 3D reconstruction of a deforming closed organ from sparse,
//! temporally interleaved 2D slice segmentations.
//!
//! The crate is organised along the processing chain:
//!
//! - [`volumes`]: isotropic grids, posed planes, masks, signed distances and
//!   plane-to-world resampling.
//! - [`phantom`]: an analytic, volume-preserving deforming ellipsoid used as
//!   ground truth.
//! - [`acquisition`]: the Star / Grid / Lines plane geometries and their
//!   interleaved acquisition schedule.
//! - [`diffeo2d`]: stationary-velocity 2D registration and fused
//!   forward/backward propagation of sparse manual masks.
//! - [`temporal`]: the `(t, p)` mask matrix, geodesic gap filling and the
//!   secant-plane discrepancy.
//! - [`recon3d`]: skeleton assembly and point-set driven B-spline
//!   registration of the static template.
//! - [`characterize`]: Jacobian maps, their temporal standard deviation and
//!   surface projection.
//! - [`metrics`], [`config`], [`pipeline`]: evaluation, configuration and the
//!   end-to-end orchestration.

pub mod acquisition;
pub mod characterize;
pub mod config;
pub mod diffeo2d;
mod error;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod recon3d;
pub mod temporal;
pub mod volumes;

pub use error::{Error, Result};

/// World-space point or vector in millimetres.
pub type Point3 = nalgebra::Vector3<f64>;
