//! Partial-volume skeletons assembled from simultaneous plane masks, and
//! the static template they are matched against.

use crate::temporal::{valid_band, MaskMatrix};
use crate::volumes::{resample_plane_to_world, subpixel_boundary, subvoxel_boundary, union_labels, GridSpec, LabelVolume, Mask2D, PlaneFrame, ScalarVolume};
use crate::{Error, Point3, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub t_idx: usize,
    pub labels: LabelVolume,
    /// World positions of the in-plane contour pixels of every plane mask.
    pub contour: Vec<Point3>,
}

/// Union of the voxelised masks of one instant, with their contours.
pub fn skeleton_from_masks(
    t_idx: usize,
    frames: &[PlaneFrame],
    masks: &[&Mask2D],
    space: &GridSpec,
) -> Result<Skeleton> {
    if frames.len() != masks.len() || frames.is_empty() {
        return Err(Error::IncompleteSeries(format!(
            "{} masks for {} planes at instant {t_idx}",
            masks.len(),
            frames.len()
        )));
    }
    let slabs: Vec<LabelVolume> = frames
        .iter()
        .zip(masks)
        .map(|(f, m)| resample_plane_to_world(f, m, space))
        .collect();
    let labels = union_labels(&slabs.iter().collect::<Vec<_>>())?;
    let mut contour = Vec::new();
    for (f, m) in frames.iter().zip(masks) {
        contour.extend(subpixel_boundary(m).into_iter().map(|[i, j]| f.world(i, j)));
    }
    Ok(Skeleton { t_idx, labels, contour })
}

/// Skeleton at instant `t_idx` from a filled mask matrix.
pub fn build_skeleton(a: &MaskMatrix, t_idx: usize, frames: &[PlaneFrame], space: &GridSpec) -> Result<Skeleton> {
    let (lo, hi) = valid_band(a.n_planes, a.n_cycles);
    if t_idx < lo || t_idx > hi {
        return Err(Error::OutOfBand { t_idx, lo, hi });
    }
    let masks = (0..a.n_planes)
        .map(|p| {
            a.mask(t_idx, p)
                .ok_or_else(|| Error::IncompleteSeries(format!("no mask for plane {p} at instant {t_idx}")))
        })
        .collect::<Result<Vec<_>>>()?;
    skeleton_from_masks(t_idx, frames, &masks, space)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticTemplate {
    pub labels: LabelVolume,
    /// Boundary voxel centres.
    pub contour: Vec<Point3>,
    pub(crate) indicator: ScalarVolume,
}

impl StaticTemplate {
    pub fn new(labels: LabelVolume) -> Result<Self> {
        if labels.count() == 0 {
            return Err(Error::EmptyShape("static template has no voxels".into()));
        }
        let contour = subvoxel_boundary(&labels);
        let indicator = labels.to_scalar();
        Ok(Self {
            labels,
            contour,
            indicator,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.labels.spec()
    }

    /// Label of the template at an arbitrary template-space point.
    pub fn occupancy(&self, p: &Point3) -> f64 {
        self.indicator.sample(p)
    }
}

/// Translation taking the template's centre of mass onto the skeleton's.
pub fn align_com(template: &StaticTemplate, skeleton: &Skeleton) -> Result<Point3> {
    Ok(skeleton.labels.center_of_mass()? - template.labels.center_of_mass()?)
}
