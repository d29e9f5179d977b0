use super::{GridSpec, LabelVolume, Mask2D, PlaneFrame, VolumeGrid};
use crate::{Error, Point3, Result};

/// Sub-samples per voxel edge used to estimate partial-volume overlap.
const SUPERSAMPLE: f64 = 3.0;

/// Voxelise a posed 2D mask into a world grid.
///
/// Each foreground pixel deposits its physical slab (in-plane footprint times
/// slice thickness) into the voxels it overlaps; voxels whose covered
/// fraction reaches 0.5 are labelled 1. A plane that misses the grid
/// entirely yields an empty volume and a warning.
pub fn resample_plane_to_world(frame: &PlaneFrame, mask: &Mask2D, target: &GridSpec) -> LabelVolume {
    let mut out = LabelVolume::filled(target.clone(), 0);
    if mask.dims() != frame.dims {
        log::warn!(
            "mask {:?} does not match plane dims {:?}; nothing voxelised",
            mask.dims(),
            frame.dims
        );
        return out;
    }
    if !frame.overlaps_grid(target) {
        log::warn!("plane centred at {:?} lies outside the target grid", frame.center());
        return out;
    }
    let [su, sv] = frame.spacing;
    let th = frame.thickness;
    let nu = (SUPERSAMPLE * su / target.spacing).ceil().max(1.0) as usize;
    let nv = (SUPERSAMPLE * sv / target.spacing).ceil().max(1.0) as usize;
    let nw = (SUPERSAMPLE * th / target.spacing).ceil().max(1.0) as usize;
    let weight = (su * sv * th) / (nu * nv * nw) as f64 / target.voxel_volume();

    let rot = frame.rotation();
    let du = rot.column(0) * (su / nu as f64);
    let dv = rot.column(1) * (sv / nv as f64);
    let dw = rot.column(2) * (th / nw as f64);

    let mut acc = vec![0.0f64; target.len()];
    for j in 0..mask.height() {
        for i in 0..mask.width() {
            if !*mask.get(i, j) {
                continue;
            }
            // first sub-sample of the pixel slab
            let corner = frame.world_local(&Point3::new(
                (i as f64 - 0.5) * su,
                (j as f64 - 0.5) * sv,
                -0.5 * th,
            ));
            let start = corner + du * 0.5 + dv * 0.5 + dw * 0.5;
            for c in 0..nw {
                for b in 0..nv {
                    for a in 0..nu {
                        let p = start + du * a as f64 + dv * b as f64 + dw * c as f64;
                        if let Some([x, y, z]) = target.voxel_containing(&p) {
                            acc[target.index(x, y, z)] += weight;
                        }
                    }
                }
            }
        }
    }
    for (o, a) in out.data_mut().iter_mut().zip(acc) {
        *o = (a >= 0.5 - 1e-9) as u8;
    }
    out
}

/// Voxelwise logical OR of label volumes sharing one grid.
pub fn union_labels(volumes: &[&LabelVolume]) -> Result<LabelVolume> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::EmptyShape("union of zero volumes".into()))?;
    let mut out = VolumeGrid::filled(first.spec().clone(), 0u8);
    for v in volumes {
        if !v.spec().same_as(first.spec()) {
            return Err(Error::GridMismatch(format!(
                "cannot union {:?} with {:?}",
                v.spec(),
                first.spec()
            )));
        }
        for (o, &x) in out.data_mut().iter_mut().zip(v.data()) {
            *o |= (x != 0) as u8;
        }
    }
    Ok(out)
}
