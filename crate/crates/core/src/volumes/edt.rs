//! Exact Euclidean distance transform (lower envelope of parabolas, applied
//! separably per axis) and signed distance fields built on it.

use super::{LabelVolume, Mask2D, Raster, ScalarVolume, VolumeGrid};
use crate::{Error, Result};

/// Squared distance transform of a 1D sampled function with sample pitch `w`.
fn envelope_1d(f: &[f64], w: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let xq = q as f64 * w;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let xp = p as f64 * w;
                    let s = ((fq + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let xq = q as f64 * w;
        while k + 1 < v.len() && z[k + 1] < xq {
            k += 1;
        }
        let xp = v[k] as f64 * w;
        *o = (xq - xp) * (xq - xp) + f[v[k]];
    }
}

/// Squared Euclidean distance (in the units of `spacing`) from every cell to
/// the nearest `true` cell. `dims` lists axis lengths fastest-first. Cells
/// are `INFINITY` when no feature exists.
pub fn squared_edt(features: &[bool], dims: &[usize], spacing: &[f64]) -> Vec<f64> {
    assert_eq!(dims.len(), spacing.len());
    assert_eq!(features.len(), dims.iter().product::<usize>());
    let mut d: Vec<f64> = features
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut stride = 1usize;
    for (axis, &n) in dims.iter().enumerate() {
        let outer = features.len() / n;
        let mut line = vec![0.0; n];
        let mut res = vec![0.0; n];
        for o in 0..outer {
            // o enumerates all cells with this axis coordinate fixed to zero
            let lo = o % stride;
            let hi = o / stride;
            let base = lo + hi * stride * n;
            for q in 0..n {
                line[q] = d[base + q * stride];
            }
            envelope_1d(&line, spacing[axis], &mut res, &mut v, &mut z);
            for q in 0..n {
                d[base + q * stride] = res[q];
            }
        }
        stride *= n;
    }
    d
}

/// Signed distance on a grid padded by one background cell on every side so
/// that the region beyond the grid counts as outside.
fn signed_padded(inside: &[bool], dims: &[usize], spacing: &[f64]) -> Vec<f64> {
    let nd = dims.len();
    let pdims: Vec<usize> = dims.iter().map(|d| d + 2).collect();
    let plen: usize = pdims.iter().product();
    let mut fg = vec![false; plen];
    let mut coord = vec![0usize; nd];
    for (idx, &b) in inside.iter().enumerate() {
        let mut rem = idx;
        for a in 0..nd {
            coord[a] = rem % dims[a];
            rem /= dims[a];
        }
        let mut pidx = 0;
        let mut s = 1;
        for a in 0..nd {
            pidx += (coord[a] + 1) * s;
            s *= pdims[a];
        }
        fg[pidx] = b;
    }
    let bg: Vec<bool> = fg.iter().map(|&b| !b).collect();
    let to_fg = squared_edt(&fg, &pdims, spacing);
    let to_bg = squared_edt(&bg, &pdims, spacing);
    let mut out = Vec::with_capacity(inside.len());
    for idx in 0..inside.len() {
        let mut rem = idx;
        let mut pidx = 0;
        let mut s = 1;
        for a in 0..nd {
            pidx += (rem % dims[a] + 1) * s;
            rem /= dims[a];
            s *= pdims[a];
        }
        out.push(if fg[pidx] {
            -to_bg[pidx].sqrt()
        } else {
            to_fg[pidx].sqrt()
        });
    }
    out
}

/// Signed Euclidean distance (mm, negative inside) of a 2D mask.
///
/// Inside pixels carry minus the distance to the nearest background pixel
/// centre, outside pixels the distance to the nearest foreground pixel
/// centre, so `sdf <= 0` reproduces the mask exactly.
pub fn mask_to_sdf(mask: &Mask2D, spacing: [f64; 2]) -> Result<Raster<f64>> {
    if mask.count() == 0 {
        return Err(Error::EmptyShape("signed distance of an empty mask".into()));
    }
    let data = signed_padded(mask.data(), &[mask.width(), mask.height()], &spacing);
    Raster::from_vec(mask.width(), mask.height(), data)
}

/// Signed Euclidean distance (mm, negative inside) of a 3D label volume.
pub fn volume_to_sdf(labels: &LabelVolume) -> Result<ScalarVolume> {
    if labels.count() == 0 {
        return Err(Error::EmptyShape("signed distance of an empty label volume".into()));
    }
    let inside: Vec<bool> = labels.data().iter().map(|&v| v != 0).collect();
    let s = labels.spec().spacing;
    let data = signed_padded(&inside, &labels.spec().dims, &[s, s, s]);
    VolumeGrid::from_vec(labels.spec().clone(), data)
}

pub fn sdf_to_mask(sdf: &Raster<f64>) -> Mask2D {
    sdf.map(|&v| v <= 0.0)
}
