//! Boundary points placed on the half level of the Gaussian-smoothed
//! indicator, one per boundary pixel or voxel.
//!
//! Each boundary sample starts at its pixel (voxel) centre and takes one
//! Newton step towards the 0.5 level. The step is clamped to the sample's own
//! cell, so the points stay on the boundary pixels while losing most of the
//! staircase.

use super::filter::{smooth_raster, smooth_volume};
use super::{LabelVolume, Mask2D};
use crate::Point3;

/// Smoothing of the indicator, in pixels (voxels).
pub const CONTOUR_SIGMA: f64 = 1.5;

fn newton_offset(f: f64, grad: &[f64]) -> Vec<f64> {
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    if g2 < 1e-12 {
        return vec![0.0; grad.len()];
    }
    grad.iter().map(|g| (-(f - 0.5) * g / g2).clamp(-0.5, 0.5)).collect()
}

fn central(get: impl Fn(isize) -> f64, c: usize, n: usize) -> f64 {
    let lo = if c == 0 { 0 } else { -1 };
    let hi = if c + 1 == n { 0 } else { 1 };
    if hi == lo {
        return 0.0;
    }
    (get(hi) - get(lo)) / (hi - lo) as f64
}

/// Fractional pixel coordinates of the refined contour of `mask`.
pub fn subpixel_boundary(mask: &Mask2D) -> Vec<[f64; 2]> {
    let (w, h) = (mask.width(), mask.height());
    let f = smooth_raster(&mask.map(|&b| if b { 1.0 } else { 0.0 }), CONTOUR_SIGMA);
    let at = |i: usize, j: usize, di: isize, dj: isize| *f.get((i as isize + di) as usize, (j as isize + dj) as usize);
    mask.boundary_pixels()
        .into_iter()
        .map(|(i, j)| {
            let g = [
                central(|d| at(i, j, d, 0), i, w),
                central(|d| at(i, j, 0, d), j, h),
            ];
            let o = newton_offset(*f.get(i, j), &g);
            [i as f64 + o[0], j as f64 + o[1]]
        })
        .collect()
}

/// World positions of the refined boundary of `labels`.
pub fn subvoxel_boundary(labels: &LabelVolume) -> Vec<Point3> {
    let spec = labels.spec();
    let [nx, ny, nz] = spec.dims;
    let f = smooth_volume(&labels.to_scalar(), CONTOUR_SIGMA);
    let d = f.data();
    labels
        .boundary_indices()
        .into_iter()
        .map(|idx| {
            let [i, j, k] = spec.coords(idx);
            let strides = [1isize, nx as isize, (nx * ny) as isize];
            let g: Vec<f64> = [(i, nx), (j, ny), (k, nz)]
                .iter()
                .zip(strides)
                .map(|(&(c, n), s)| central(|o| d[(idx as isize + o * s) as usize], c, n))
                .collect();
            let o = newton_offset(d[idx], &g);
            spec.world_of_index(idx) + Point3::new(o[0], o[1], o[2]) * spec.spacing
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::GridSpec;

    #[test]
    fn disk_contour_is_closer_to_the_circle() {
        let (cx, cy, r) = (20.3, 19.6, 11.4);
        let m = Mask2D::from_fn(41, 41, |i, j| (i as f64 - cx).hypot(j as f64 - cy) <= r);
        let err = |pts: &[[f64; 2]]| {
            pts.iter().map(|p| ((p[0] - cx).hypot(p[1] - cy) - r).abs()).sum::<f64>() / pts.len() as f64
        };
        let raw: Vec<[f64; 2]> = m.boundary_pixels().iter().map(|&(i, j)| [i as f64, j as f64]).collect();
        let refined = subpixel_boundary(&m);
        assert_eq!(refined.len(), raw.len());
        assert!(err(&refined) < 0.5 * err(&raw), "{} vs {}", err(&refined), err(&raw));
        for (a, b) in refined.iter().zip(&raw) {
            assert!((a[0] - b[0]).abs() <= 0.5 && (a[1] - b[1]).abs() <= 0.5);
        }
    }

    #[test]
    fn ball_contour_is_closer_to_the_sphere() {
        let g = GridSpec::centered([40, 40, 40], 1.0, [0.0; 3]).unwrap();
        let c = Point3::new(0.3, -0.2, 0.1);
        let r = 12.3;
        let labels = LabelVolume::from_fn(g, |_, p| ((p - c).norm() <= r) as u8);
        let err = |pts: &[Point3]| pts.iter().map(|p| ((p - c).norm() - r).abs()).sum::<f64>() / pts.len() as f64;
        let raw = labels.boundary_points();
        let refined = subvoxel_boundary(&labels);
        assert!(err(&refined) < 0.5 * err(&raw), "{} vs {}", err(&refined), err(&raw));
    }
}
