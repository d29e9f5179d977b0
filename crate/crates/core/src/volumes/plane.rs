use nalgebra::Matrix3;

use super::GridSpec;
use crate::{Error, Point3, Result};

/// Oriented 2D slice grid with a rigid pose in world space.
///
/// Pixel `(i, j)` has plane-local coordinates `(i * su, j * sv, 0)`; the pose
/// maps them to world mm as `rotation * local + translation`. The columns of
/// `rotation` are the world directions of the u axis, the v axis and the
/// plane normal.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneFrame {
    pub dims: [usize; 2],
    pub spacing: [f64; 2],
    pub thickness: f64,
    rotation: Matrix3<f64>,
    translation: Point3,
}

impl PlaneFrame {
    pub fn new(
        dims: [usize; 2],
        spacing: [f64; 2],
        thickness: f64,
        rotation: Matrix3<f64>,
        translation: Point3,
    ) -> Result<Self> {
        if dims[0] == 0 || dims[1] == 0 {
            return Err(Error::InvalidGeometry(format!("plane dims must be >= 1, got {dims:?}")));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0 && thickness > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "plane spacing {spacing:?} and thickness {thickness} must be > 0"
            )));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidGeometry(
                "plane rotation must be orthonormal with determinant +1".into(),
            ));
        }
        Ok(Self {
            dims,
            spacing,
            thickness,
            rotation,
            translation,
        })
    }

    /// Plane whose pixel grid is centred on `center`, with in-plane axes
    /// `u_axis` and `v_axis` (normalised here; they must be orthogonal).
    pub fn centered(
        center: Point3,
        u_axis: Point3,
        v_axis: Point3,
        dims: [usize; 2],
        spacing: [f64; 2],
        thickness: f64,
    ) -> Result<Self> {
        let u = u_axis.normalize();
        let v = v_axis.normalize();
        let n = u.cross(&v);
        let rotation = Matrix3::from_columns(&[u, v, n]);
        let half = Point3::new(
            0.5 * (dims[0] as f64 - 1.0) * spacing[0],
            0.5 * (dims[1] as f64 - 1.0) * spacing[1],
            0.0,
        );
        let translation = center - rotation * half;
        Self::new(dims, spacing, thickness, rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Point3 {
        &self.translation
    }

    pub fn u_axis(&self) -> Point3 {
        self.rotation.column(0).into()
    }

    pub fn v_axis(&self) -> Point3 {
        self.rotation.column(1).into()
    }

    pub fn normal(&self) -> Point3 {
        self.rotation.column(2).into()
    }

    /// World position of a (fractional) pixel coordinate.
    #[inline]
    pub fn world(&self, i: f64, j: f64) -> Point3 {
        self.world_local(&Point3::new(i * self.spacing[0], j * self.spacing[1], 0.0))
    }

    /// World position of plane-local millimetre coordinates `(u, v, w)`.
    #[inline]
    pub fn world_local(&self, local: &Point3) -> Point3 {
        self.rotation * local + self.translation
    }

    /// Plane-local millimetre coordinates `(u, v, w)` of a world point.
    #[inline]
    pub fn to_local(&self, p: &Point3) -> Point3 {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Fractional pixel coordinates and signed out-of-plane offset (mm).
    #[inline]
    pub fn to_pixel(&self, p: &Point3) -> (f64, f64, f64) {
        let l = self.to_local(p);
        (l.x / self.spacing[0], l.y / self.spacing[1], l.z)
    }

    pub fn center(&self) -> Point3 {
        self.world(
            0.5 * (self.dims[0] as f64 - 1.0),
            0.5 * (self.dims[1] as f64 - 1.0),
        )
    }

    /// True when the slab (pixel footprint x thickness) overlaps the extent
    /// of the grid's voxel cells.
    pub fn overlaps_grid(&self, grid: &GridSpec) -> bool {
        let (lo, hi) = grid.center_bounds();
        let h = 0.5 * grid.spacing;
        let mut bmin = Point3::repeat(f64::INFINITY);
        let mut bmax = Point3::repeat(f64::NEG_INFINITY);
        let us = [-0.5, self.dims[0] as f64 - 0.5];
        let vs = [-0.5, self.dims[1] as f64 - 0.5];
        let ws = [-0.5 * self.thickness, 0.5 * self.thickness];
        for &u in &us {
            for &v in &vs {
                for &w in &ws {
                    let p = self.world_local(&Point3::new(u * self.spacing[0], v * self.spacing[1], w));
                    bmin = bmin.inf(&p);
                    bmax = bmax.sup(&p);
                }
            }
        }
        (0..3).all(|a| bmax[a] >= lo[a] - h && bmin[a] <= hi[a] + h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_improper_rotation() {
        let mut r = Matrix3::identity();
        r[(2, 2)] = -1.0;
        assert!(PlaneFrame::new([4, 4], [1.0, 1.0], 1.0, r, Point3::zeros()).is_err());
        assert!(PlaneFrame::new([4, 4], [1.0, 0.0], 1.0, Matrix3::identity(), Point3::zeros()).is_err());
    }

    #[test]
    fn local_round_trip() {
        let f = PlaneFrame::centered(
            Point3::new(1.0, 2.0, 3.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::z(),
            [11, 9],
            [0.5, 0.5],
            2.0,
        )
        .unwrap();
        let p = Point3::new(0.3, -1.2, 4.4);
        assert!((f.world_local(&f.to_local(&p)) - p).norm() < 1e-12);
        assert!((f.center() - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
    }
}
