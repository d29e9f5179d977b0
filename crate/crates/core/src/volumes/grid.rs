use serde::{Deserialize, Serialize};

use crate::{Error, Point3, Result};

/// Geometry of an isotropic voxel grid.
///
/// `origin` is the world position (mm) of the centre of voxel `(0, 0, 0)`;
/// voxel `(i, j, k)` sits at `origin + spacing * (i, j, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing: f64, origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGeometry(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGeometry(format!("grid spacing must be > 0, got {spacing}")));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Grid of `dims` voxels whose geometric centre is `center`.
    pub fn centered(dims: [usize; 3], spacing: f64, center: [f64; 3]) -> Result<Self> {
        let mut origin = [0.0; 3];
        for a in 0..3 {
            origin[a] = center[a] - 0.5 * (dims[a] as f64 - 1.0) * spacing;
        }
        Self::new(dims, spacing, origin)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn world(&self, i: usize, j: usize, k: usize) -> Point3 {
        Point3::new(
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
            self.origin[2] + self.spacing * k as f64,
        )
    }

    #[inline]
    pub fn world_of_index(&self, idx: usize) -> Point3 {
        let [i, j, k] = self.coords(idx);
        self.world(i, j, k)
    }

    /// Continuous voxel coordinates of a world point.
    #[inline]
    pub fn to_voxel(&self, p: &Point3) -> Point3 {
        Point3::new(
            (p.x - self.origin[0]) / self.spacing,
            (p.y - self.origin[1]) / self.spacing,
            (p.z - self.origin[2]) / self.spacing,
        )
    }

    /// Index of the voxel whose cell contains `p`, if inside the grid.
    pub fn voxel_containing(&self, p: &Point3) -> Option<[usize; 3]> {
        let v = self.to_voxel(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = (v[a] + 0.5).floor();
            if r < 0.0 || r >= self.dims[a] as f64 {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    /// World bounds of the voxel centres, `(min, max)` per axis.
    pub fn center_bounds(&self) -> (Point3, Point3) {
        let lo = Point3::from(self.origin);
        let hi = self.world(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1);
        (lo, hi)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.dims == other.dims
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && self
                .origin
                .iter()
                .zip(other.origin.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9)
    }
}

/// Scalar (or small vector) data on a [`GridSpec`], x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeGrid<T> {
    spec: GridSpec,
    data: Vec<T>,
}

pub type LabelVolume = VolumeGrid<u8>;
pub type ScalarVolume = VolumeGrid<f64>;
pub type VectorVolume = VolumeGrid<[f64; 3]>;

impl<T: Clone> VolumeGrid<T> {
    pub fn filled(spec: GridSpec, value: T) -> Self {
        let data = vec![value; spec.len()];
        Self { spec, data }
    }
}

impl<T> VolumeGrid<T> {
    pub fn from_vec(spec: GridSpec, data: Vec<T>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "data length {} does not match grid of {} voxels",
                data.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, Point3) -> T) -> Self {
        let data = (0..spec.len()).map(|idx| f(idx, spec.world_of_index(idx))).collect();
        Self { spec, data }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> &T {
        &self.data[self.spec.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        let idx = self.spec.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> VolumeGrid<U> {
        VolumeGrid {
            spec: self.spec.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl ScalarVolume {
    /// Trilinear interpolation at a world point, clamping to the grid border.
    pub fn sample(&self, p: &Point3) -> f64 {
        trilinear(&self.spec, p, |idx| self.data[idx])
    }
}

impl LabelVolume {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Centre of mass of the foreground voxels in world mm.
    pub fn center_of_mass(&self) -> Result<Point3> {
        let mut sum = Point3::zeros();
        let mut n = 0usize;
        for (idx, &v) in self.data.iter().enumerate() {
            if v != 0 {
                sum += self.spec.world_of_index(idx);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyShape("center of mass of an empty label volume".into()));
        }
        Ok(sum / n as f64)
    }

    /// Linear indices of foreground voxels that have a background (or
    /// out-of-grid) 6-neighbour.
    pub fn boundary_indices(&self) -> Vec<usize> {
        let [nx, ny, nz] = self.spec.dims;
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = self.spec.index(i, j, k);
                    if self.data[idx] == 0 {
                        continue;
                    }
                    let edge = i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz;
                    if edge
                        || self.data[idx - 1] == 0
                        || self.data[idx + 1] == 0
                        || self.data[idx - nx] == 0
                        || self.data[idx + nx] == 0
                        || self.data[idx - nx * ny] == 0
                        || self.data[idx + nx * ny] == 0
                    {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }

    /// World positions of the boundary voxel centres.
    pub fn boundary_points(&self) -> Vec<Point3> {
        self.boundary_indices()
            .into_iter()
            .map(|idx| self.spec.world_of_index(idx))
            .collect()
    }

    /// Erosion by `steps` iterations of the 6-neighbourhood.
    pub fn eroded(&self, steps: usize) -> LabelVolume {
        let mut cur = self.clone();
        for _ in 0..steps {
            let boundary = cur.boundary_indices();
            for idx in boundary {
                cur.data[idx] = 0;
            }
        }
        cur
    }

    /// Dilation by `steps` iterations of the 6-neighbourhood.
    pub fn dilated(&self, steps: usize) -> LabelVolume {
        let [nx, ny, nz] = self.spec.dims;
        let mut cur = self.clone();
        for _ in 0..steps {
            let prev = cur.data.clone();
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let idx = self.spec.index(i, j, k);
                        if prev[idx] != 0 {
                            continue;
                        }
                        let hit = (i > 0 && prev[idx - 1] != 0)
                            || (i + 1 < nx && prev[idx + 1] != 0)
                            || (j > 0 && prev[idx - nx] != 0)
                            || (j + 1 < ny && prev[idx + nx] != 0)
                            || (k > 0 && prev[idx - nx * ny] != 0)
                            || (k + 1 < nz && prev[idx + nx * ny] != 0);
                        if hit {
                            cur.data[idx] = 1;
                        }
                    }
                }
            }
        }
        cur
    }

    pub fn to_scalar(&self) -> ScalarVolume {
        self.map(|&v| if v != 0 { 1.0 } else { 0.0 })
    }

    /// Dice overlap with another label volume on the same grid.
    pub fn dice(&self, other: &LabelVolume) -> Result<f64> {
        if !self.spec.same_as(&other.spec) {
            return Err(Error::GridMismatch("dice between different grids".into()));
        }
        let mut inter = 0usize;
        let mut total = 0usize;
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            let (a, b) = (a != 0, b != 0);
            inter += (a && b) as usize;
            total += a as usize + b as usize;
        }
        if total == 0 {
            return Ok(1.0);
        }
        Ok(2.0 * inter as f64 / total as f64)
    }
}

/// Trilinear interpolation with clamp-to-border semantics.
pub(crate) fn trilinear(spec: &GridSpec, p: &Point3, value: impl Fn(usize) -> f64) -> f64 {
    let v = spec.to_voxel(p);
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let max = (spec.dims[a] - 1) as f64;
        let c = v[a].clamp(0.0, max);
        let f = c.floor();
        base[a] = f as usize;
        frac[a] = c - f;
        if base[a] + 1 >= spec.dims[a] {
            // last sample or single-voxel axis
            base[a] = spec.dims[a] - 1;
            frac[a] = 0.0;
        }
    }
    let [nx, ny, _] = spec.dims;
    let mut acc = 0.0;
    for dk in 0..2 {
        let wk = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
        if wk == 0.0 {
            continue;
        }
        for dj in 0..2 {
            let wj = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
            if wj == 0.0 {
                continue;
            }
            for di in 0..2 {
                let wi = if di == 0 { 1.0 - frac[0] } else { frac[0] };
                if wi == 0.0 {
                    continue;
                }
                let idx = (base[0] + di) + nx * ((base[1] + dj) + ny * (base[2] + dk));
                acc += wi * wj * wk * value(idx);
            }
        }
    }
    acc
}
