use crate::volumes::{LabelVolume, ScalarVolume, VectorVolume};
use crate::{Error, Result};

/// Determinant of the Jacobian of `h = id + u`, by central differences
/// (one-sided at the grid faces).
pub fn jacobian_map(u: &VectorVolume) -> ScalarVolume {
    let spec = u.spec().clone();
    let [nx, ny, nz] = spec.dims;
    let h = spec.spacing;
    let data = u.data();
    ScalarVolume::from_fn(spec.clone(), |idx, _| {
        let [i, j, k] = spec.coords(idx);
        let mut m = nalgebra::Matrix3::<f64>::identity();
        let axes = [(i, nx, 1usize), (j, ny, nx), (k, nz, nx * ny)];
        for (col, &(c, n, stride)) in axes.iter().enumerate() {
            if n < 2 {
                continue;
            }
            let lo = if c == 0 { idx } else { idx - stride };
            let hi = if c + 1 == n { idx } else { idx + stride };
            let span = ((hi - lo) / stride) as f64 * h;
            for row in 0..3 {
                m[(row, col)] += (data[hi][row] - data[lo][row]) / span;
            }
        }
        m.determinant()
    })
}

/// Streaming per-voxel mean and variance, frames in any number.
#[derive(Clone, Debug)]
pub struct SigmaAccumulator {
    spec: crate::volumes::GridSpec,
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl SigmaAccumulator {
    pub fn new(spec: crate::volumes::GridSpec) -> Self {
        let len = spec.len();
        Self {
            spec,
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, map: &ScalarVolume) -> Result<()> {
        if !map.spec().same_as(&self.spec) {
            return Err(Error::GridMismatch("Jacobian map grid differs from accumulator".into()));
        }
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(map.data()) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
        Ok(())
    }

    pub fn mean(&self) -> ScalarVolume {
        ScalarVolume::from_vec(self.spec.clone(), self.mean.clone()).expect("matching length")
    }

    /// Population standard deviation (divisor `n`).
    pub fn sigma(&self) -> Result<ScalarVolume> {
        if self.n < 2 {
            return Err(Error::IncompleteSeries(format!("{} Jacobian maps, need at least 2", self.n)));
        }
        let n = self.n as f64;
        let data = self.m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect();
        ScalarVolume::from_vec(self.spec.clone(), data)
    }
}

/// Per-voxel temporal standard deviation of a set of Jacobian maps.
pub fn sigma_j(maps: &[ScalarVolume]) -> Result<ScalarVolume> {
    let first = maps
        .first()
        .ok_or_else(|| Error::IncompleteSeries("no Jacobian maps".into()))?;
    let mut acc = SigmaAccumulator::new(first.spec().clone());
    for m in maps {
        acc.add(m)?;
    }
    acc.sigma()
}

/// Mean of `|J - 1|` over the voxels of `region`.
pub fn mean_abs_deviation(j: &ScalarVolume, region: &LabelVolume) -> Result<f64> {
    if !j.spec().same_as(region.spec()) {
        return Err(Error::GridMismatch("Jacobian map and region differ".into()));
    }
    let (sum, n) = j
        .data()
        .iter()
        .zip(region.data())
        .filter(|(_, &r)| r != 0)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + (v - 1.0).abs(), n + 1));
    if n == 0 {
        return Err(Error::EmptyShape("empty region for Jacobian statistics".into()));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::{GridSpec, VolumeGrid};

    fn grid() -> GridSpec {
        GridSpec::centered([12, 10, 8], 1.5, [0.0; 3]).unwrap()
    }

    #[test]
    fn zero_displacement_is_unit() {
        let u = VolumeGrid::filled(grid(), [0.0; 3]);
        assert!(jacobian_map(&u).data().iter().all(|&j| (j - 1.0).abs() < 1e-15));
    }

    #[test]
    fn uniform_inflation() {
        let u = VolumeGrid::from_fn(grid(), |_, p| [0.1 * p.x, 0.1 * p.y, 0.1 * p.z]);
        for &j in jacobian_map(&u).data() {
            assert!((j - 1.331).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_sigma() {
        let a = ScalarVolume::filled(grid(), 0.9);
        let b = ScalarVolume::filled(grid(), 1.1);
        let s = sigma_j(&[a.clone(), b]).unwrap();
        assert!(s.data().iter().all(|&v| (v - 0.1).abs() < 1e-12));
        assert!(sigma_j(&[a.clone(), a.clone(), a]).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigma_rejects_mismatch() {
        let a = ScalarVolume::filled(grid(), 1.0);
        let b = ScalarVolume::filled(GridSpec::centered([4, 4, 4], 1.0, [0.0; 3]).unwrap(), 1.0);
        assert!(matches!(sigma_j(&[a, b]), Err(Error::GridMismatch(_))));
    }
}
