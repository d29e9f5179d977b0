//! Uniform cubic B-spline vector fields on a regular control lattice.

use crate::volumes::GridSpec;
use crate::Point3;

#[inline]
fn basis(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

#[inline]
fn basis_derivative(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        -0.5 * s * s,
        (3.0 * t * t - 4.0 * t) / 2.0,
        (-3.0 * t * t + 2.0 * t + 1.0) / 2.0,
        0.5 * t * t,
    ]
}

/// Control-point indices and tensor weights influencing one location.
#[derive(Clone, Debug)]
pub struct Taps {
    pub index: [u32; 64],
    pub weight: [f64; 64],
}

/// Like [`Taps`] with the spatial derivatives (per mm) of the weights.
#[derive(Clone, Debug)]
pub struct DerivativeTaps {
    pub index: [u32; 64],
    pub grad: [[f64; 64]; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BSplineField {
    /// Position of the first knot interval's start.
    pub lo: Point3,
    pub knot: f64,
    /// Control points per axis (intervals + 3).
    pub n_ctrl: [usize; 3],
    pub coeffs: Vec<Point3>,
}

impl BSplineField {
    /// Zero field whose knot intervals cover the box `[lo, hi]`.
    pub fn covering(lo: Point3, hi: Point3, knot: f64) -> Self {
        let mut n_ctrl = [0; 3];
        for a in 0..3 {
            let n = ((hi[a] - lo[a]) / knot - 1e-9).ceil().max(1.0) as usize;
            n_ctrl[a] = n + 3;
        }
        Self {
            lo,
            knot,
            n_ctrl,
            coeffs: vec![Point3::zeros(); n_ctrl.iter().product()],
        }
    }

    /// Field covering the voxel-centre box of a grid.
    pub fn for_grid(grid: &GridSpec, knot: f64) -> Self {
        let (lo, hi) = grid.center_bounds();
        Self::covering(lo, hi, knot)
    }

    fn locate(&self, p: &Point3, axis: usize) -> (usize, f64) {
        let n = self.n_ctrl[axis] - 3;
        let t = ((p[axis] - self.lo[axis]) / self.knot).clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        (i, t - i as f64)
    }

    fn tap_indices(&self, base: [usize; 3]) -> [u32; 64] {
        let [nx, ny, _] = self.n_ctrl;
        let mut out = [0u32; 64];
        let mut q = 0;
        for c in 0..4 {
            for b in 0..4 {
                for a in 0..4 {
                    out[q] = (((base[2] + c) * ny + base[1] + b) * nx + base[0] + a) as u32;
                    q += 1;
                }
            }
        }
        out
    }

    pub fn taps(&self, p: &Point3) -> Taps {
        let (ix, fx) = self.locate(p, 0);
        let (iy, fy) = self.locate(p, 1);
        let (iz, fz) = self.locate(p, 2);
        let (bx, by, bz) = (basis(fx), basis(fy), basis(fz));
        let mut weight = [0.0; 64];
        let mut q = 0;
        for wz in bz {
            for wy in by {
                let wyz = wy * wz;
                for wx in bx {
                    weight[q] = wx * wyz;
                    q += 1;
                }
            }
        }
        Taps {
            index: self.tap_indices([ix, iy, iz]),
            weight,
        }
    }

    pub fn derivative_taps(&self, p: &Point3) -> DerivativeTaps {
        let (ix, fx) = self.locate(p, 0);
        let (iy, fy) = self.locate(p, 1);
        let (iz, fz) = self.locate(p, 2);
        let (bx, by, bz) = (basis(fx), basis(fy), basis(fz));
        let inv = 1.0 / self.knot;
        let (dx, dy, dz) = (basis_derivative(fx), basis_derivative(fy), basis_derivative(fz));
        let mut grad = [[0.0; 64]; 3];
        let mut q = 0;
        for c in 0..4 {
            for b in 0..4 {
                for a in 0..4 {
                    grad[0][q] = dx[a] * by[b] * bz[c] * inv;
                    grad[1][q] = bx[a] * dy[b] * bz[c] * inv;
                    grad[2][q] = bx[a] * by[b] * dz[c] * inv;
                    q += 1;
                }
            }
        }
        DerivativeTaps {
            index: self.tap_indices([ix, iy, iz]),
            grad,
        }
    }

    #[inline]
    pub fn eval_taps(coeffs: &[Point3], taps: &Taps) -> Point3 {
        let mut out = Point3::zeros();
        for q in 0..64 {
            out += coeffs[taps.index[q] as usize] * taps.weight[q];
        }
        out
    }

    /// Spatial Jacobian `du_i/dx_j` from derivative taps.
    #[inline]
    pub fn jacobian_taps(coeffs: &[Point3], taps: &DerivativeTaps) -> nalgebra::Matrix3<f64> {
        let mut m = nalgebra::Matrix3::zeros();
        for q in 0..64 {
            let c = coeffs[taps.index[q] as usize];
            for j in 0..3 {
                let g = taps.grad[j][q];
                if g != 0.0 {
                    for i in 0..3 {
                        m[(i, j)] += c[i] * g;
                    }
                }
            }
        }
        m
    }

    pub fn eval(&self, p: &Point3) -> Point3 {
        Self::eval_taps(&self.coeffs, &self.taps(p))
    }

    pub fn jacobian(&self, p: &Point3) -> nalgebra::Matrix3<f64> {
        Self::jacobian_taps(&self.coeffs, &self.derivative_taps(p))
    }

    /// Scattered-data approximation: control increments whose field takes
    /// approximately `values[c]` at the data locations described by `taps`.
    /// Control points without nearby data receive zero.
    pub fn fit_scattered(&self, taps: &[Taps], values: &[Point3]) -> Vec<Point3> {
        let n = self.coeffs.len();
        let mut delta = vec![Point3::zeros(); n];
        let mut omega = vec![0.0f64; n];
        for (t, z) in taps.iter().zip(values) {
            let s2: f64 = t.weight.iter().map(|w| w * w).sum();
            if s2 <= 0.0 {
                continue;
            }
            for q in 0..64 {
                let w = t.weight[q];
                let w2 = w * w;
                let idx = t.index[q] as usize;
                delta[idx] += z * (w2 * w / s2);
                omega[idx] += w2;
            }
        }
        delta
            .into_iter()
            .zip(omega)
            .map(|(d, o)| if o > 0.0 { d / o } else { Point3::zeros() })
            .collect()
    }

    /// Add the field sampled at every voxel centre of `grid` into `out`
    /// (x-fastest), by separable evaluation.
    pub fn add_dense(&self, grid: &GridSpec, out: &mut [Point3]) {
        let [gx, gy, gz] = grid.dims;
        let [nx, ny, nz] = self.n_ctrl;
        let axis_taps = |axis: usize, n: usize| -> Vec<(usize, [f64; 4])> {
            (0..n)
                .map(|i| {
                    let mut p = Point3::from(grid.origin);
                    p[axis] += i as f64 * grid.spacing;
                    let (b, f) = self.locate(&p, axis);
                    (b, basis(f))
                })
                .collect()
        };
        let (tx, ty, tz) = (axis_taps(0, gx), axis_taps(1, gy), axis_taps(2, gz));
        // contract x: [cz][cy][x]
        let mut s1 = vec![Point3::zeros(); nz * ny * gx];
        for cz in 0..nz {
            for cy in 0..ny {
                let row = &self.coeffs[(cz * ny + cy) * nx..(cz * ny + cy + 1) * nx];
                let dst = &mut s1[(cz * ny + cy) * gx..(cz * ny + cy + 1) * gx];
                for (x, (b, w)) in tx.iter().enumerate() {
                    dst[x] = row[*b] * w[0] + row[b + 1] * w[1] + row[b + 2] * w[2] + row[b + 3] * w[3];
                }
            }
        }
        // contract y: [cz][y][x]
        let mut s2 = vec![Point3::zeros(); nz * gy * gx];
        for cz in 0..nz {
            for (y, (b, w)) in ty.iter().enumerate() {
                let dst = (cz * gy + y) * gx;
                for a in 0..4 {
                    let src = (cz * ny + b + a) * gx;
                    for x in 0..gx {
                        s2[dst + x] += s1[src + x] * w[a];
                    }
                }
            }
        }
        // contract z
        for (z, (b, w)) in tz.iter().enumerate() {
            for a in 0..4 {
                let src = (b + a) * gy * gx;
                let dst = z * gy * gx;
                for i in 0..gy * gx {
                    out[dst + i] += s2[src + i] * w[a];
                }
            }
        }
    }
}
