//! Separable Gaussian smoothing with clamp-to-edge boundaries.

use super::{Raster, ScalarVolume};

pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn convolve_line(src: &[f64], stride: usize, n: usize, kernel: &[f64], out: &mut [f64]) {
    let r = (kernel.len() / 2) as isize;
    for q in 0..n {
        let mut acc = 0.0;
        for (t, &w) in kernel.iter().enumerate() {
            let p = (q as isize + t as isize - r).clamp(0, n as isize - 1) as usize;
            acc += w * src[p * stride];
        }
        out[q] = acc;
    }
}

/// In-place separable smoothing of an n-d array laid out fastest-first.
pub fn smooth_nd(data: &mut [f64], dims: &[usize], sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let kernel = gaussian_kernel(sigma);
    let mut stride = 1;
    for &n in dims {
        if n > 1 {
            let outer = data.len() / n;
            let mut line = vec![0.0; n];
            let mut out = vec![0.0; n];
            for o in 0..outer {
                let base = (o % stride) + (o / stride) * stride * n;
                for q in 0..n {
                    line[q] = data[base + q * stride];
                }
                convolve_line(&line, 1, n, &kernel, &mut out);
                for q in 0..n {
                    data[base + q * stride] = out[q];
                }
            }
        }
        stride *= n;
    }
}

/// Gaussian blur of a raster; `sigma` in pixels.
pub fn smooth_raster(img: &Raster<f64>, sigma: f64) -> Raster<f64> {
    let mut out = img.clone();
    smooth_nd(out.data_mut(), &[img.width(), img.height()], sigma);
    out
}

/// Gaussian blur of a scalar volume; `sigma` in voxels.
pub fn smooth_volume(vol: &ScalarVolume, sigma: f64) -> ScalarVolume {
    let mut out = vol.clone();
    let dims = vol.spec().dims;
    smooth_nd(out.data_mut(), &dims, sigma);
    out
}

/// Blur with sigma 1 then keep every second pixel (size rounds up).
pub fn downsample2(img: &Raster<f64>) -> Raster<f64> {
    let s = smooth_raster(img, 1.0);
    let w = img.width().div_ceil(2);
    let h = img.height().div_ceil(2);
    Raster::from_fn(w, h, |i, j| *s.get(2 * i, 2 * j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sums_to_one() {
        let k = gaussian_kernel(1.7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k.len(), 13);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let img = Raster::filled(7, 5, 0.3);
        let s = smooth_raster(&img, 2.0);
        assert!(s.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }
}
