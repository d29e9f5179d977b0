//! Dense 2D displacement and velocity fields in pixel units.
//!
//! A displacement `d` stands for the map `x -> x + d(x)`. Warping an image
//! by `d` pulls values back: `(I o d)(x) = I(x + d(x))`.

use crate::volumes::filter::smooth_nd;
use crate::volumes::{Image2D, Raster};

pub type Field2D = Raster<[f64; 2]>;

pub fn zero_field(width: usize, height: usize) -> Field2D {
    Raster::filled(width, height, [0.0; 2])
}

/// Bilinear sample with edge clamping.
pub fn sample_field(d: &Field2D, x: f64, y: f64) -> [f64; 2] {
    let (w, h) = (d.width(), d.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let i0 = (x.floor() as usize).min(w.saturating_sub(2));
    let j0 = (y.floor() as usize).min(h.saturating_sub(2));
    let i1 = (i0 + 1).min(w - 1);
    let j1 = (j0 + 1).min(h - 1);
    let fx = x - i0 as f64;
    let fy = y - j0 as f64;
    let data = d.data();
    let a = data[j0 * w + i0];
    let b = data[j0 * w + i1];
    let c = data[j1 * w + i0];
    let e = data[j1 * w + i1];
    let mut out = [0.0; 2];
    for q in 0..2 {
        out[q] = (1.0 - fy) * ((1.0 - fx) * a[q] + fx * b[q]) + fy * ((1.0 - fx) * c[q] + fx * e[q]);
    }
    out
}

/// `outer o inner`: `x -> x + inner(x) + outer(x + inner(x))`.
pub fn compose(outer: &Field2D, inner: &Field2D) -> Field2D {
    Raster::from_fn(inner.width(), inner.height(), |i, j| {
        let a = *inner.get(i, j);
        let b = sample_field(outer, i as f64 + a[0], j as f64 + a[1]);
        [a[0] + b[0], a[1] + b[1]]
    })
}

pub fn scale_field(v: &Field2D, f: f64) -> Field2D {
    v.map(|a| [a[0] * f, a[1] * f])
}

pub fn add_fields(a: &Field2D, b: &Field2D) -> Field2D {
    Raster::from_fn(a.width(), a.height(), |i, j| {
        let (x, y) = (a.get(i, j), b.get(i, j));
        [x[0] + y[0], x[1] + y[1]]
    })
}

/// Group exponential of a stationary velocity field by scaling and squaring.
pub fn exp_field(v: &Field2D, squarings: u32) -> Field2D {
    let mut d = scale_field(v, 0.5f64.powi(squarings as i32));
    for _ in 0..squarings {
        d = compose(&d, &d);
    }
    d
}

pub fn warp_image(img: &Image2D, d: &Field2D) -> Image2D {
    Raster::from_fn(img.width(), img.height(), |i, j| {
        let a = d.get(i, j);
        img.sample(i as f64 + a[0], j as f64 + a[1])
    })
}

/// Central-difference gradient (one-sided at the border), per pixel.
pub fn gradient(img: &Image2D) -> Field2D {
    let (w, h) = (img.width(), img.height());
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
    Raster::from_fn(w, h, |i, j| {
        let (il, ih) = (i.saturating_sub(1), (i + 1).min(w - 1));
        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(h - 1));
        [
            if ih > il { diff(*img.get(il, j), *img.get(ih, j), (ih - il) as f64) } else { 0.0 },
            if jh > jl { diff(*img.get(i, jl), *img.get(i, jh), (jh - jl) as f64) } else { 0.0 },
        ]
    })
}

/// Jacobian determinant of `x -> x + d(x)` per pixel.
pub fn jacobian_det(d: &Field2D) -> Raster<f64> {
    let (w, h) = (d.width(), d.height());
    Raster::from_fn(w, h, |i, j| {
        let (il, ih) = (i.saturating_sub(1), (i + 1).min(w - 1));
        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(h - 1));
        let dx = |q: usize| {
            if ih > il {
                (d.get(ih, j)[q] - d.get(il, j)[q]) / (ih - il) as f64
            } else {
                0.0
            }
        };
        let dy = |q: usize| {
            if jh > jl {
                (d.get(i, jh)[q] - d.get(i, jl)[q]) / (jh - jl) as f64
            } else {
                0.0
            }
        };
        (1.0 + dx(0)) * (1.0 + dy(1)) - dy(0) * dx(1)
    })
}

/// Gaussian smoothing of both components (sigma in pixels).
pub fn smooth_field(v: &Field2D, sigma: f64) -> Field2D {
    if sigma <= 0.0 {
        return v.clone();
    }
    let dims = [v.width(), v.height()];
    let mut comps: [Vec<f64>; 2] = [
        v.data().iter().map(|a| a[0]).collect(),
        v.data().iter().map(|a| a[1]).collect(),
    ];
    for c in comps.iter_mut() {
        smooth_nd(c, &dims, sigma);
    }
    let data = comps[0].iter().zip(&comps[1]).map(|(&x, &y)| [x, y]).collect();
    Raster::from_vec(dims[0], dims[1], data).expect("same dims")
}

/// Prolong a field to a grid twice as fine (`width` x `height`), doubling
/// the vectors. Coarse pixel `c` sits on fine pixel `2c`.
pub fn upsample_field(v: &Field2D, width: usize, height: usize) -> Field2D {
    Raster::from_fn(width, height, |i, j| {
        let a = sample_field(v, i as f64 / 2.0, j as f64 / 2.0);
        [2.0 * a[0], 2.0 * a[1]]
    })
}

/// Largest |(a o b)(x)| over pixels at least `margin` away from the border.
pub fn max_composition_residual(a: &Field2D, b: &Field2D, margin: usize) -> f64 {
    let c = compose(a, b);
    let (w, h) = (c.width(), c.height());
    let mut worst = 0.0f64;
    for j in margin..h.saturating_sub(margin) {
        for i in margin..w.saturating_sub(margin) {
            let r = c.get(i, j);
            worst = worst.max(r[0].hypot(r[1]));
        }
    }
    worst
}

pub fn max_norm(d: &Field2D) -> f64 {
    d.data().iter().map(|a| a[0].hypot(a[1])).fold(0.0, f64::max)
}
