//! Multiresolution stationary-velocity registration of 2D images.

use serde::{Deserialize, Serialize};

use super::field::*;
use crate::volumes::filter::downsample2;
use crate::volumes::{mask_to_sdf, Image2D, Mask2D, Raster};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationParams {
    pub levels: usize,
    /// Iteration caps from the coarsest level to the finest.
    pub iterations: Vec<usize>,
    pub squarings: u32,
    /// Smoothing of each update (pixels).
    pub sigma_fluid: f64,
    /// Smoothing of the accumulated velocity (pixels).
    pub sigma_diffusion: f64,
    /// Upper bound on a single update (pixels).
    pub max_step_px: f64,
    /// A level stops after this many iterations without relative improvement.
    pub stagnation_window: usize,
    pub tolerance: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            levels: 3,
            iterations: vec![80, 60, 40],
            squarings: 6,
            sigma_fluid: 1.0,
            sigma_diffusion: 1.5,
            max_step_px: 1.0,
            stagnation_window: 15,
            tolerance: 1e-4,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.iterations.len() != self.levels {
            return Err(Error::Config(format!(
                "registration needs one iteration cap per level ({} levels, {} caps)",
                self.levels,
                self.iterations.len()
            )));
        }
        if !(self.max_step_px > 0.0) || self.sigma_fluid < 0.0 || self.sigma_diffusion < 0.0 {
            return Err(Error::Config("registration step and smoothing must be positive".into()));
        }
        Ok(())
    }
}

/// A diffeomorphism `exp(v)` with its inverse `exp(-v)`, in pixel units.
#[derive(Clone, Debug)]
pub struct Diffeo2D {
    pub velocity: Field2D,
    pub forward: Field2D,
    pub inverse: Field2D,
    pub squarings: u32,
    /// False when the finest level hit its iteration cap.
    pub converged: bool,
    pub ssd_initial: f64,
    /// Full-resolution SSD after each level (coarse to fine).
    pub level_ssd: Vec<f64>,
}

impl Diffeo2D {
    pub fn identity(width: usize, height: usize) -> Self {
        let z = zero_field(width, height);
        Self {
            velocity: z.clone(),
            forward: z.clone(),
            inverse: z,
            squarings: 6,
            converged: true,
            ssd_initial: 0.0,
            level_ssd: Vec::new(),
        }
    }

    /// Point on the geodesic path: `exp(fraction * v)`.
    pub fn fractional(&self, fraction: f64) -> Field2D {
        exp_field(&scale_field(&self.velocity, fraction), self.squarings)
    }

    /// Largest `|forward o inverse - id|` at least `margin` pixels inside.
    pub fn inverse_residual(&self, margin: usize) -> f64 {
        max_composition_residual(&self.forward, &self.inverse, margin)
    }

    pub fn min_jacobian(&self) -> f64 {
        jacobian_det(&self.forward).data().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_ssd(&self) -> f64 {
        self.level_ssd.last().copied().unwrap_or(self.ssd_initial)
    }
}

pub fn ssd(a: &Image2D, b: &Image2D) -> f64 {
    let n = a.len().max(1) as f64;
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n
}

/// Smooth indicator of a mask: about 1 inside, 0 outside, with a soft edge
/// a few pixels wide built from the signed distance.
pub fn mask_image(mask: &Mask2D, spacing: [f64; 2]) -> Result<Image2D> {
    let sdf = mask_to_sdf(mask, spacing)?;
    let width = 3.0 * spacing[0].min(spacing[1]);
    Ok(sdf.map(|d| 0.5 - 0.5 * (d / width).tanh()))
}

fn demons_update(fixed: &Image2D, grad_fixed: &Field2D, warped: &Image2D, kappa: f64) -> Field2D {
    let grad_warped = gradient(warped);
    Raster::from_fn(fixed.width(), fixed.height(), |i, j| {
        let diff = warped.get(i, j) - fixed.get(i, j);
        let (a, b) = (grad_fixed.get(i, j), grad_warped.get(i, j));
        let g = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let den = g[0] * g[0] + g[1] * g[1] + diff * diff / kappa;
        if den < 1e-12 {
            [0.0, 0.0]
        } else {
            [-diff * g[0] / den, -diff * g[1] / den]
        }
    })
}

fn prolong(mut v: Field2D, dims: &[[usize; 2]], from: usize, to: usize) -> Field2D {
    // dims[0] is the finest level
    let mut l = from;
    while l > to {
        l -= 1;
        v = upsample_field(&v, dims[l][0], dims[l][1]);
    }
    v
}

/// Estimate `phi` with `fixed(x) ~ moving(x + phi(x))`.
pub fn register_2d(fixed: &Image2D, moving: &Image2D, params: &RegistrationParams) -> Result<Diffeo2D> {
    params.validate()?;
    if !fixed.same_dims(moving) {
        return Err(Error::GridMismatch(format!(
            "fixed {:?} vs moving {:?}",
            fixed.dims(),
            moving.dims()
        )));
    }
    let kappa = 4.0 * params.max_step_px * params.max_step_px;
    let mut pyr_f = vec![fixed.clone()];
    let mut pyr_m = vec![moving.clone()];
    for _ in 1..params.levels {
        let (f, m) = (pyr_f.last().unwrap(), pyr_m.last().unwrap());
        if f.width() < 8 || f.height() < 8 {
            break;
        }
        let (f, m) = (downsample2(f), downsample2(m));
        pyr_f.push(f);
        pyr_m.push(m);
    }
    let dims: Vec<[usize; 2]> = pyr_f.iter().map(|r| r.dims()).collect();
    let n_levels = pyr_f.len();
    let ssd_initial = ssd(fixed, moving);

    let mut best_full = (ssd_initial, zero_field(fixed.width(), fixed.height()));
    let mut level_ssd = Vec::with_capacity(n_levels);
    let mut converged = true;
    let top = n_levels - 1;
    let mut v = zero_field(dims[top][0], dims[top][1]);

    for level in (0..n_levels).rev() {
        if level != top {
            v = upsample_field(&v, dims[level][0], dims[level][1]);
        }
        let (f, m) = (&pyr_f[level], &pyr_m[level]);
        let grad_f = gradient(f);
        let cap = params.iterations[params.levels - 1 - level.min(params.levels - 1)];
        let mut best_v = v.clone();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut stopped_early = false;
        for it in 0..=cap {
            let warped = warp_image(m, &exp_field(&v, params.squarings));
            let e = ssd(f, &warped);
            if e < best {
                if e < best * (1.0 - params.tolerance) {
                    stale = 0;
                } else {
                    stale += 1;
                }
                best = e;
                best_v = v.clone();
            } else {
                stale += 1;
            }
            if stale >= params.stagnation_window {
                stopped_early = true;
                break;
            }
            if it == cap {
                break;
            }
            let u = smooth_field(&demons_update(f, &grad_f, &warped, kappa), params.sigma_fluid);
            v = smooth_field(&add_fields(&v, &u), params.sigma_diffusion);
        }
        v = best_v;
        if level == 0 {
            converged = stopped_early;
        }
        let v_full = prolong(v.clone(), &dims, level, 0);
        let e_full = ssd(fixed, &warp_image(moving, &exp_field(&v_full, params.squarings)));
        if e_full <= best_full.0 {
            best_full = (e_full, v_full);
        }
        level_ssd.push(best_full.0);
    }

    let velocity = best_full.1;
    let forward = exp_field(&velocity, params.squarings);
    let inverse = exp_field(&scale_field(&velocity, -1.0), params.squarings);
    Ok(Diffeo2D {
        velocity,
        forward,
        inverse,
        squarings: params.squarings,
        converged,
        ssd_initial,
        level_ssd,
    })
}

/// Registration between two masks through their smoothed indicator images.
pub fn register_masks(
    fixed: &Mask2D,
    moving: &Mask2D,
    spacing: [f64; 2],
    params: &RegistrationParams,
) -> Result<Diffeo2D> {
    register_2d(&mask_image(fixed, spacing)?, &mask_image(moving, spacing)?, params)
}
