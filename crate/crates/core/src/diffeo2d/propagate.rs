//! Propagation of sparse manual masks through an image series by blending
//! a forward chain from the interval start with a backward chain from the
//! interval end.

use serde::{Deserialize, Serialize};

use super::field::*;
use super::register::{register_2d, register_masks, Diffeo2D, RegistrationParams};
use crate::volumes::{mask_to_sdf, sdf_to_mask, Image2D, Mask2D, Raster};
use crate::{Error, Result};

/// Margin (pixels) excluded when checking inverse consistency.
pub const CONSISTENCY_MARGIN: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationParams {
    /// Stride between manually segmented cycles.
    pub interval: usize,
    /// Steepness of the arctan blending weight.
    pub gamma: f64,
    pub registration: RegistrationParams,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            interval: 10,
            gamma: 6.0,
            registration: RegistrationParams::default(),
        }
    }
}

/// Cycles carrying a manual mask: every `interval`-th cycle plus the last.
pub fn manual_indices(n_cycles: usize, interval: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n_cycles).step_by(interval.max(1)).collect();
    if n_cycles > 0 && idx.last() != Some(&(n_cycles - 1)) {
        idx.push(n_cycles - 1);
    }
    idx
}

/// Weight of the forward branch at `k` inside the interval `[start, end]`.
pub fn fusion_weight(k: usize, start: usize, end: usize, gamma: f64) -> f64 {
    let len = (end - start).max(1) as f64;
    let mid = 0.5 * (start + end) as f64;
    0.5 - (gamma * (k as f64 - mid) / len).atan() / std::f64::consts::PI
}

/// Composite pull-back from `to` into `from` (`from < to`):
/// `images[to](x) ~ images[from](x + phi(x))`.
pub fn propagate_forward(
    images: &[Image2D],
    from: usize,
    to: usize,
    params: &RegistrationParams,
) -> Result<Field2D> {
    if to <= from || to >= images.len() {
        return Err(Error::InvalidGeometry(format!("forward propagation {from} -> {to}")));
    }
    let mut total: Option<Field2D> = None;
    for k in from + 1..=to {
        let step = register_2d(&images[k], &images[k - 1], params)?.forward;
        total = Some(match total {
            None => step,
            Some(prev) => compose(&prev, &step),
        });
    }
    Ok(total.expect("at least one step"))
}

/// Composite pull-back from `to` into `from` (`to < from`).
pub fn propagate_backward(
    images: &[Image2D],
    from: usize,
    to: usize,
    params: &RegistrationParams,
) -> Result<Field2D> {
    if to >= from || from >= images.len() {
        return Err(Error::InvalidGeometry(format!("backward propagation {from} -> {to}")));
    }
    let mut total: Option<Field2D> = None;
    for k in (to..from).rev() {
        let step = register_2d(&images[k], &images[k + 1], params)?.forward;
        total = Some(match total {
            None => step,
            Some(prev) => compose(&prev, &step),
        });
    }
    Ok(total.expect("at least one step"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Manual,
    Fused,
    /// Only one branch was available because a manual mask was empty.
    SingleBranch,
}

/// Registration health over one plane's propagation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationDiagnostics {
    pub registrations: usize,
    pub unconverged: usize,
    pub max_inverse_residual: f64,
    pub min_jacobian: f64,
}

impl PropagationDiagnostics {
    fn record(&mut self, d: &Diffeo2D) {
        if self.registrations == 0 {
            self.min_jacobian = f64::INFINITY;
        }
        self.registrations += 1;
        self.unconverged += (!d.converged) as usize;
        self.max_inverse_residual = self.max_inverse_residual.max(d.inverse_residual(CONSISTENCY_MARGIN));
        self.min_jacobian = self.min_jacobian.min(d.min_jacobian());
    }

    pub fn merge(&mut self, other: &Self) {
        if other.registrations == 0 {
            return;
        }
        if self.registrations == 0 {
            *self = other.clone();
            return;
        }
        self.registrations += other.registrations;
        self.unconverged += other.unconverged;
        self.max_inverse_residual = self.max_inverse_residual.max(other.max_inverse_residual);
        self.min_jacobian = self.min_jacobian.min(other.min_jacobian);
    }
}

/// One plane's masks over all cycles.
#[derive(Clone, Debug)]
pub struct PropagatedPlane {
    pub masks: Vec<Mask2D>,
    pub sources: Vec<MaskSource>,
    /// Forward-only and backward-only estimates at intermediate cycles.
    pub forward_only: Vec<Option<Mask2D>>,
    pub backward_only: Vec<Option<Mask2D>>,
    pub alpha: Vec<Option<f64>>,
    pub diagnostics: PropagationDiagnostics,
}

fn warp_sdf(sdf: &Raster<f64>, d: &Field2D) -> Raster<f64> {
    warp_image(sdf, d)
}

/// Fill every cycle of one plane from the manual masks at
/// [`manual_indices`]. `manual(k)` returns the operator mask for cycle `k`.
pub fn propagate_plane(
    images: &[Image2D],
    manual: impl Fn(usize) -> Mask2D,
    spacing: [f64; 2],
    params: &PropagationParams,
) -> Result<PropagatedPlane> {
    let n = images.len();
    if n == 0 {
        return Err(Error::IncompleteSeries("no images to propagate".into()));
    }
    if params.interval == 0 {
        return Err(Error::Config("propagation interval must be >= 1".into()));
    }
    let (w, h) = images[0].dims().into();
    let reg = &params.registration;
    let mut out = PropagatedPlane {
        masks: vec![Mask2D::filled(w, h, false); n],
        sources: vec![MaskSource::Manual; n],
        forward_only: vec![None; n],
        backward_only: vec![None; n],
        alpha: vec![None; n],
        diagnostics: PropagationDiagnostics::default(),
    };
    let anchors = manual_indices(n, params.interval);
    for &a in &anchors {
        out.masks[a] = manual(a);
    }
    for pair in anchors.windows(2) {
        let (s, e) = (pair[0], pair[1]);
        if e - s < 2 {
            continue;
        }
        let (ms, me) = (&out.masks[s], &out.masks[e]);
        let sdf_s = (ms.count() > 0).then(|| mask_to_sdf(ms, spacing)).transpose()?;
        let sdf_e = (me.count() > 0).then(|| mask_to_sdf(me, spacing)).transpose()?;

        // forward chain into s
        let mut fwd: Vec<Option<Field2D>> = vec![None; e - s + 1];
        if sdf_s.is_some() {
            for k in s + 1..e {
                let d = register_2d(&images[k], &images[k - 1], reg)?;
                out.diagnostics.record(&d);
                fwd[k - s] = Some(match &fwd[k - s - 1] {
                    None => d.forward,
                    Some(prev) => compose(prev, &d.forward),
                });
            }
        }
        // backward chain into e
        let mut bwd: Vec<Option<Field2D>> = vec![None; e - s + 1];
        if sdf_e.is_some() {
            for k in (s + 1..e).rev() {
                let d = register_2d(&images[k], &images[k + 1], reg)?;
                out.diagnostics.record(&d);
                bwd[k - s] = Some(match &bwd[k - s + 1] {
                    None => d.forward,
                    Some(prev) => compose(prev, &d.forward),
                });
            }
        }
        // end mask expressed in start-mask coordinates
        let link = match (&sdf_s, &sdf_e) {
            (Some(_), Some(_)) => {
                let d = register_masks(me, ms, spacing, reg)?;
                out.diagnostics.record(&d);
                Some(d.forward)
            }
            _ => None,
        };

        for k in s + 1..e {
            let i = k - s;
            let f_sdf = sdf_s.as_ref().map(|sdf| warp_sdf(sdf, fwd[i].as_ref().unwrap()));
            let b_only = sdf_e.as_ref().map(|sdf| warp_sdf(sdf, bwd[i].as_ref().unwrap()));
            out.forward_only[k] = f_sdf.as_ref().map(sdf_to_mask);
            out.backward_only[k] = b_only.as_ref().map(sdf_to_mask);
            match (&f_sdf, &link) {
                (Some(f_sdf), Some(link)) => {
                    let through = compose(link, bwd[i].as_ref().unwrap());
                    let b_sdf = warp_sdf(sdf_s.as_ref().unwrap(), &through);
                    let alpha = fusion_weight(k, s, e, params.gamma);
                    let blended = Raster::from_fn(w, h, |x, y| {
                        alpha * f_sdf.get(x, y) + (1.0 - alpha) * b_sdf.get(x, y)
                    });
                    let mask = sdf_to_mask(&blended);
                    if mask.count() == 0 {
                        return Err(Error::PropagationCollapse(k));
                    }
                    out.masks[k] = mask;
                    out.sources[k] = MaskSource::Fused;
                    out.alpha[k] = Some(alpha);
                }
                _ => {
                    if sdf_s.is_some() || sdf_e.is_some() {
                        log::warn!("cycles {s}..{e}: one manual mask is empty, using a single branch");
                    }
                    let single = out.forward_only[k].clone().or_else(|| out.backward_only[k].clone());
                    out.masks[k] = single.unwrap_or_else(|| Mask2D::filled(w, h, false));
                    out.sources[k] = MaskSource::SingleBranch;
                }
            }
        }
    }
    Ok(out)
}
