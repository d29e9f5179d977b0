//! Multilevel B-spline registration of the static template onto a skeleton.
//!
//! The transform `h(v) = v + u(v)` maps centre-of-mass aligned frame space
//! into template space. Skeleton contour points are pulled through `h` and
//! matched against the template contour with the expectation cost; each
//! iteration fits a B-spline update to the point residuals at the current
//! level's knot spacing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bspline::{BSplineField, DerivativeTaps, Taps};
use super::pse::{pse_evaluate, PointIndex, PseEvaluation};
use super::skeleton::{align_com, Skeleton, StaticTemplate};
use crate::volumes::trilinear;
use crate::volumes::{GridSpec, LabelVolume, VectorVolume, VolumeGrid};
use crate::{Error, Point3, Result};

type Mat3 = nalgebra::Matrix3<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionParams {
    /// Kernel width of the expectation cost (mm).
    pub sigma_v: f64,
    /// Fraction of the point residual requested per iteration.
    pub step: f64,
    pub shrink: Vec<usize>,
    /// Knot spacing per level (mm).
    pub knot_spacing: Vec<f64>,
    pub iterations: Vec<usize>,
    pub convergence_window: usize,
    pub convergence_threshold: f64,
    pub max_step_reductions: usize,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        Self {
            sigma_v: 1.0,
            step: 0.1,
            shrink: vec![6, 4, 2],
            knot_spacing: vec![44.0, 22.0, 11.0],
            iterations: vec![250, 200, 150],
            convergence_window: 15,
            convergence_threshold: 1e-6,
            max_step_reductions: 5,
        }
    }
}

impl ReconstructionParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.knot_spacing.len();
        if n == 0 || self.shrink.len() != n || self.iterations.len() != n {
            return Err(Error::Config(format!(
                "reconstruction levels disagree: {} shrink factors, {} knot spacings, {} iteration caps",
                self.shrink.len(),
                n,
                self.iterations.len()
            )));
        }
        if !(self.sigma_v > 0.0 && self.step > 0.0) || self.knot_spacing.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("sigma, step and knot spacings must be > 0".into()));
        }
        if self.shrink.contains(&0) {
            return Err(Error::Config("shrink factors must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub knot_spacing: f64,
    pub iterations: usize,
    pub cost_start: f64,
    pub cost_end: f64,
    pub step_reductions: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub t_idx: usize,
    /// Centre-of-mass translation (mm) from template to frame.
    pub translation: Point3,
    /// Nonlinear displacement `u` sampled on the template grid (mm).
    pub displacement: VectorVolume,
    pub labels: LabelVolume,
    pub levels: Vec<LevelTrace>,
    pub final_cost: f64,
    /// Contour points whose expectation fell back to the nearest neighbour.
    pub fallbacks: usize,
    /// Smallest Jacobian determinant seen at the check points.
    pub min_check_det: f64,
}

impl ReconstructionResult {
    /// `h(v) = v + u(v)`.
    pub fn transform(&self, v: &Point3) -> Point3 {
        v + sample_vector(&self.displacement, v)
    }

    pub fn mean_displacement(&self) -> f64 {
        let d = self.displacement.data();
        d.iter().map(|a| Point3::from(*a).norm()).sum::<f64>() / d.len().max(1) as f64
    }
}

pub(crate) fn sample_vector(field: &VectorVolume, p: &Point3) -> Point3 {
    let d = field.data();
    let s = field.spec();
    Point3::new(
        trilinear(s, p, |i| d[i][0]),
        trilinear(s, p, |i| d[i][1]),
        trilinear(s, p, |i| d[i][2]),
    )
}

fn check_points(organ: &LabelVolume, stride: usize) -> Vec<Point3> {
    let spec = organ.spec();
    let [nx, ny, nz] = spec.dims;
    let mut out = Vec::new();
    for k in (0..nz).step_by(stride) {
        for j in (0..ny).step_by(stride) {
            for i in (0..nx).step_by(stride) {
                if *organ.get(i, j, k) != 0 {
                    out.push(spec.world(i, j, k));
                }
            }
        }
    }
    out
}

fn min_det(base: &[Mat3], delta: &[Mat3], s: f64) -> f64 {
    base.iter()
        .zip(delta)
        .map(|(a, b)| (Mat3::identity() + a + b * s).determinant())
        .fold(f64::INFINITY, f64::min)
}

/// Fit the template to one skeleton.
pub fn register_partial(
    template: &StaticTemplate,
    skeleton: &Skeleton,
    params: &ReconstructionParams,
) -> Result<ReconstructionResult> {
    params.validate()?;
    if skeleton.contour.is_empty() {
        return Err(Error::EmptyShape(format!("skeleton {} has no contour", skeleton.t_idx)));
    }
    let grid = template.grid().clone();
    let translation = align_com(template, skeleton)?;
    let anchors: Vec<Point3> = skeleton.contour.iter().map(|r| r - translation).collect();
    let index = PointIndex::new(&template.contour, params.sigma_v)?;
    let organ = template.labels.dilated(1);

    let mut fields: Vec<BSplineField> = Vec::new();
    let mut u_at = vec![Point3::zeros(); anchors.len()];
    let warped = |u_at: &[Point3]| -> Vec<Point3> { anchors.iter().zip(u_at).map(|(a, u)| a + u).collect() };
    let mut eval: PseEvaluation = pse_evaluate(&index, &anchors)?;
    let mut traces = Vec::new();
    let mut overall_min_det = f64::INFINITY;

    for level in 0..params.knot_spacing.len() {
        let mut field = BSplineField::for_grid(&grid, params.knot_spacing[level]);
        let taps: Vec<Taps> = anchors.iter().map(|p| field.taps(p)).collect();
        let checks = check_points(&organ, params.shrink[level].max(2));
        let dtaps: Vec<DerivativeTaps> = checks.iter().map(|p| field.derivative_taps(p)).collect();
        let mut jac: Vec<Mat3> = checks
            .iter()
            .map(|p| fields.iter().map(|f| f.jacobian(p)).fold(Mat3::zeros(), |a, b| a + b))
            .collect();

        let mut trace = LevelTrace {
            knot_spacing: params.knot_spacing[level],
            iterations: 0,
            cost_start: eval.cost,
            cost_end: eval.cost,
            step_reductions: 0,
            converged: false,
        };
        let mut history = vec![eval.cost];
        for _ in 0..params.iterations[level] {
            let y = warped(&u_at);
            let request: Vec<Point3> = y
                .iter()
                .zip(&eval.expectations)
                .map(|(y, e)| (e - y) * params.step)
                .collect();
            let dc = field.fit_scattered(&taps, &request);
            let du: Vec<Point3> = taps.iter().map(|t| BSplineField::eval_taps(&dc, t)).collect();
            let dj: Vec<Mat3> = dtaps.iter().map(|t| BSplineField::jacobian_taps(&dc, t)).collect();

            let mut s = 1.0;
            let mut reductions = 0;
            let mut accepted = None;
            loop {
                let det = min_det(&jac, &dj, s);
                let candidate = if det > 0.0 {
                    let y_new: Vec<Point3> = y.iter().zip(&du).map(|(y, d)| y + d * s).collect();
                    let e = pse_evaluate(&index, &y_new)?;
                    if e.cost <= eval.cost {
                        Some((e, det))
                    } else {
                        None
                    }
                } else {
                    None
                };
                if let Some(c) = candidate {
                    accepted = Some(c);
                    break;
                }
                if reductions == params.max_step_reductions {
                    if det <= 0.0 {
                        return Err(Error::RegistrationAborted(format!(
                            "frame {}: Jacobian determinant {det:.3e} at level {level} after {reductions} step reductions",
                            skeleton.t_idx
                        )));
                    }
                    break;
                }
                reductions += 1;
                s *= 0.5;
            }
            trace.step_reductions += reductions;
            let Some((e, det)) = accepted else {
                trace.converged = true;
                break;
            };
            for (c, d) in field.coeffs.iter_mut().zip(&dc) {
                *c += d * s;
            }
            for (a, d) in jac.iter_mut().zip(&dj) {
                *a += d * s;
            }
            for (u, d) in u_at.iter_mut().zip(&du) {
                *u += d * s;
            }
            overall_min_det = overall_min_det.min(det);
            eval = e;
            trace.iterations += 1;
            history.push(eval.cost);
            let w = params.convergence_window;
            if history.len() > w {
                let old = history[history.len() - 1 - w];
                if old <= 0.0 || (old - eval.cost).abs() / old < params.convergence_threshold {
                    trace.converged = true;
                    break;
                }
            }
        }
        trace.cost_end = eval.cost;
        traces.push(trace);
        fields.push(field);
    }

    let mut dense = vec![Point3::zeros(); grid.len()];
    for f in &fields {
        f.add_dense(&grid, &mut dense);
    }
    let displacement = VolumeGrid::from_vec(grid.clone(), dense.iter().map(|p| [p.x, p.y, p.z]).collect())?;
    let labels = warp_template(template, &displacement, &translation, &grid);
    Ok(ReconstructionResult {
        t_idx: skeleton.t_idx,
        translation,
        displacement,
        labels,
        levels: traces,
        final_cost: eval.cost,
        fallbacks: eval.fallbacks,
        min_check_det: overall_min_det,
    })
}

/// Template labels pulled into frame space: `V_s(h(x - T))`.
pub fn warp_template(
    template: &StaticTemplate,
    displacement: &VectorVolume,
    translation: &Point3,
    target: &GridSpec,
) -> LabelVolume {
    LabelVolume::from_fn(target.clone(), |_, x| {
        let a = x - translation;
        let h = a + sample_vector(displacement, &a);
        (template.occupancy(&h) >= 0.5) as u8
    })
}

/// Register every skeleton independently; failures are kept per frame.
pub fn reconstruct_series(
    template: &StaticTemplate,
    skeletons: &[Skeleton],
    params: &ReconstructionParams,
) -> Vec<Result<ReconstructionResult>> {
    skeletons
        .par_iter()
        .map(|s| register_partial(template, s, params))
        .collect()
}
