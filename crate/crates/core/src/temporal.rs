//! The `(t, p)` mask matrix, geodesic filling of the instants a plane was
//! not acquired at, and the secant-plane discrepancy `zeta`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeo2d::{register_masks, RegistrationParams};
use crate::volumes::{mask_to_sdf, sdf_to_mask, Mask2D, PlaneFrame, Raster};
use crate::{Error, Point3, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotTag {
    Acquired,
    Interpolated,
    Empty,
}

impl SlotTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Acquired => "acquired",
            Self::Interpolated => "interpolated",
            Self::Empty => "empty",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub tag: SlotTag,
    pub mask: Option<Mask2D>,
    /// Filled by copying the nearest acquired mask instead of interpolating.
    pub fallback: bool,
}

impl Slot {
    fn empty() -> Self {
        Self {
            tag: SlotTag::Empty,
            mask: None,
            fallback: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskMatrix {
    pub n_planes: usize,
    pub n_cycles: usize,
    slots: Vec<Slot>,
}

/// First and last instants at which every plane can be filled.
pub fn valid_band(n_planes: usize, n_cycles: usize) -> (usize, usize) {
    (n_planes - 1, n_planes * (n_cycles - 1))
}

impl MaskMatrix {
    pub fn n_instants(&self) -> usize {
        self.n_planes * self.n_cycles
    }

    pub fn slot(&self, t_idx: usize, p: usize) -> &Slot {
        &self.slots[t_idx * self.n_planes + p]
    }

    fn slot_mut(&mut self, t_idx: usize, p: usize) -> &mut Slot {
        &mut self.slots[t_idx * self.n_planes + p]
    }

    pub fn mask(&self, t_idx: usize, p: usize) -> Option<&Mask2D> {
        self.slot(t_idx, p).mask.as_ref()
    }

    pub fn count(&self, tag: SlotTag) -> usize {
        self.slots.iter().filter(|s| s.tag == tag).count()
    }

    /// Instant index at which plane `p` was acquired in cycle `k`.
    pub fn acquired_index(&self, k: usize, p: usize) -> usize {
        k * self.n_planes + p
    }

    /// Acquired mask of plane `p` closest in time to `t_idx` (earlier wins ties).
    pub fn nearest_acquired(&self, t_idx: usize, p: usize) -> &Mask2D {
        let k = if t_idx <= p {
            0
        } else {
            let below = (t_idx - p) / self.n_planes;
            let off = (t_idx - p) % self.n_planes;
            if 2 * off > self.n_planes { below + 1 } else { below }
        };
        let k = k.min(self.n_cycles - 1);
        self.mask(self.acquired_index(k, p), p).expect("acquired slot holds a mask")
    }

    pub fn band(&self) -> (usize, usize) {
        valid_band(self.n_planes, self.n_cycles)
    }
}

/// Place per-plane, per-cycle masks (`masks[p][k]`) at their acquisition slots.
pub fn assemble_matrix(masks: &[Vec<Mask2D>], n_cycles: usize) -> Result<MaskMatrix> {
    let n_planes = masks.len();
    if n_planes == 0 || n_cycles == 0 {
        return Err(Error::IncompleteSeries("no planes or no cycles".into()));
    }
    for (p, series) in masks.iter().enumerate() {
        if series.len() < n_cycles {
            return Err(Error::IncompleteSeries(format!(
                "plane {p} has {} of {n_cycles} cycles",
                series.len()
            )));
        }
    }
    let mut m = MaskMatrix {
        n_planes,
        n_cycles,
        slots: vec![Slot::empty(); n_planes * n_planes * n_cycles],
    };
    for (p, series) in masks.iter().enumerate() {
        for (k, mask) in series.iter().take(n_cycles).enumerate() {
            *m.slot_mut(k * n_planes + p, p) = Slot {
                tag: SlotTag::Acquired,
                mask: Some(mask.clone()),
                fallback: false,
            };
        }
    }
    Ok(m)
}

/// Cycles bracketing `t_idx` for plane `p`: the latest acquisition at or
/// before `t_idx` and the one after it, with the fraction of the way between.
pub fn bracket(t_idx: usize, p: usize, n_planes: usize) -> Option<(usize, usize, f64)> {
    if t_idx < p {
        return None;
    }
    let k1 = (t_idx - p) / n_planes;
    let t1 = k1 * n_planes + p;
    Some((k1, k1 + 1, (t_idx - t1) as f64 / n_planes as f64))
}

/// Warp a mask along the geodesic towards another one.
pub struct GeodesicPath {
    start_sdf: Raster<f64>,
    diffeo: crate::diffeo2d::Diffeo2D,
}

impl GeodesicPath {
    /// Path from `start` (fraction 0) towards `end` (fraction 1).
    pub fn new(start: &Mask2D, end: &Mask2D, spacing: [f64; 2], params: &RegistrationParams) -> Result<Self> {
        let diffeo = register_masks(end, start, spacing, params)?;
        if !(diffeo.min_jacobian() > 0.0) {
            return Err(Error::RegistrationAborted(format!(
                "geodesic map folds (min Jacobian {:.3})",
                diffeo.min_jacobian()
            )));
        }
        Ok(Self {
            start_sdf: mask_to_sdf(start, spacing)?,
            diffeo,
        })
    }

    pub fn at(&self, fraction: f64) -> Mask2D {
        let d = self.diffeo.fractional(fraction);
        sdf_to_mask(&crate::diffeo2d::field::warp_image(&self.start_sdf, &d))
    }
}

/// Fill every slot that has an acquisition on both sides.
///
/// Slots are filled by warping the earlier mask a fraction of the way along
/// the geodesic to the later one. An empty bracketing mask or a failed
/// registration falls back to copying the nearest acquired mask.
pub fn interpolate_missing(
    a: &MaskMatrix,
    spacing: &[[f64; 2]],
    params: &RegistrationParams,
) -> Result<MaskMatrix> {
    let n_p = a.n_planes;
    if spacing.len() != n_p {
        return Err(Error::Config(format!("{} spacings for {n_p} planes", spacing.len())));
    }
    let jobs: Vec<(usize, usize)> = (0..n_p)
        .flat_map(|p| (0..a.n_cycles.saturating_sub(1)).map(move |k| (p, k)))
        .collect();
    let filled: Vec<Vec<(usize, Slot)>> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let t1 = a.acquired_index(k, p);
            let t2 = a.acquired_index(k + 1, p);
            let m1 = a.mask(t1, p).expect("acquired");
            let m2 = a.mask(t2, p).expect("acquired");
            let path = if m1.count() == 0 || m2.count() == 0 {
                log::warn!("plane {p}, cycles {k}-{}: empty mask, copying nearest", k + 1);
                None
            } else {
                match GeodesicPath::new(m1, m2, spacing[p], params) {
                    Ok(path) => Some(path),
                    Err(e) => {
                        log::warn!("plane {p}, cycles {k}-{}: {e}; copying nearest", k + 1);
                        None
                    }
                }
            };
            (t1 + 1..t2)
                .map(|t| {
                    let f = (t - t1) as f64 / n_p as f64;
                    let slot = match &path {
                        Some(path) => Slot {
                            tag: SlotTag::Interpolated,
                            mask: Some(path.at(f)),
                            fallback: false,
                        },
                        None => Slot {
                            tag: SlotTag::Interpolated,
                            mask: Some(if f <= 0.5 { m1.clone() } else { m2.clone() }),
                            fallback: true,
                        },
                    };
                    (t, slot)
                })
                .collect()
        })
        .collect();
    let mut out = a.clone();
    for ((p, _), slots) in jobs.iter().zip(filled) {
        for (t, slot) in slots {
            *out.slot_mut(t, *p) = slot;
        }
    }
    Ok(out)
}

/// Two non-parallel planes and their common line `origin + s * direction`,
/// with `direction` pointing upwards (non-negative z).
#[derive(Clone, Debug, PartialEq)]
pub struct SecantPair {
    pub i: usize,
    pub j: usize,
    pub origin: Point3,
    pub direction: Point3,
}

impl SecantPair {
    pub fn new(i: usize, j: usize, a: &PlaneFrame, b: &PlaneFrame) -> Result<Self> {
        let (na, nb) = (a.normal(), b.normal());
        let raw = na.cross(&nb);
        let norm2 = raw.norm_squared();
        if norm2 < 1e-12 {
            return Err(Error::InvalidGeometry(format!("planes {i} and {j} are parallel")));
        }
        let (ha, hb) = (na.dot(&a.center()), nb.dot(&b.center()));
        let origin = (nb.cross(&raw) * ha + raw.cross(&na) * hb) / norm2;
        let mut direction = raw / norm2.sqrt();
        let flip = direction.z < 0.0
            || (direction.z == 0.0 && (direction.y < 0.0 || (direction.y == 0.0 && direction.x < 0.0)));
        if flip {
            direction = -direction;
        }
        Ok(Self { i, j, origin, direction })
    }

    pub fn point(&self, s: f64) -> Point3 {
        self.origin + self.direction * s
    }
}

/// Every pair of non-parallel planes of a configuration.
pub fn secant_pairs(frames: &[PlaneFrame]) -> Vec<SecantPair> {
    let mut out = Vec::new();
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            if let Ok(pair) = SecantPair::new(i, j, &frames[i], &frames[j]) {
                out.push(pair);
            }
        }
    }
    out
}

/// Extremal boundary crossings of a mask along a line (line parameters).
fn line_extent(line: &SecantPair, frame: &PlaneFrame, mask: &Mask2D) -> Option<(f64, f64)> {
    if mask.count() == 0 {
        return None;
    }
    let sdf = mask_to_sdf(mask, frame.spacing).ok()?;
    let step = 0.25 * frame.spacing[0].min(frame.spacing[1]);
    let [w, h] = frame.dims;
    let reach = ((w as f64 * frame.spacing[0]).hypot(h as f64 * frame.spacing[1]))
        + (line.origin - frame.center()).norm();
    let n = (2.0 * reach / step).ceil() as i64;
    let inside_raster = |u: f64, v: f64| u >= 0.0 && v >= 0.0 && u <= (w - 1) as f64 && v <= (h - 1) as f64;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for q in 0..=n {
        let s = -reach + q as f64 * step;
        let (u, v, _) = frame.to_pixel(&line.point(s));
        if !inside_raster(u, v) {
            if let Some((ps, pv)) = prev {
                if pv <= 0.0 {
                    crossings.push(ps);
                }
            }
            prev = None;
            continue;
        }
        let value = sdf.sample(u, v);
        match prev {
            None if value <= 0.0 => crossings.push(s),
            Some((ps, pv)) if (pv <= 0.0) != (value <= 0.0) => {
                let frac = if pv == value { 0.0 } else { pv / (pv - value) };
                crossings.push(ps + frac * (s - ps));
            }
            _ => {}
        }
        prev = Some((s, value));
    }
    if let Some((ps, pv)) = prev {
        if pv <= 0.0 {
            crossings.push(ps);
        }
    }
    let lo = crossings.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = crossings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo.is_finite() && hi.is_finite()).then_some((hi, lo))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Zeta {
    pub zeta: f64,
    pub sup: [Point3; 2],
    pub inf: [Point3; 2],
}

/// Sum of the distances between the superior and between the inferior
/// intersection points of two masks with their planes' common line.
pub fn zeta(
    pair: &SecantPair,
    frame_i: &PlaneFrame,
    mask_i: &Mask2D,
    frame_j: &PlaneFrame,
    mask_j: &Mask2D,
) -> Result<Zeta> {
    let missing = || Error::NoIntersection { i: pair.i, j: pair.j };
    let (si, ii) = line_extent(pair, frame_i, mask_i).ok_or_else(missing)?;
    let (sj, ij) = line_extent(pair, frame_j, mask_j).ok_or_else(missing)?;
    Ok(Zeta {
        zeta: (si - sj).abs() + (ii - ij).abs(),
        sup: [pair.point(si), pair.point(sj)],
        inf: [pair.point(ii), pair.point(ij)],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaRecord {
    pub t_idx: usize,
    pub i: usize,
    pub j: usize,
    /// `None` when a mask misses the common line.
    pub zeta_mm: Option<f64>,
}

/// `zeta` for every secant pair at every instant of the valid band, using
/// `pick(t_idx, p)` to choose the mask of plane `p` at that instant.
pub fn zeta_series<'a>(
    frames: &[PlaneFrame],
    n_planes: usize,
    n_cycles: usize,
    pick: impl Fn(usize, usize) -> Option<&'a Mask2D> + Sync,
) -> Vec<ZetaRecord> {
    let pairs = secant_pairs(frames);
    let (lo, hi) = valid_band(n_planes, n_cycles);
    (lo..=hi)
        .into_par_iter()
        .flat_map_iter(|t| {
            let pick = &pick;
            pairs.iter().map(move |pair| {
                let z = match (pick(t, pair.i), pick(t, pair.j)) {
                    (Some(a), Some(b)) => zeta(pair, &frames[pair.i], a, &frames[pair.j], b).ok().map(|z| z.zeta),
                    _ => None,
                };
                ZetaRecord {
                    t_idx: t,
                    i: pair.i,
                    j: pair.j,
                    zeta_mm: z,
                }
            })
        })
        .collect()
}

/// Mean and population SD of the defined `zeta` values.
pub fn zeta_stats(records: &[ZetaRecord]) -> Option<(f64, f64, usize)> {
    let vals: Vec<f64> = records.iter().filter_map(|r| r.zeta_mm).collect();
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt(), vals.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize, cx: f64, cy: f64, r: f64) -> Mask2D {
        Raster::from_fn(n, n, |i, j| (i as f64 - cx).hypot(j as f64 - cy) <= r)
    }

    fn frames() -> Vec<PlaneFrame> {
        let c = Point3::zeros();
        vec![
            PlaneFrame::centered(c, Point3::y(), Point3::z(), [61, 61], [1.0, 1.0], 5.0).unwrap(),
            PlaneFrame::centered(c, Point3::x(), Point3::z(), [61, 61], [1.0, 1.0], 5.0).unwrap(),
        ]
    }

    #[test]
    fn assemble_places_acquisitions() {
        let masks: Vec<Vec<Mask2D>> = (0..4).map(|_| vec![disk(20, 10.0, 10.0, 4.0); 2]).collect();
        let m = assemble_matrix(&masks, 2).unwrap();
        assert_eq!(m.count(SlotTag::Acquired), 8);
        assert_eq!(m.slot(0, 0).tag, SlotTag::Acquired);
        assert_eq!(m.slot(0, 1).tag, SlotTag::Empty);
        for t in 0..8 {
            for p in 0..4 {
                assert_eq!(m.slot(t, p).tag == SlotTag::Acquired, t % 4 == p);
            }
        }
        assert!(matches!(assemble_matrix(&masks, 3), Err(Error::IncompleteSeries(_))));
    }

    #[test]
    fn bracketing() {
        assert_eq!(bracket(5, 1, 4), Some((1, 2, 0.0)));
        assert_eq!(bracket(7, 1, 4), Some((1, 2, 0.5)));
        assert_eq!(bracket(0, 1, 4), None);
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let a = disk(64, 24.0, 32.0, 10.0);
        let b = disk(64, 30.0, 32.0, 10.0);
        let path = GeodesicPath::new(&a, &b, [1.0, 1.0], &RegistrationParams::default()).unwrap();
        assert_eq!(path.at(0.0), a);
        assert!(path.at(1.0).dice(&b) >= 0.95);
        let (cx, _) = path.at(0.5).centroid().unwrap();
        assert!((cx - 27.0).abs() <= 0.5, "{cx}");
        let xs: Vec<f64> = (0..=8).map(|q| path.at(q as f64 / 8.0).centroid().unwrap().0).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn interpolation_fills_band() {
        let n_p = 3;
        let masks: Vec<Vec<Mask2D>> = (0..n_p)
            .map(|_| (0..3).map(|k| disk(40, 18.0 + k as f64, 20.0, 8.0)).collect())
            .collect();
        let a = assemble_matrix(&masks, 3).unwrap();
        let f = interpolate_missing(&a, &vec![[1.0, 1.0]; n_p], &RegistrationParams::default()).unwrap();
        let (lo, hi) = f.band();
        assert_eq!(hi - lo + 1, n_p * 3 - 2 * (n_p - 1));
        for t in lo..=hi {
            for p in 0..n_p {
                assert_ne!(f.slot(t, p).tag, SlotTag::Empty, "t={t} p={p}");
            }
        }
        assert_eq!(f.slot(0, 1).tag, SlotTag::Empty);
        assert_eq!(f.slot(8, 1).tag, SlotTag::Empty);
    }

    #[test]
    fn secant_line_of_orthogonal_planes_is_vertical() {
        let fr = frames();
        let pair = SecantPair::new(0, 1, &fr[0], &fr[1]).unwrap();
        assert!((pair.direction - Point3::z()).norm() < 1e-12);
        assert!(pair.origin.norm() < 1e-9);
        let parallel = PlaneFrame::centered(Point3::new(3.0, 0.0, 0.0), Point3::y(), Point3::z(), [5, 5], [1.0, 1.0], 1.0)
            .unwrap();
        assert!(SecantPair::new(0, 2, &fr[0], &parallel).is_err());
    }

    #[test]
    fn zeta_of_identical_and_nested_disks() {
        let fr = frames();
        let pair = SecantPair::new(0, 1, &fr[0], &fr[1]).unwrap();
        // centres on the common line (pixel column 30 in both planes)
        let a = disk(61, 30.0, 30.0, 10.0);
        let z = zeta(&pair, &fr[0], &a, &fr[1], &a).unwrap();
        assert!(z.zeta < 1e-12);
        for p in z.sup.iter().chain(&z.inf) {
            let off = (p - pair.origin) - pair.direction * (p - pair.origin).dot(&pair.direction);
            assert!(off.norm() < 1e-6);
        }
        let delta = 3.0;
        let b = disk(61, 30.0, 30.0, 10.0 + delta);
        let z = zeta(&pair, &fr[0], &a, &fr[1], &b).unwrap();
        assert!((z.zeta - 2.0 * delta).abs() <= 0.5, "{}", z.zeta);
        assert!(z.sup[0].z > z.inf[0].z);
    }

    #[test]
    fn zeta_missing_line() {
        let fr = frames();
        let pair = SecantPair::new(0, 1, &fr[0], &fr[1]).unwrap();
        let a = disk(61, 30.0, 30.0, 10.0);
        let off = disk(61, 5.0, 30.0, 3.0);
        assert!(matches!(
            zeta(&pair, &fr[0], &a, &fr[1], &off),
            Err(Error::NoIntersection { i: 0, j: 1 })
        ));
    }
}
