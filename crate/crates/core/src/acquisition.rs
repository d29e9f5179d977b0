//! Multi-planar acquisition geometries and their interleaved slice ordering.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::phantom::{phantom_slice, PhantomSpec};
use crate::volumes::{Image2D, Mask2D, PlaneFrame};
use crate::{Error, Point3, Result};

/// Field of view shared by all default configurations (96 pixels at 1.09 mm).
pub const DEFAULT_FOV_MM: f64 = 104.64;
pub const DEFAULT_LINES_PITCH_MM: f64 = 4.0;
const LINES_MIN: usize = 8;
const LINES_MAX: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigurationKind {
    Star,
    Grid,
    Lines,
}

impl ConfigurationKind {
    pub const ALL: [ConfigurationKind; 3] = [Self::Star, Self::Grid, Self::Lines];

    pub fn name(self) -> &'static str {
        match self {
            Self::Star => "star",
            Self::Grid => "grid",
            Self::Lines => "lines",
        }
    }
}

impl fmt::Display for ConfigurationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sequence parameters of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionParams {
    pub slice_time_ms: f64,
    pub thickness_mm: f64,
    pub pixel_spacing_mm: f64,
    pub n_cycles: usize,
    pub fov_mm: f64,
    /// Lines only: target distance between neighbouring parallel planes.
    pub lines_pitch_mm: f64,
    /// Grid only: offset between neighbouring parallel planes. Defaults to a
    /// quarter of the subject extent.
    pub grid_spacing_mm: Option<f64>,
}

impl AcquisitionParams {
    pub fn defaults(kind: ConfigurationKind) -> Self {
        let (ts, th, px, nc) = match kind {
            ConfigurationKind::Star => (183.72, 5.0, 1.09, 100),
            ConfigurationKind::Grid => (124.95, 6.0, 1.36, 100),
            ConfigurationKind::Lines => (91.61, 4.0, 1.82, 60),
        };
        Self {
            slice_time_ms: ts,
            thickness_mm: th,
            pixel_spacing_mm: px,
            n_cycles: nc,
            fov_mm: DEFAULT_FOV_MM,
            lines_pitch_mm: DEFAULT_LINES_PITCH_MM,
            grid_spacing_mm: None,
        }
    }

    /// In-plane pixel count covering the field of view.
    pub fn pixels(&self) -> usize {
        (self.fov_mm / self.pixel_spacing_mm - 1e-9).ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneConfiguration {
    pub kind: ConfigurationKind,
    pub frames: Vec<PlaneFrame>,
    pub slice_time_ms: f64,
    pub n_cycles: usize,
}

impl PlaneConfiguration {
    pub fn new(
        kind: ConfigurationKind,
        frames: Vec<PlaneFrame>,
        slice_time_ms: f64,
        n_cycles: usize,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Config("configuration without planes".into()));
        }
        if !(slice_time_ms > 0.0) || n_cycles == 0 {
            return Err(Error::Config(format!(
                "slice time {slice_time_ms} ms and cycle count {n_cycles} must be positive"
            )));
        }
        let cycle = frames.len() as f64 * slice_time_ms;
        if cycle > 1000.0 + 1e-9 {
            return Err(Error::Config(format!(
                "{} planes x {slice_time_ms} ms = {cycle:.2} ms exceeds one second per cycle",
                frames.len()
            )));
        }
        Ok(Self {
            kind,
            frames,
            slice_time_ms,
            n_cycles,
        })
    }

    pub fn n_planes(&self) -> usize {
        self.frames.len()
    }

    /// Number of reconstructable instants, `N_p * N_c - 2 (N_p - 1)`.
    pub fn expected_frames(&self) -> usize {
        let n_p = self.n_planes();
        (n_p * self.n_cycles).saturating_sub(2 * (n_p - 1))
    }
}

/// Number of parallel planes covering `extent` at `pitch`.
pub fn lines_plane_count(extent: f64, pitch: f64) -> usize {
    ((extent / pitch).round() as usize).clamp(LINES_MIN, LINES_MAX)
}

/// Build one of the three geometries around `center`.
///
/// `subject_extent` is the lateral span (mm) the planes should cover.
pub fn make_configuration(
    kind: ConfigurationKind,
    subject_extent: f64,
    center: Point3,
    params: &AcquisitionParams,
) -> Result<PlaneConfiguration> {
    if !(subject_extent > 0.0) {
        return Err(Error::Config(format!("subject extent {subject_extent} must be > 0")));
    }
    if !(params.pixel_spacing_mm > 0.0 && params.thickness_mm > 0.0 && params.fov_mm > 0.0) {
        return Err(Error::Config("pixel spacing, thickness and field of view must be > 0".into()));
    }
    let n = params.pixels();
    let px = params.pixel_spacing_mm;
    let plane = |c: Point3, u: Point3| {
        PlaneFrame::centered(c, u, Point3::z(), [n, n], [px, px], params.thickness_mm)
    };
    let sagittal = |y: f64| plane(center + Point3::new(0.0, y, 0.0), Point3::x());
    let coronal = |x: f64| plane(center + Point3::new(x, 0.0, 0.0), Point3::y());

    let frames = match kind {
        ConfigurationKind::Star => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                coronal(0.0)?,
                sagittal(0.0)?,
                plane(center, Point3::new(s, s, 0.0))?,
                plane(center, Point3::new(s, -s, 0.0))?,
            ]
        }
        ConfigurationKind::Grid => {
            let s = params.grid_spacing_mm.unwrap_or(subject_extent / 4.0);
            if !(s > 0.0) {
                return Err(Error::Config(format!("grid spacing {s} must be > 0")));
            }
            vec![
                sagittal(-s)?,
                sagittal(0.0)?,
                sagittal(s)?,
                coronal(-0.5 * s)?,
                coronal(0.5 * s)?,
            ]
        }
        ConfigurationKind::Lines => {
            if !(params.lines_pitch_mm > 0.0) {
                return Err(Error::Config("lines pitch must be > 0".into()));
            }
            let n_p = lines_plane_count(subject_extent, params.lines_pitch_mm);
            let step = subject_extent / n_p as f64;
            if step < params.thickness_mm {
                return Err(Error::Config(format!(
                    "extent {subject_extent} mm cannot hold {n_p} non-overlapping {} mm slices",
                    params.thickness_mm
                )));
            }
            (0..n_p)
                .map(|i| sagittal(-0.5 * subject_extent + (i as f64 + 0.5) * step))
                .collect::<Result<Vec<_>>>()?
        }
    };
    PlaneConfiguration::new(kind, frames, params.slice_time_ms, params.n_cycles)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub t_idx: usize,
    pub k: usize,
    pub p: usize,
    /// Acquisition instant (s).
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSchedule {
    pub n_planes: usize,
    pub n_cycles: usize,
    pub slice_time_ms: f64,
    /// Start instant (s).
    pub t0: f64,
    pub entries: Vec<ScheduleEntry>,
}

impl AcquisitionSchedule {
    pub fn t_idx(&self, k: usize, p: usize) -> usize {
        k * self.n_planes + p
    }

    /// `(k, p)` of a global slice index.
    pub fn locate(&self, t_idx: usize) -> (usize, usize) {
        (t_idx / self.n_planes, t_idx % self.n_planes)
    }

    pub fn instant(&self, t_idx: usize) -> f64 {
        self.t0 + t_idx as f64 * self.slice_time_ms / 1000.0
    }

    /// Total acquisition time (s).
    pub fn duration(&self) -> f64 {
        self.entries.len() as f64 * self.slice_time_ms / 1000.0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Round-robin ordering: cycle `k` visits planes `0..N_p` in turn.
pub fn build_schedule(config: &PlaneConfiguration) -> AcquisitionSchedule {
    let n_p = config.n_planes();
    let mut schedule = AcquisitionSchedule {
        n_planes: n_p,
        n_cycles: config.n_cycles,
        slice_time_ms: config.slice_time_ms,
        t0: 0.0,
        entries: Vec::with_capacity(n_p * config.n_cycles),
    };
    for k in 0..config.n_cycles {
        for p in 0..n_p {
            let t_idx = k * n_p + p;
            let t = schedule.instant(t_idx);
            schedule.entries.push(ScheduleEntry { t_idx, k, p, t });
        }
    }
    schedule
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceSample {
    pub entry: ScheduleEntry,
    pub image: Image2D,
    /// Ground-truth in-plane restriction of the phantom.
    pub mask: Mask2D,
}

/// Acquired slices grouped per plane: `planes[p][k]`.
#[derive(Clone, Debug)]
pub struct AcquiredSeries {
    pub config: PlaneConfiguration,
    pub schedule: AcquisitionSchedule,
    pub planes: Vec<Vec<SliceSample>>,
}

impl AcquiredSeries {
    pub fn sample(&self, k: usize, p: usize) -> &SliceSample {
        &self.planes[p][k]
    }
}

/// Sample the phantom on every scheduled slice at its own instant.
pub fn acquire_series(config: &PlaneConfiguration, spec: &PhantomSpec) -> Result<AcquiredSeries> {
    spec.validate()?;
    let schedule = build_schedule(config);
    let samples: Vec<SliceSample> = schedule
        .entries
        .par_iter()
        .map(|e| {
            let (image, mask) = phantom_slice(spec, e.t, &config.frames[e.p]);
            SliceSample {
                entry: *e,
                image,
                mask,
            }
        })
        .collect();
    let mut planes: Vec<Vec<SliceSample>> = (0..config.n_planes()).map(|_| Vec::new()).collect();
    for s in samples {
        planes[s.entry.p].push(s);
    }
    Ok(AcquiredSeries {
        config: config.clone(),
        schedule,
        planes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: ConfigurationKind, n_cycles: usize) -> PlaneConfiguration {
        let params = AcquisitionParams {
            n_cycles,
            ..AcquisitionParams::defaults(kind)
        };
        make_configuration(kind, 41.6, Point3::zeros(), &params).unwrap()
    }

    #[test]
    fn star_geometry() {
        let c = config(ConfigurationKind::Star, 100);
        assert_eq!(c.n_planes(), 4);
        assert_eq!(c.slice_time_ms, 183.72);
        assert!((c.frames[0].normal() - Point3::x()).norm() < 1e-12);
        assert!((c.frames[1].normal().abs() - Point3::y()).norm() < 1e-12);
        for f in &c.frames[2..] {
            let angle = f.normal().dot(&c.frames[1].normal()).abs().acos().to_degrees();
            assert!((angle - 45.0).abs() < 1e-9);
        }
        for f in &c.frames {
            assert!(f.center().norm() < 1e-9);
            assert_eq!(f.dims, [96, 96]);
        }
    }

    #[test]
    fn grid_geometry() {
        let c = config(ConfigurationKind::Grid, 100);
        assert_eq!(c.n_planes(), 5);
        assert!(c.frames.iter().all(|f| f.thickness == 6.0));
        let sag = c.frames.iter().filter(|f| f.normal().y.abs() > 0.99).count();
        let cor = c.frames.iter().filter(|f| f.normal().x.abs() > 0.99).count();
        assert_eq!((sag, cor), (3, 2));
    }

    #[test]
    fn lines_plane_count_follows_pitch() {
        let params = AcquisitionParams::defaults(ConfigurationKind::Lines);
        let c = make_configuration(ConfigurationKind::Lines, 40.0, Point3::zeros(), &params).unwrap();
        assert_eq!(c.n_planes(), 10);
        assert_eq!(lines_plane_count(10.0, 4.0), 8);
        assert_eq!(lines_plane_count(100.0, 4.0), 12);
        let ys: Vec<f64> = c.frames.iter().map(|f| f.center().y).collect();
        assert!(ys.windows(2).all(|w| (w[1] - w[0] - 4.0).abs() < 1e-9));
    }

    #[test]
    fn lines_extent_too_small() {
        let params = AcquisitionParams::defaults(ConfigurationKind::Lines);
        assert!(matches!(
            make_configuration(ConfigurationKind::Lines, 20.0, Point3::zeros(), &params),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cycle_must_fit_in_one_second() {
        let params = AcquisitionParams {
            slice_time_ms: 300.0,
            ..AcquisitionParams::defaults(ConfigurationKind::Star)
        };
        assert!(make_configuration(ConfigurationKind::Star, 40.0, Point3::zeros(), &params).is_err());
        for kind in ConfigurationKind::ALL {
            let c = config(kind, 10);
            assert!(c.n_planes() as f64 * c.slice_time_ms <= 1000.0);
        }
    }

    #[test]
    fn schedule_arithmetic() {
        let s = build_schedule(&config(ConfigurationKind::Star, 100));
        assert_eq!(s.len(), 400);
        assert_eq!((s.entries[5].k, s.entries[5].p), (1, 1));
        let last = s.entries.last().unwrap();
        assert!((last.t - 399.0 * 0.18372).abs() < 1e-9);
        assert!(s.entries.windows(2).all(|w| w[1].t > w[0].t));
        for e in &s.entries {
            assert_eq!(s.locate(e.t_idx), (e.k, e.p));
            assert_eq!(s.t_idx(e.k, e.p), e.t_idx);
        }
        let g = build_schedule(&config(ConfigurationKind::Grid, 100));
        assert!((g.duration() - 62.475).abs() < 1e-9);
    }

    #[test]
    fn static_phantom_gives_identical_masks() {
        let c = config(ConfigurationKind::Star, 3);
        let spec = PhantomSpec {
            amplitude: 0.0,
            translation_amplitude: 0.0,
            ..Default::default()
        };
        let series = acquire_series(&c, &spec).unwrap();
        for plane in &series.planes {
            assert_eq!(plane.len(), 3);
            assert!(plane.iter().all(|s| s.mask == plane[0].mask));
        }
    }

    #[test]
    fn planes_of_one_cycle_see_different_instants() {
        let c = config(ConfigurationKind::Star, 2);
        let spec = PhantomSpec::default();
        let series = acquire_series(&c, &spec).unwrap();
        let a = series.sample(1, 0);
        let b = series.sample(1, 1);
        assert!((b.entry.t - a.entry.t - 0.18372).abs() < 1e-12);
        assert_ne!(spec.state(a.entry.t), spec.state(b.entry.t));
    }
}
