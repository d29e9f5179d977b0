//! Analytic ground truth: a volume-preserving, breathing ellipsoid.
//!
//! World axes: x anterior-posterior, y lateral, z vertical (superior). At
//! time `t` the rest ellipsoid is stretched by `lambda(t)` along x and by
//! `1/sqrt(lambda(t))` along y and z about its centre, then translated along
//! z. The stretch is `lambda(t) = 1 + amplitude * j_c * s(t)` and the
//! translation `translation_amplitude * j_c * s(t)`, where
//! `s(t) = (1 - cos(2 pi t / period)) / 2` and `j_c` is a seeded per-cycle
//! jitter in `[0.8, 1.2]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::volumes::filter::smooth_raster;
use crate::volumes::{GridSpec, Image2D, LabelVolume, Mask2D, PlaneFrame, Raster};
use crate::{Error, Point3, Result};

pub const INTERIOR_INTENSITY: f64 = 1.0;
pub const EXTERIOR_INTENSITY: f64 = 0.2;
pub const EDGE_BLUR_PX: f64 = 1.0;
pub const NOISE_SIGMA: f64 = 0.02;
const JITTER: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    /// Rest semi-axes (mm) along x, y, z.
    pub semi_axes: [f64; 3],
    /// Rest centre (mm).
    pub center: [f64; 3],
    /// Breathing period (s).
    pub breathing_period: f64,
    /// Number of distinct per-cycle jitter draws; later cycles wrap around.
    pub n_cycles_breathing: usize,
    /// Strain amplitude along x, in `[0, 0.4)`.
    pub amplitude: f64,
    /// Peak vertical translation (mm).
    pub translation_amplitude: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            semi_axes: [30.0, 26.0, 22.0],
            center: [0.0; 3],
            breathing_period: 6.0,
            n_cycles_breathing: 16,
            amplitude: 0.15,
            translation_amplitude: 5.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.semi_axes.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config(format!("semi axes must be > 0: {:?}", self.semi_axes)));
        }
        if !(self.breathing_period > 0.0) {
            return Err(Error::Config("breathing period must be > 0".into()));
        }
        if !(0.0..0.4).contains(&self.amplitude) {
            return Err(Error::Config(format!("amplitude {} outside [0, 0.4)", self.amplitude)));
        }
        if self.n_cycles_breathing == 0 {
            return Err(Error::Config("n_cycles_breathing must be >= 1".into()));
        }
        if !(self.translation_amplitude >= 0.0) {
            return Err(Error::Config("translation amplitude must be >= 0".into()));
        }
        Ok(())
    }

    /// Per-cycle amplitude multipliers, uniform in `[0.8, 1.2]`.
    pub fn jitter_table(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_cycles_breathing)
            .map(|_| rng.random_range(1.0 - JITTER..=1.0 + JITTER))
            .collect()
    }

    /// Smooth breathing waveform in `[0, 1]`, zero at every cycle boundary.
    pub fn waveform(&self, t: f64) -> f64 {
        0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / self.breathing_period).cos())
    }

    pub fn state(&self, t: f64) -> PhantomState {
        let cycle = (t / self.breathing_period).floor().max(0.0) as usize;
        let table = self.jitter_table();
        let jitter = table[cycle % table.len()];
        let drive = jitter * self.waveform(t);
        PhantomState {
            time: t,
            stretch: 1.0 + self.amplitude * drive,
            shift: self.translation_amplitude * drive,
            center: Point3::from(self.center),
            semi_axes: self.semi_axes,
        }
    }

    /// Rest volume (mm^3) of the ellipsoid.
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.semi_axes.iter().product::<f64>()
    }
}

/// Deformation of the phantom at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomState {
    pub time: f64,
    /// Stretch factor along x.
    pub stretch: f64,
    /// Vertical translation (mm).
    pub shift: f64,
    pub center: Point3,
    pub semi_axes: [f64; 3],
}

impl PhantomState {
    fn scales(&self) -> Point3 {
        let c = 1.0 / self.stretch.sqrt();
        Point3::new(self.stretch, c, c)
    }

    /// Rest position to deformed position.
    pub fn forward(&self, p0: &Point3) -> Point3 {
        let d = (p0 - self.center).component_mul(&self.scales());
        self.center + d + Point3::new(0.0, 0.0, self.shift)
    }

    /// Deformed position back to rest position.
    pub fn inverse(&self, p: &Point3) -> Point3 {
        let d = (p - self.center - Point3::new(0.0, 0.0, self.shift)).component_div(&self.scales());
        self.center + d
    }

    /// Determinant of the deformation Jacobian (identically 1).
    pub fn jacobian_det(&self) -> f64 {
        let s = self.scales();
        s.x * s.y * s.z
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let q = self.inverse(p) - self.center;
        let [a, b, c] = self.semi_axes;
        (q.x / a).powi(2) + (q.y / b).powi(2) + (q.z / c).powi(2) <= 1.0
    }

    /// Semi-axes of the deformed ellipsoid.
    pub fn deformed_semi_axes(&self) -> Point3 {
        Point3::from(self.semi_axes).component_mul(&self.scales())
    }

    pub fn deformed_center(&self) -> Point3 {
        self.center + Point3::new(0.0, 0.0, self.shift)
    }
}

/// Rasterise the deformed ellipsoid at time `t` (voxel-centre containment).
pub fn phantom_mask_3d(spec: &PhantomSpec, t: f64, grid: &GridSpec) -> Result<LabelVolume> {
    spec.validate()?;
    let state = spec.state(t);
    let (lo, hi) = grid.center_bounds();
    let c = state.deformed_center();
    let r = state.deformed_semi_axes();
    for a in 0..3 {
        if c[a] - r[a] < lo[a] || c[a] + r[a] > hi[a] {
            return Err(Error::TruncatedPhantom(format!(
                "axis {a}: support [{:.2}, {:.2}] exceeds grid [{:.2}, {:.2}] at t = {t}",
                c[a] - r[a],
                c[a] + r[a],
                lo[a],
                hi[a]
            )));
        }
    }
    Ok(LabelVolume::from_fn(grid.clone(), |_, p| state.contains(&p) as u8))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn slice_seed(spec: &PhantomSpec, t: f64, frame: &PlaneFrame) -> u64 {
    let c = frame.center();
    let n = frame.normal();
    [t, c.x, c.y, c.z, n.x, n.y, n.z]
        .iter()
        .fold(splitmix(spec.seed), |acc, v| splitmix(acc ^ v.to_bits()))
}

/// In-plane restriction of the phantom at time `t`, without image noise.
pub fn phantom_slice_mask(spec: &PhantomSpec, t: f64, frame: &PlaneFrame) -> Mask2D {
    let state = spec.state(t);
    Raster::from_fn(frame.dims[0], frame.dims[1], |i, j| {
        state.contains(&frame.world(i as f64, j as f64))
    })
}

/// Simulated slice: bright interior, darker exterior, blurred edge, noise.
/// The noise realisation is a deterministic function of the phantom seed,
/// the instant and the plane pose.
pub fn phantom_slice(spec: &PhantomSpec, t: f64, frame: &PlaneFrame) -> (Image2D, Mask2D) {
    phantom_slice_with_noise(spec, t, frame, NOISE_SIGMA)
}

pub fn phantom_slice_with_noise(
    spec: &PhantomSpec,
    t: f64,
    frame: &PlaneFrame,
    noise_sigma: f64,
) -> (Image2D, Mask2D) {
    let mask = phantom_slice_mask(spec, t, frame);
    let base = mask.map(|&m| if m { INTERIOR_INTENSITY } else { EXTERIOR_INTENSITY });
    let mut image = smooth_raster(&base, EDGE_BLUR_PX);
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(slice_seed(spec, t, frame));
        let normal = Normal::new(0.0, noise_sigma).expect("finite noise sigma");
        for v in image.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    (image, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::resample_plane_to_world;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::centered([80, 80, 80], 1.0, [0.0; 3]).unwrap()
    }

    fn spec() -> PhantomSpec {
        PhantomSpec {
            seed: 3,
            ..Default::default()
        }
    }

    fn peak_time(s: &PhantomSpec) -> f64 {
        0.5 * s.breathing_period
    }

    #[test]
    fn rest_volume_matches_ellipsoid() {
        let s = spec();
        let g = grid();
        let m = phantom_mask_3d(&s, 0.0, &g).unwrap();
        let vol = m.count() as f64 * g.voxel_volume();
        assert!((vol - s.volume()).abs() / s.volume() < 0.015);
    }

    #[test]
    fn volume_is_conserved_over_time() {
        let s = spec();
        let g = grid();
        let n0 = phantom_mask_3d(&s, 0.0, &g).unwrap().count() as f64;
        for k in 0..12 {
            let t = k as f64 * 0.77;
            let n = phantom_mask_3d(&s, t, &g).unwrap().count() as f64;
            assert!((n - n0).abs() / n0 <= 0.015, "t={t}: {n} vs {n0}");
        }
    }

    #[test]
    fn jacobian_is_exactly_one() {
        let s = spec();
        for k in 0..20 {
            let st = s.state(k as f64 * 0.31);
            assert!((st.jacobian_det() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let s = spec();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let st = s.state(rng.random_range(0.0..30.0));
            let p = Point3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            );
            assert!((st.forward(&st.inverse(&p)) - p).norm() < 1e-9);
            assert!((st.inverse(&st.forward(&p)) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn truncated_phantom_is_rejected() {
        let small = GridSpec::centered([40, 40, 40], 1.0, [0.0; 3]).unwrap();
        assert!(matches!(
            phantom_mask_3d(&spec(), 0.0, &small),
            Err(Error::TruncatedPhantom(_))
        ));
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let s = spec();
        let a = s.jitter_table();
        assert!(a.iter().all(|j| (0.8..=1.2).contains(j)));
        assert_eq!(a, s.jitter_table());
        let other = PhantomSpec { seed: 4, ..s };
        assert_ne!(a, other.jitter_table());
    }

    fn mid_sagittal(dims: usize) -> PlaneFrame {
        PlaneFrame::centered(Point3::zeros(), Point3::x(), Point3::z(), [dims, dims], [1.0, 1.0], 5.0).unwrap()
    }

    #[test]
    fn mid_sagittal_slice_is_the_a_c_ellipse() {
        let s = spec();
        let f = mid_sagittal(81);
        let (_, m) = phantom_slice(&s, 0.0, &f);
        // extent along u (x) and v (z) through the centre pixel
        let row: Vec<usize> = (0..81).filter(|&i| *m.get(i, 40)).collect();
        let col: Vec<usize> = (0..81).filter(|&j| *m.get(40, j)).collect();
        let half_u = (row.len() as f64 - 1.0) / 2.0;
        let half_v = (col.len() as f64 - 1.0) / 2.0;
        assert!((half_u - s.semi_axes[0]).abs() <= 1.0);
        assert!((half_v - s.semi_axes[2]).abs() <= 1.0);
        assert_eq!(m.component_count(), 1);
    }

    #[test]
    fn disjoint_frame_gives_empty_mask() {
        let f = PlaneFrame::centered(
            Point3::new(0.0, 45.0, 0.0),
            Point3::x(),
            Point3::z(),
            [41, 41],
            [1.0, 1.0],
            5.0,
        )
        .unwrap();
        let (_, m) = phantom_slice(&spec(), 1.0, &f);
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn slice_area_tracks_stretch() {
        let s = spec();
        let f = mid_sagittal(101);
        let area = |t: f64| phantom_slice_mask(&s, t, &f).count() as f64;
        let peak = peak_time(&s);
        let lambda = s.state(peak).stretch;
        // analytic ellipse areas: pi * (a*l) * (c/sqrt(l)) over pi * a * c
        let expect = lambda.sqrt();
        let ratio = area(peak) / area(0.0);
        let rest_area = PI * s.semi_axes[0] * s.semi_axes[2];
        assert!((area(0.0) - rest_area).abs() / rest_area < 0.02);
        assert!((ratio - expect).abs() < 0.01, "{ratio} vs {expect}");
    }

    #[test]
    fn image_contrast_and_noise() {
        let s = spec();
        let f = mid_sagittal(81);
        let (img, m) = phantom_slice(&s, 0.0, &f);
        let (img2, _) = phantom_slice(&s, 0.0, &f);
        assert_eq!(img, img2);
        let centre = *img.get(40, 40);
        let corner = *img.get(2, 2);
        assert!((centre - 1.0).abs() < 0.1);
        assert!((corner - 0.2).abs() < 0.1);
        assert!(*m.get(40, 40) && !*m.get(2, 2));
    }

    #[test]
    fn sliced_slab_agrees_with_3d_mask() {
        let s = spec();
        let g = grid();
        let t = 1.3;
        let f = PlaneFrame::centered(Point3::new(0.0, 0.5, 0.0), Point3::x(), Point3::z(), [80, 80], [1.0, 1.0], 5.0)
            .unwrap();
        let m = phantom_slice_mask(&s, t, &f);
        let slab = resample_plane_to_world(&f, &m, &g);
        let full = phantom_mask_3d(&s, t, &g).unwrap();
        // restrict the 3D mask to the same slab
        let restricted = LabelVolume::from_fn(g.clone(), |idx, p| {
            let (_, _, w) = f.to_pixel(&p);
            (full.data()[idx] != 0 && w.abs() < 2.5) as u8
        });
        let dice = slab.dice(&restricted).unwrap();
        assert!(dice >= 0.97, "dice {dice}");
    }
}
