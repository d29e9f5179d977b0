//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/star"
//!
//! [acquisition]
//! kind = "star"
//! n_cycles = 20
//!
//! [propagation]
//! interval = 10
//! ```
//!
//! Every section is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionParams, ConfigurationKind, DEFAULT_FOV_MM};
use crate::diffeo2d::PropagationParams;
use crate::phantom::PhantomSpec;
use crate::recon3d::ReconstructionParams;
use crate::volumes::GridSpec;
use crate::{io, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSection {
    pub semi_axes: [f64; 3],
    pub center: [f64; 3],
    pub breathing_period: f64,
    pub n_cycles_breathing: usize,
    pub amplitude: f64,
    pub translation_amplitude: f64,
    /// Jitter seed; the run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for PhantomSection {
    fn default() -> Self {
        let d = PhantomSpec::default();
        Self {
            semi_axes: d.semi_axes,
            center: d.center,
            breathing_period: d.breathing_period,
            n_cycles_breathing: d.n_cycles_breathing,
            amplitude: d.amplitude,
            translation_amplitude: d.translation_amplitude,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    #[serde(default = "default_kind")]
    pub kind: ConfigurationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_spacing_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines_pitch_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_spacing_mm: Option<f64>,
    /// Lateral span covered by the planes; 1.6 lateral semi-axes by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent_mm: Option<f64>,
}

fn default_kind() -> ConfigurationKind {
    ConfigurationKind::Star
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            slice_time_ms: None,
            thickness_mm: None,
            pixel_spacing_mm: None,
            n_cycles: None,
            fov_mm: None,
            lines_pitch_mm: None,
            grid_spacing_mm: None,
            extent_mm: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov_mm: Option<f64>,
    /// Isotropic voxel size; the in-plane resolution when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_mm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacterizeSection {
    pub radius_mm: f64,
}

impl Default for CharacterizeSection {
    fn default() -> Self {
        Self { radius_mm: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameVolumes {
    /// Reconstructed labels only.
    Labels,
    /// Labels, displacement fields and Jacobian maps.
    All,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub frame_volumes: FrameVolumes,
    /// Write every acquired slice image and mask.
    pub slices: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            frame_volumes: FrameVolumes::Labels,
            slices: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses the available cores.
    pub threads: usize,
    pub phantom: PhantomSection,
    pub acquisition: AcquisitionSection,
    pub grid: GridSection,
    pub propagation: PropagationParams,
    pub reconstruction: ReconstructionParams,
    pub characterize: CharacterizeSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            threads: 0,
            phantom: PhantomSection::default(),
            acquisition: AcquisitionSection::default(),
            grid: GridSection::default(),
            propagation: PropagationParams::default(),
            reconstruction: ReconstructionParams::default(),
            characterize: CharacterizeSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        let p = &self.phantom;
        PhantomSpec {
            semi_axes: p.semi_axes,
            center: p.center,
            breathing_period: p.breathing_period,
            n_cycles_breathing: p.n_cycles_breathing,
            amplitude: p.amplitude,
            translation_amplitude: p.translation_amplitude,
            seed: p.seed.unwrap_or(self.seed),
        }
    }

    pub fn acquisition_params(&self) -> AcquisitionParams {
        let a = &self.acquisition;
        let d = AcquisitionParams::defaults(a.kind);
        AcquisitionParams {
            slice_time_ms: a.slice_time_ms.unwrap_or(d.slice_time_ms),
            thickness_mm: a.thickness_mm.unwrap_or(d.thickness_mm),
            pixel_spacing_mm: a.pixel_spacing_mm.unwrap_or(d.pixel_spacing_mm),
            n_cycles: a.n_cycles.unwrap_or(d.n_cycles),
            fov_mm: a.fov_mm.unwrap_or(d.fov_mm),
            lines_pitch_mm: a.lines_pitch_mm.unwrap_or(d.lines_pitch_mm),
            grid_spacing_mm: a.grid_spacing_mm.or(d.grid_spacing_mm),
        }
    }

    pub fn subject_extent(&self) -> f64 {
        self.acquisition.extent_mm.unwrap_or(1.6 * self.phantom.semi_axes[1])
    }

    /// Isotropic reconstruction grid centred on the phantom.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        let fov = self.grid.fov_mm.unwrap_or(DEFAULT_FOV_MM);
        let spacing = self
            .grid
            .spacing_mm
            .unwrap_or_else(|| self.acquisition_params().pixel_spacing_mm);
        positive("grid.fov_mm", fov)?;
        positive("grid.spacing_mm", spacing)?;
        let n = (fov / spacing - 1e-9).ceil() as usize;
        GridSpec::centered([n; 3], spacing, self.phantom.center)
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom_spec().validate()?;
        let a = self.acquisition_params();
        positive("acquisition.slice_time_ms", a.slice_time_ms)?;
        positive("acquisition.thickness_mm", a.thickness_mm)?;
        positive("acquisition.pixel_spacing_mm", a.pixel_spacing_mm)?;
        positive("acquisition.fov_mm", a.fov_mm)?;
        positive("acquisition.lines_pitch_mm", a.lines_pitch_mm)?;
        if let Some(s) = a.grid_spacing_mm {
            positive("acquisition.grid_spacing_mm", s)?;
        }
        positive("acquisition.extent_mm", self.subject_extent())?;
        if a.n_cycles < 2 {
            return Err(Error::Config("acquisition.n_cycles must be >= 2".into()));
        }
        self.grid_spec()?;
        if self.propagation.interval == 0 {
            return Err(Error::Config("propagation.interval must be >= 1".into()));
        }
        positive("propagation.gamma", self.propagation.gamma)?;
        self.propagation.registration.validate()?;
        self.reconstruction.validate()?;
        positive("characterize.radius_mm", self.characterize.radius_mm)?;
        Ok(())
    }
}
