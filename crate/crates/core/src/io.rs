//! File formats: header + raw volumes, CSV tables and ASCII PLY meshes.
//!
//! A volume is a small text header
//!
//! ```text
//! dims 96 96 96
//! spacing 1.09
//! origin -51.775 -51.775 -51.775
//! dtype u8
//! byteorder little
//! components 1
//! data labels.raw
//! ```
//!
//! next to a raw file holding the samples x-fastest, components interleaved.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::characterize::SurfaceMesh;
use crate::volumes::{GridSpec, Image2D, LabelVolume, Mask2D, Raster, ScalarVolume, VectorVolume, VolumeGrid};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    U8,
    F32,
}

impl DType {
    fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::F32 => "f32",
        }
    }
}

/// Decoded volume file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawVolume {
    pub spec: GridSpec,
    pub dtype: DType,
    pub components: usize,
    pub data: Vec<f64>,
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn raw_path(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

fn write_header(path: &Path, spec: &GridSpec, dtype: DType, components: usize, bytes: &[u8]) -> Result<()> {
    let raw = raw_path(path);
    let raw_name = raw.file_name().and_then(|n| n.to_str()).unwrap_or("data.raw");
    let [ox, oy, oz] = spec.origin;
    let text = format!(
        "dims {} {} {}\nspacing {}\norigin {} {} {}\ndtype {}\nbyteorder little\ncomponents {}\ndata {}\n",
        spec.dims[0],
        spec.dims[1],
        spec.dims[2],
        spec.spacing,
        ox,
        oy,
        oz,
        dtype.name(),
        components,
        raw_name
    );
    write_text(path, &text)?;
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))
}

fn f32_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

pub fn write_labels(path: &Path, vol: &LabelVolume) -> Result<()> {
    write_header(path, vol.spec(), DType::U8, 1, vol.data())
}

pub fn write_scalar(path: &Path, vol: &ScalarVolume) -> Result<()> {
    write_header(path, vol.spec(), DType::F32, 1, &f32_bytes(vol.data().iter().copied()))
}

pub fn write_vector(path: &Path, vol: &VectorVolume) -> Result<()> {
    write_header(path, vol.spec(), DType::F32, 3, &f32_bytes(vol.data().iter().flatten().copied()))
}

fn slice_spec(width: usize, height: usize, spacing: f64) -> Result<GridSpec> {
    GridSpec::new([width, height, 1], spacing, [0.0; 3])
}

/// 2D mask stored as a one-slice u8 volume in pixel coordinates.
pub fn write_mask(path: &Path, mask: &Mask2D, spacing: f64) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&b| b as u8).collect();
    write_header(path, &slice_spec(mask.width(), mask.height(), spacing)?, DType::U8, 1, &bytes)
}

pub fn write_image(path: &Path, image: &Image2D, spacing: f64) -> Result<()> {
    let spec = slice_spec(image.width(), image.height(), spacing)?;
    write_header(path, &spec, DType::F32, 1, &f32_bytes(image.data().iter().copied()))
}

pub fn read_volume(path: &Path) -> Result<RawVolume> {
    let text = read_text(path)?;
    let bad = |reason: &str| Error::format(path, reason);
    let mut dims = None;
    let mut spacing = None;
    let mut origin = None;
    let mut dtype = None;
    let mut components = 1usize;
    let mut data = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number in `{line}`"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(bad(&format!("`{key}` expects {n} values")));
            }
            Ok(v)
        };
        match key {
            "dims" => {
                let v = nums(3)?;
                dims = Some([v[0] as usize, v[1] as usize, v[2] as usize]);
            }
            "spacing" => spacing = Some(nums(1)?[0]),
            "origin" => {
                let v = nums(3)?;
                origin = Some([v[0], v[1], v[2]]);
            }
            "dtype" => {
                dtype = Some(match rest {
                    "u8" => DType::U8,
                    "f32" => DType::F32,
                    other => return Err(bad(&format!("unsupported dtype {other}"))),
                })
            }
            "byteorder" if rest == "little" => {}
            "byteorder" => return Err(bad("only little-endian data is supported")),
            "components" => components = nums(1)?[0] as usize,
            "data" => data = Some(rest.to_string()),
            other => return Err(bad(&format!("unknown header key `{other}`"))),
        }
    }
    let spec = GridSpec::new(
        dims.ok_or_else(|| bad("missing dims"))?,
        spacing.ok_or_else(|| bad("missing spacing"))?,
        origin.unwrap_or([0.0; 3]),
    )?;
    let dtype = dtype.ok_or_else(|| bad("missing dtype"))?;
    let raw = path.with_file_name(data.ok_or_else(|| bad("missing data"))?);
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let n = spec.len() * components;
    let values: Vec<f64> = match dtype {
        DType::U8 => bytes.iter().map(|&b| b as f64).collect(),
        DType::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    if values.len() != n {
        return Err(Error::format(&raw, format!("expected {n} samples, found {}", values.len())));
    }
    Ok(RawVolume {
        spec,
        dtype,
        components,
        data: values,
    })
}

pub fn read_labels(path: &Path) -> Result<LabelVolume> {
    let v = read_volume(path)?;
    if v.components != 1 {
        return Err(Error::format(path, "label volume must have one component"));
    }
    VolumeGrid::from_vec(v.spec, v.data.iter().map(|&x| (x != 0.0) as u8).collect())
}

pub fn read_scalar(path: &Path) -> Result<ScalarVolume> {
    let v = read_volume(path)?;
    if v.components != 1 {
        return Err(Error::format(path, "scalar volume must have one component"));
    }
    VolumeGrid::from_vec(v.spec, v.data)
}

pub fn read_mask(path: &Path) -> Result<Mask2D> {
    let v = read_volume(path)?;
    if v.spec.dims[2] != 1 || v.components != 1 {
        return Err(Error::format(path, "mask must be a single slice"));
    }
    Raster::from_vec(v.spec.dims[0], v.spec.dims[1], v.data.iter().map(|&x| x != 0.0).collect())
}

/// Comma-separated table with a header row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            text: columns.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.text)
    }
}

/// Fixed-precision float cell; empty for missing or non-finite values.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => String::new(),
    }
}

/// ASCII PLY; `channel` (if present on the mesh) is written as `quality`.
pub fn write_ply(path: &Path, mesh: &SurfaceMesh, channel: Option<&str>) -> Result<()> {
    let values = channel.and_then(|c| mesh.channel(c));
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if values.is_some() {
        s.push_str("property float quality\n");
    }
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, p) in mesh.vertices.iter().enumerate() {
        let _ = write!(s, "{:.5} {:.5} {:.5}", p.x, p.y, p.z);
        if let Some(v) = values {
            let _ = write!(s, " {:.6}", v[i]);
        }
        s.push('\n');
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new([4, 3, 2], 1.5, [-1.0, 2.0, 0.25]).unwrap();
        let labels = LabelVolume::from_fn(g.clone(), |i, _| (i % 3 == 0) as u8);
        let p = dir.path().join("a.vol");
        write_labels(&p, &labels).unwrap();
        assert_eq!(read_labels(&p).unwrap(), labels);
        let scalar = ScalarVolume::from_fn(g, |i, _| i as f64 * 0.5);
        let q = dir.path().join("b.vol");
        write_scalar(&q, &scalar).unwrap();
        assert_eq!(read_scalar(&q).unwrap(), scalar);
        let header = read_text(&q).unwrap();
        assert!(header.contains("dtype f32") && header.contains("byteorder little"));
    }

    #[test]
    fn mask_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mask2D::from_fn(5, 4, |i, j| i + j > 3);
        let p = dir.path().join("m.vol");
        write_mask(&p, &m, 1.09).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
        write_text(&p, "dims 5 4 1\nspacing 1\ndtype i16\n").unwrap();
        assert!(matches!(read_volume(&p), Err(Error::Format { .. })));
    }
}
