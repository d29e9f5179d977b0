//! End-to-end run: phantom, acquisition, propagation, temporal filling,
//! reconstruction, characterisation and reports.
//!
//! A run directory holds
//!
//! ```text
//! config.toml
//! acquisition/  planes.csv schedule.csv slices/
//! propagation/  report.csv diagnostics.csv masks/
//! temporal/     matrix.csv zeta.csv zeta_raw.csv masks/
//! template/     labels.vol mesh.ply
//! frames/       t0003_labels.vol ...
//! frames.csv failures.csv sigma_j.vol sigma_j.ply summary.json timings.csv
//! ```
//!
//! Everything except `timings.csv` is a deterministic function of the
//! configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acquire_series, make_configuration, AcquiredSeries, ConfigurationKind, PlaneConfiguration};
use crate::characterize::{extract_mesh, jacobian_map, mean_abs_deviation, project_to_mesh, SigmaAccumulator, SurfaceMesh};
use crate::config::{FrameVolumes, RunConfig};
use crate::diffeo2d::{propagate_plane, MaskSource, PropagatedPlane, PropagationDiagnostics};
use crate::io::{self, cell, Table};
use crate::metrics::{mean_sd, ravd, surface_distances};
use crate::phantom::{phantom_mask_3d, PhantomSpec};
use crate::recon3d::{build_skeleton, register_partial, warp_template, ReconstructionResult, StaticTemplate};
use crate::temporal::{assemble_matrix, interpolate_missing, valid_band, zeta_series, zeta_stats, MaskMatrix, ZetaRecord};
use crate::volumes::{subvoxel_boundary, GridSpec, ScalarVolume};
use crate::{Error, Point3, Result};

/// Name of the per-vertex channel carrying the projected sigma map.
pub const SIGMA_CHANNEL: &str = "sigma_j";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub t_idx: usize,
    pub time_s: f64,
    pub translation_mm: [f64; 3],
    /// Against the ground-truth voxel count at the same instant.
    pub ravd_pct: f64,
    pub hd_mm: f64,
    pub md_mm: f64,
    pub dice: f64,
    /// Mean secant discrepancy of the filled masks at this instant.
    pub zeta_mm: Option<f64>,
    pub mean_abs_j_minus_1: f64,
    pub min_j: f64,
    pub final_cost: f64,
    pub fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameFailure {
    pub t_idx: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationSummary {
    pub min_dice: f64,
    pub mean_dice: f64,
    /// Manual masks reproduced exactly.
    pub endpoints_exact: bool,
    pub single_branch: usize,
    pub diagnostics: PropagationDiagnostics,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub kind: ConfigurationKind,
    pub n_planes: usize,
    pub n_cycles: usize,
    pub expected_frames: usize,
    pub output_dir: PathBuf,
    pub frames: Vec<FrameReport>,
    pub failures: Vec<FrameFailure>,
    pub propagation: PropagationSummary,
    pub interpolation_fallbacks: usize,
    pub zeta_raw: Option<(f64, f64, usize)>,
    pub zeta_filled: Option<(f64, f64, usize)>,
    pub template_voxels: usize,
    pub mesh_flagged: bool,
    pub sigma_j: Option<ScalarVolume>,
    /// Template surface with the projected sigma map as a channel.
    pub mesh: SurfaceMesh,
    pub timings: Vec<(String, f64)>,
}

impl RunSummary {
    pub fn all_frames_completed(&self) -> bool {
        self.failures.is_empty() && self.frames.len() == self.expected_frames
    }
}

#[derive(Serialize)]
struct Stat {
    mean: f64,
    sd: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.collect();
        (!v.is_empty()).then(|| {
            let (mean, sd) = mean_sd(&v);
            Stat { mean, sd }
        })
    }
}

#[derive(Serialize)]
struct ConfigurationSummary {
    n_planes: usize,
    n_cycles: usize,
    frames_expected: usize,
    frames_completed: usize,
    frames_failed: usize,
    ravd_pct: Option<Stat>,
    hd_mm: Option<Stat>,
    md_mm: Option<Stat>,
    dice: Option<Stat>,
    mean_abs_j_minus_1: Option<Stat>,
    zeta_raw_mm: Option<Stat>,
    zeta_filled_mm: Option<Stat>,
    propagation: PropagationSummary,
    interpolation_fallbacks: usize,
    template_voxels: usize,
    mesh_flagged: bool,
}

#[derive(Serialize)]
struct SummaryFile {
    seed: u64,
    configurations: BTreeMap<String, ConfigurationSummary>,
}

struct Clock {
    timings: Vec<(String, f64)>,
    start: Instant,
}

impl Clock {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            start: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push((stage.to_string(), (now - self.start).as_secs_f64()));
        log::info!("{stage}: {:.1} s", (now - self.start).as_secs_f64());
        self.start = now;
    }
}

/// Run the whole chain, writing into `config.output_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run_inner(config))
    } else {
        run_inner(config)
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn run_inner(config: &RunConfig) -> Result<RunSummary> {
    let out = config.output_dir.clone();
    let mut clock = Clock::new();
    stage("output", io::create_dir(&out))?;
    stage("output", io::write_text(&out.join("config.toml"), &config.to_toml()))?;

    let spec = config.phantom_spec();
    let grid = stage("grid", config.grid_spec())?;
    let params = config.acquisition_params();
    let center = Point3::from(spec.center);
    let plane_config = stage(
        "acquisition",
        make_configuration(config.acquisition.kind, config.subject_extent(), center, &params),
    )?;
    let series = stage("acquisition", acquire_series(&plane_config, &spec))?;
    stage("acquisition", write_acquisition(&out.join("acquisition"), &series, config.output.slices))?;
    clock.lap("acquisition");

    let spacing = params.pixel_spacing_mm;
    let propagated = stage("propagation", propagate_all(&series, spacing, config))?;
    let propagation = stage(
        "propagation",
        write_propagation(&out.join("propagation"), &series, &propagated, spacing),
    )?;
    clock.lap("propagation");

    let n_p = plane_config.n_planes();
    let n_c = plane_config.n_cycles;
    let masks: Vec<Vec<_>> = propagated.into_iter().map(|p| p.masks).collect();
    let raw = stage("temporal", assemble_matrix(&masks, n_c))?;
    drop(masks);
    let filled = stage(
        "temporal",
        interpolate_missing(&raw, &vec![[spacing; 2]; n_p], &config.propagation.registration),
    )?;
    let frames = &plane_config.frames;
    let zeta_raw = zeta_series(frames, n_p, n_c, |t, p| Some(raw.nearest_acquired(t, p)));
    let zeta_filled = zeta_series(frames, n_p, n_c, |t, p| filled.mask(t, p));
    stage(
        "temporal",
        write_temporal(&out.join("temporal"), &filled, &series, &zeta_raw, &zeta_filled),
    )?;
    let interpolation_fallbacks = (0..filled.n_instants())
        .flat_map(|t| (0..n_p).map(move |p| (t, p)))
        .filter(|&(t, p)| filled.slot(t, p).fallback)
        .count();
    drop(raw);
    clock.lap("temporal");

    let rest = stage("template", phantom_mask_3d(&spec, 0.0, &grid))?;
    let template = stage("template", StaticTemplate::new(rest))?;
    let (mut mesh, mesh_flagged) = stage("template", extract_mesh(&template.labels))?;
    let tdir = out.join("template");
    stage("template", io::create_dir(&tdir))?;
    stage("template", io::write_labels(&tdir.join("labels.vol"), &template.labels))?;
    stage("template", io::write_ply(&tdir.join("mesh.ply"), &mesh, None))?;
    clock.lap("template");

    let mut zeta_by_frame: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &zeta_filled {
        if let Some(z) = r.zeta_mm {
            zeta_by_frame.entry(r.t_idx).or_default().push(z);
        }
    }
    let ctx = FrameContext {
        config,
        spec: &spec,
        grid: &grid,
        template: &template,
        frames,
        matrix: &filled,
        series: &series,
        zeta: &zeta_by_frame,
        dir: out.join("frames"),
    };
    stage("reconstruction", io::create_dir(&ctx.dir))?;
    let (reports, failures, acc) = stage("reconstruction", reconstruct_frames(&ctx))?;
    drop(ctx);
    stage("reconstruction", write_frames(&out, &reports, &failures))?;
    clock.lap("reconstruction");

    let sigma_j = if acc.count() >= 2 {
        let sigma = stage("characterize", acc.sigma())?;
        let (values, _) = stage(
            "characterize",
            project_to_mesh(&sigma, &mesh, config.characterize.radius_mm),
        )?;
        mesh.set_channel(SIGMA_CHANNEL, values);
        stage("characterize", io::write_scalar(&out.join("sigma_j.vol"), &sigma))?;
        stage("characterize", io::write_ply(&out.join("sigma_j.ply"), &mesh, Some(SIGMA_CHANNEL)))?;
        Some(sigma)
    } else {
        log::warn!("fewer than two reconstructed frames, no sigma map");
        None
    };
    clock.lap("characterize");

    let summary = RunSummary {
        kind: plane_config.kind,
        n_planes: n_p,
        n_cycles: n_c,
        expected_frames: plane_config.expected_frames(),
        output_dir: out.clone(),
        frames: reports,
        failures,
        propagation,
        interpolation_fallbacks,
        zeta_raw: zeta_stats(&zeta_raw),
        zeta_filled: zeta_stats(&zeta_filled),
        template_voxels: template.labels.count(),
        mesh_flagged,
        sigma_j,
        mesh,
        timings: Vec::new(),
    };
    stage("report", write_summary(&out.join("summary.json"), config.seed, &summary, &zeta_raw, &zeta_filled))?;
    clock.lap("report");
    let mut t = Table::new(&["stage", "seconds"]);
    for (s, v) in &clock.timings {
        t.row(&[s.clone(), format!("{v:.3}")]);
    }
    stage("report", t.write(&out.join("timings.csv")))?;
    Ok(RunSummary {
        timings: clock.timings,
        ..summary
    })
}

fn write_acquisition(dir: &Path, series: &AcquiredSeries, slices: bool) -> Result<()> {
    io::create_dir(dir)?;
    let mut planes = Table::new(&[
        "p", "cx", "cy", "cz", "ux", "uy", "uz", "vx", "vy", "vz", "width", "height", "spacing_mm", "thickness_mm",
    ]);
    for (p, f) in series.config.frames.iter().enumerate() {
        let (c, u, v) = (f.center(), f.u_axis(), f.v_axis());
        let mut row = vec![p.to_string()];
        row.extend([c, u, v].iter().flat_map(|a| a.iter().map(|x| cell(Some(*x)))));
        row.extend([f.dims[0].to_string(), f.dims[1].to_string()]);
        row.extend([cell(Some(f.spacing[0])), cell(Some(f.thickness))]);
        planes.row(&row);
    }
    planes.write(&dir.join("planes.csv"))?;

    let mut schedule = Table::new(&["t_idx", "k", "p", "t_ms", "image", "mask"]);
    if slices {
        io::create_dir(&dir.join("slices"))?;
    }
    for e in &series.schedule.entries {
        let s = series.sample(e.k, e.p);
        let spacing = series.config.frames[e.p].spacing[0];
        let (image, mask) = if slices {
            let image = format!("slices/t{:04}_image.vol", e.t_idx);
            let mask = format!("slices/t{:04}_mask.vol", e.t_idx);
            io::write_image(&dir.join(&image), &s.image, spacing)?;
            io::write_mask(&dir.join(&mask), &s.mask, spacing)?;
            (image, mask)
        } else {
            (String::new(), String::new())
        };
        schedule.row(&[
            e.t_idx.to_string(),
            e.k.to_string(),
            e.p.to_string(),
            format!("{:.3}", e.t * 1000.0),
            image,
            mask,
        ]);
    }
    schedule.write(&dir.join("schedule.csv"))
}

fn propagate_all(series: &AcquiredSeries, spacing: f64, config: &RunConfig) -> Result<Vec<PropagatedPlane>> {
    series
        .planes
        .par_iter()
        .map(|plane| {
            let images: Vec<_> = plane.iter().map(|s| s.image.clone()).collect();
            propagate_plane(&images, |k| plane[k].mask.clone(), [spacing; 2], &config.propagation)
        })
        .collect()
}

fn source_name(s: MaskSource) -> &'static str {
    match s {
        MaskSource::Manual => "manual",
        MaskSource::Fused => "fused",
        MaskSource::SingleBranch => "single_branch",
    }
}

fn write_propagation(
    dir: &Path,
    series: &AcquiredSeries,
    planes: &[PropagatedPlane],
    spacing: f64,
) -> Result<PropagationSummary> {
    io::create_dir(&dir.join("masks"))?;
    let mut report = Table::new(&["p", "k", "source", "alpha", "dice", "dice_forward", "dice_backward", "mask"]);
    let mut diagnostics = PropagationDiagnostics::default();
    let mut dice = Vec::new();
    let mut endpoints_exact = true;
    let mut single_branch = 0;
    for (p, plane) in planes.iter().enumerate() {
        diagnostics.merge(&plane.diagnostics);
        for (k, mask) in plane.masks.iter().enumerate() {
            let truth = &series.sample(k, p).mask;
            let d = mask.dice(truth);
            match plane.sources[k] {
                MaskSource::Manual => endpoints_exact &= mask == truth,
                MaskSource::Fused => dice.push(d),
                MaskSource::SingleBranch => {
                    dice.push(d);
                    single_branch += 1;
                }
            }
            let name = format!("masks/p{p}_k{k:03}.vol");
            io::write_mask(&dir.join(&name), mask, spacing)?;
            report.row(&[
                p.to_string(),
                k.to_string(),
                source_name(plane.sources[k]).into(),
                cell(plane.alpha[k]),
                cell(Some(d)),
                cell(plane.forward_only[k].as_ref().map(|m| m.dice(truth))),
                cell(plane.backward_only[k].as_ref().map(|m| m.dice(truth))),
                name,
            ]);
        }
    }
    report.write(&dir.join("report.csv"))?;
    let mut diag = Table::new(&["p", "registrations", "unconverged", "max_inverse_residual_px", "min_jacobian"]);
    for (p, plane) in planes.iter().enumerate() {
        let d = &plane.diagnostics;
        diag.row(&[
            p.to_string(),
            d.registrations.to_string(),
            d.unconverged.to_string(),
            cell(Some(d.max_inverse_residual)),
            cell(Some(d.min_jacobian)),
        ]);
    }
    diag.write(&dir.join("diagnostics.csv"))?;
    let (min_dice, mean_dice) = if dice.is_empty() {
        (1.0, 1.0)
    } else {
        (dice.iter().copied().fold(f64::INFINITY, f64::min), mean_sd(&dice).0)
    };
    Ok(PropagationSummary {
        min_dice,
        mean_dice,
        endpoints_exact,
        single_branch,
        diagnostics,
    })
}

fn zeta_table(records: &[ZetaRecord]) -> Table {
    let mut t = Table::new(&["t_idx", "i", "j", "zeta_mm"]);
    for r in records {
        t.row(&[r.t_idx.to_string(), r.i.to_string(), r.j.to_string(), cell(r.zeta_mm)]);
    }
    t
}

fn write_temporal(
    dir: &Path,
    filled: &MaskMatrix,
    series: &AcquiredSeries,
    zeta_raw: &[ZetaRecord],
    zeta_filled: &[ZetaRecord],
) -> Result<()> {
    io::create_dir(&dir.join("masks"))?;
    let mut t = Table::new(&["t_idx", "p", "tag", "fallback", "mask"]);
    for t_idx in 0..filled.n_instants() {
        for p in 0..filled.n_planes {
            let slot = filled.slot(t_idx, p);
            let path = match &slot.mask {
                Some(m) => {
                    let name = format!("masks/t{t_idx:04}_p{p}.vol");
                    io::write_mask(&dir.join(&name), m, series.config.frames[p].spacing[0])?;
                    name
                }
                None => String::new(),
            };
            t.row(&[
                t_idx.to_string(),
                p.to_string(),
                slot.tag.name().into(),
                (slot.fallback as u8).to_string(),
                path,
            ]);
        }
    }
    t.write(&dir.join("matrix.csv"))?;
    zeta_table(zeta_filled).write(&dir.join("zeta.csv"))?;
    zeta_table(zeta_raw).write(&dir.join("zeta_raw.csv"))
}

struct FrameContext<'a> {
    config: &'a RunConfig,
    spec: &'a PhantomSpec,
    grid: &'a GridSpec,
    template: &'a StaticTemplate,
    frames: &'a [crate::volumes::PlaneFrame],
    matrix: &'a MaskMatrix,
    series: &'a AcquiredSeries,
    zeta: &'a BTreeMap<usize, Vec<f64>>,
    dir: PathBuf,
}

struct FrameOutcome {
    report: FrameReport,
    jacobian: ScalarVolume,
}

fn reconstruct_one(ctx: &FrameContext, t_idx: usize) -> Result<FrameOutcome> {
    let skeleton = build_skeleton(ctx.matrix, t_idx, ctx.frames, ctx.grid)?;
    let r: ReconstructionResult = register_partial(ctx.template, &skeleton, &ctx.config.reconstruction)?;
    let jacobian = jacobian_map(&r.displacement);
    // organ voxels in the domain of h: the template pulled back without the shift
    let organ = warp_template(ctx.template, &r.displacement, &Point3::zeros(), ctx.grid);
    let min_j = jacobian
        .data()
        .iter()
        .zip(organ.data())
        .filter(|(_, &l)| l != 0)
        .map(|(j, _)| *j)
        .fold(f64::INFINITY, f64::min);
    if !(min_j > 0.0) {
        return Err(Error::RegistrationAborted(format!(
            "non-positive Jacobian {min_j:.4} inside the organ at instant {t_idx}"
        )));
    }
    let time_s = ctx.series.schedule.instant(t_idx);
    let truth = phantom_mask_3d(ctx.spec, time_s, ctx.grid)?;
    let (hd, md) = surface_distances(&skeleton.contour, &subvoxel_boundary(&r.labels))?;
    let zeta_mm = ctx.zeta.get(&t_idx).map(|v| mean_sd(v).0);
    let report = FrameReport {
        t_idx,
        time_s,
        translation_mm: r.translation.into(),
        ravd_pct: ravd(truth.count(), r.labels.count())?,
        hd_mm: hd,
        md_mm: md,
        dice: r.labels.dice(&truth)?,
        zeta_mm,
        mean_abs_j_minus_1: mean_abs_deviation(&jacobian, &organ.eroded(1))?,
        min_j,
        final_cost: r.final_cost,
        fallbacks: r.fallbacks,
    };
    let stem = format!("t{t_idx:04}");
    match ctx.config.output.frame_volumes {
        FrameVolumes::None => {}
        FrameVolumes::Labels => io::write_labels(&ctx.dir.join(format!("{stem}_labels.vol")), &r.labels)?,
        FrameVolumes::All => {
            io::write_labels(&ctx.dir.join(format!("{stem}_labels.vol")), &r.labels)?;
            io::write_vector(&ctx.dir.join(format!("{stem}_displacement.vol")), &r.displacement)?;
            io::write_scalar(&ctx.dir.join(format!("{stem}_jacobian.vol")), &jacobian)?;
        }
    }
    Ok(FrameOutcome { report, jacobian })
}

/// Frames are registered a pool-width at a time and folded into the sigma
/// accumulator in instant order, so results do not depend on thread count.
fn reconstruct_frames(ctx: &FrameContext) -> Result<(Vec<FrameReport>, Vec<FrameFailure>, SigmaAccumulator)> {
    let (lo, hi) = valid_band(ctx.matrix.n_planes, ctx.matrix.n_cycles);
    let instants: Vec<usize> = (lo..=hi).collect();
    let width = rayon::current_num_threads().max(1);
    let mut acc = SigmaAccumulator::new(ctx.grid.clone());
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for chunk in instants.chunks(width) {
        let outcomes: Vec<_> = chunk.par_iter().map(|&t| (t, reconstruct_one(ctx, t))).collect();
        for (t_idx, outcome) in outcomes {
            match outcome {
                Ok(o) => {
                    log::info!(
                        "frame {t_idx}: ravd {:.2}% hd {:.2} md {:.2}",
                        o.report.ravd_pct,
                        o.report.hd_mm,
                        o.report.md_mm
                    );
                    acc.add(&o.jacobian)?;
                    reports.push(o.report);
                }
                Err(e) => {
                    log::warn!("frame {t_idx} skipped: {e}");
                    failures.push(FrameFailure {
                        t_idx,
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    Ok((reports, failures, acc))
}

/// Column order of `frames.csv`.
pub const FRAME_COLUMNS: [&str; 14] = [
    "t_idx",
    "time_s",
    "tx_mm",
    "ty_mm",
    "tz_mm",
    "ravd_pct",
    "hd_mm",
    "md_mm",
    "dice",
    "zeta_mm",
    "mean_abs_j_minus_1",
    "min_j",
    "final_cost",
    "fallbacks",
];

fn write_frames(dir: &Path, reports: &[FrameReport], failures: &[FrameFailure]) -> Result<()> {
    let mut t = Table::new(&FRAME_COLUMNS);
    for r in reports {
        let [tx, ty, tz] = r.translation_mm;
        let mut row = vec![r.t_idx.to_string()];
        row.extend(
            [r.time_s, tx, ty, tz, r.ravd_pct, r.hd_mm, r.md_mm, r.dice]
                .iter()
                .map(|v| cell(Some(*v))),
        );
        row.push(cell(r.zeta_mm));
        row.extend([r.mean_abs_j_minus_1, r.min_j, r.final_cost].iter().map(|v| cell(Some(*v))));
        row.push(r.fallbacks.to_string());
        t.row(&row);
    }
    t.write(&dir.join("frames.csv"))?;
    let mut f = Table::new(&["t_idx", "error"]);
    for e in failures {
        f.row(&[e.t_idx.to_string(), format!("\"{}\"", e.error.replace('"', "'"))]);
    }
    f.write(&dir.join("failures.csv"))
}

fn write_summary(
    path: &Path,
    seed: u64,
    s: &RunSummary,
    zeta_raw: &[ZetaRecord],
    zeta_filled: &[ZetaRecord],
) -> Result<()> {
    let f = &s.frames;
    let entry = ConfigurationSummary {
        n_planes: s.n_planes,
        n_cycles: s.n_cycles,
        frames_expected: s.expected_frames,
        frames_completed: f.len(),
        frames_failed: s.failures.len(),
        ravd_pct: Stat::of(f.iter().map(|r| r.ravd_pct)),
        hd_mm: Stat::of(f.iter().map(|r| r.hd_mm)),
        md_mm: Stat::of(f.iter().map(|r| r.md_mm)),
        dice: Stat::of(f.iter().map(|r| r.dice)),
        mean_abs_j_minus_1: Stat::of(f.iter().map(|r| r.mean_abs_j_minus_1)),
        zeta_raw_mm: Stat::of(zeta_raw.iter().filter_map(|r| r.zeta_mm)),
        zeta_filled_mm: Stat::of(zeta_filled.iter().filter_map(|r| r.zeta_mm)),
        propagation: s.propagation.clone(),
        interpolation_fallbacks: s.interpolation_fallbacks,
        template_voxels: s.template_voxels,
        mesh_flagged: s.mesh_flagged,
    };
    let file = SummaryFile {
        seed,
        configurations: BTreeMap::from([(s.kind.name().to_string(), entry)]),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::format(path, e.to_string()))?;
    io::write_text(path, &(text + "\n"))
}

/// Table-2 style digest of a finished run directory, recomputed from
/// `frames.csv`.
pub fn summarize_run(dir: &Path) -> Result<String> {
    let path = dir.join("frames.csv");
    let text = io::read_text(&path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::format(&path, "empty table"))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::format(&path, format!("missing column {name}")))
    };
    let wanted = ["ravd_pct", "hd_mm", "md_mm", "dice", "mean_abs_j_minus_1"];
    let idx = wanted.iter().map(|w| col(w)).collect::<Result<Vec<_>>>()?;
    let mut values = vec![Vec::new(); wanted.len()];
    let mut n = 0;
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        n += 1;
        for (v, &i) in values.iter_mut().zip(&idx) {
            let x: f64 = cells
                .get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::format(&path, format!("bad cell in row {n}")))?;
            v.push(x);
        }
    }
    let mut out = format!("frames {n}\n");
    for (name, v) in wanted.iter().zip(&values) {
        if v.is_empty() {
            out.push_str(&format!("{name:<20} -\n"));
        } else {
            let (m, s) = mean_sd(v);
            out.push_str(&format!("{name:<20} {m:.3} +/- {s:.3}\n"));
        }
    }
    Ok(out)
}

/// Number of frames a configuration yields, for planning.
pub fn planned_frames(config: &RunConfig) -> Result<usize> {
    let params = config.acquisition_params();
    let plane_config: PlaneConfiguration = make_configuration(
        config.acquisition.kind,
        config.subject_extent(),
        Point3::from(config.phantom.center),
        &params,
    )?;
    Ok(plane_config.expected_frames())
}
