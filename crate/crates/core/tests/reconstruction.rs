use std::time::Instant;

use planerecon::acquisition::{make_configuration, AcquisitionParams, ConfigurationKind};
use planerecon::metrics::surface_distances;
use planerecon::phantom::{phantom_mask_3d, phantom_slice_mask, PhantomSpec};
use planerecon::recon3d::{register_partial, skeleton_from_masks, ReconstructionParams, StaticTemplate};
use planerecon::volumes::{subvoxel_boundary, GridSpec};
use planerecon::Point3;

fn grid() -> GridSpec {
    GridSpec::centered([96, 96, 96], 1.09, [0.0; 3]).unwrap()
}

fn star() -> Vec<planerecon::volumes::PlaneFrame> {
    let kind = ConfigurationKind::Star;
    make_configuration(kind, 41.6, Point3::zeros(), &AcquisitionParams::defaults(kind))
        .unwrap()
        .frames
}

#[test]
fn peak_breathing_frame_is_recovered() {
    let spec = PhantomSpec::default();
    let g = grid();
    let template = StaticTemplate::new(phantom_mask_3d(&spec, 0.0, &g).unwrap()).unwrap();
    let frames = star();
    let t = 0.5 * spec.breathing_period;
    let masks: Vec<_> = frames.iter().map(|f| phantom_slice_mask(&spec, t, f)).collect();
    let refs: Vec<_> = masks.iter().collect();
    let skel = skeleton_from_masks(0, &frames, &refs, &g).unwrap();
    let start = Instant::now();
    let r = register_partial(&template, &skel, &ReconstructionParams::default()).unwrap();
    let truth = phantom_mask_3d(&spec, t, &g).unwrap();
    let dice = r.labels.dice(&truth).unwrap();
    let (hd, md) = surface_distances(&skel.contour, &subvoxel_boundary(&r.labels)).unwrap();
    let ravd = 100.0 * (r.labels.count() as f64 - template.labels.count() as f64).abs() / template.labels.count() as f64;
    println!(
        "dice {dice:.4} hd {hd:.3} md {md:.3} ravd {ravd:.2} T {:?} time {:?} levels {:#?}",
        r.translation,
        start.elapsed(),
        r.levels
    );
    assert!(dice >= 0.95);
    assert!(hd <= 3.0 * 1.09 && md <= 1.09);
    assert!(r.min_check_det > 0.0);
}

#[test]
fn self_registration_is_near_identity() {
    let spec = PhantomSpec::default();
    let g = grid();
    let template = StaticTemplate::new(phantom_mask_3d(&spec, 0.0, &g).unwrap()).unwrap();
    let frames = star();
    let masks: Vec<_> = frames.iter().map(|f| phantom_slice_mask(&spec, 0.0, f)).collect();
    let refs: Vec<_> = masks.iter().collect();
    let skel = skeleton_from_masks(0, &frames, &refs, &g).unwrap();
    let r = register_partial(&template, &skel, &ReconstructionParams::default()).unwrap();
    let (_, md) = surface_distances(&skel.contour, &subvoxel_boundary(&r.labels)).unwrap();
    println!("T {:?} md {md} mean |u| {}", r.translation, r.mean_displacement());
    assert!(r.translation.norm() <= 1.09);
    assert!(md <= 0.5 * 1.09);
    assert!(r.mean_displacement() <= 0.5 * 1.09);
}
