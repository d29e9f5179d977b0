use std::path::Path;
use std::process::Command;

fn planerecon() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_planerecon"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn phantom_writes_one_volume_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = planerecon()
        .args(["phantom", "--steps", "3", "--size", "24", "--spacing", "3.0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in 0..3 {
        assert!(dir.path().join(format!("phantom_{s:03}.vol")).is_file());
    }
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\nbogus = 2\n").unwrap();
    let out = planerecon().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_run_directory_is_an_error() {
    let out = planerecon()
        .args(["metrics", "--run", "/nonexistent/planerecon-run"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn write_config(path: &Path, out: &Path) {
    let text = format!(
        "seed = 5\noutput_dir = {:?}\n[acquisition]\nkind = \"grid\"\nn_cycles = 2\n[output]\nframe_volumes = \"none\"\nslices = false\n",
        out.display().to_string()
    );
    std::fs::write(path, text).unwrap();
}

#[test]
fn run_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let run_dir = dir.path().join("run");
    write_config(&cfg, &run_dir);
    let out = planerecon().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(printed.contains("ravd_pct"), "{printed}");
    for f in ["frames.csv", "summary.json", "config.toml", "sigma_j.vol"] {
        assert!(run_dir.join(f).is_file(), "{f}");
    }
    let again = planerecon().args(["metrics", "--run"]).arg(&run_dir).output().unwrap();
    assert!(again.status.success());
    assert_eq!(String::from_utf8_lossy(&again.stdout), printed);
}
