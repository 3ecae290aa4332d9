use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cavityfarm::experiment::{PointStatus, RunManifest};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cavityfarm"));
    cmd.env("RUST_LOG", "warn").env_remove("CAVITYFARM_WORKERS");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_SWEEP: &str = r#"
kind = "valley_sweep"
[cavity]
n_modes = 3
[grid]
values = [4.3, 4.5, 4.7, 5.0, 5.2, 5.5]
"#;

fn sweep(config: &Path, out: &Path, extra: &[&str]) -> Output {
    run(bin()
        .arg("valley-sweep")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra))
}

#[test]
fn sweep_output_does_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", SMALL_SWEEP);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(sweep(&cfg, &a, &["--workers", "1"]).status.success());
    assert!(sweep(&cfg, &b, &["--workers", "3"]).status.success());
    assert!(run(bin()
        .env("CAVITYFARM_WORKERS", "2")
        .args(["valley-sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&c))
    .status
    .success());
    let first = std::fs::read(a.join("valley_sweep.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.join("valley_sweep.csv")).unwrap());
    assert_eq!(first, std::fs::read(c.join("valley_sweep.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("f,E_N_steady,corr_q1p2_steady,cycles_to_converge,residual"));
    assert_eq!(lines.count(), 6);
    let manifest = RunManifest::load(&a).unwrap().unwrap();
    assert!(manifest.is_complete());
    assert_eq!(manifest.kind, "valley_sweep");
    assert_eq!(manifest.files, vec![PathBuf::from("valley_sweep.csv")]);
}

#[test]
fn resume_recomputes_only_missing_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", SMALL_SWEEP);
    let out = dir.path().join("run");
    assert!(sweep(&cfg, &out, &[]).status.success());
    let reference = std::fs::read(out.join("valley_sweep.csv")).unwrap();

    // Pretend the run was killed after the first three points.
    let mut manifest = RunManifest::load(&out).unwrap().unwrap();
    for p in manifest.points.iter_mut().skip(3) {
        p.status = PointStatus::Pending;
        p.row = None;
    }
    manifest.save(&out).unwrap();
    std::fs::remove_file(out.join("valley_sweep.csv")).unwrap();

    assert!(sweep(&cfg, &out, &["--resume"]).status.success());
    assert_eq!(std::fs::read(out.join("valley_sweep.csv")).unwrap(), reference);
    let resumed = RunManifest::load(&out).unwrap().unwrap();
    assert!(resumed.points.iter().all(|p| p.status == PointStatus::Done));
    assert_eq!(resumed.points[0].wall_clock_s, manifest.points[0].wall_clock_s);
}

#[test]
fn resume_refuses_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", SMALL_SWEEP);
    let out = dir.path().join("run");
    assert!(sweep(&cfg, &out, &[]).status.success());
    let other = write_config(dir.path(), "other.toml", &SMALL_SWEEP.replace("n_modes = 3", "n_modes = 2"));
    let again = sweep(&other, &out, &["--resume"]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("refusing to resume"));
}

#[test]
fn failed_points_set_the_exit_code_unless_keep_going() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_SWEEP.replace("values = [4.3, 4.5, 4.7, 5.0, 5.2, 5.5]", "values = [2.0, 4.5]");
    let cfg = write_config(dir.path(), "bad.toml", &body);

    let strict = sweep(&cfg, &dir.path().join("strict"), &["--workers", "1"]);
    assert!(!strict.status.success());
    let m = RunManifest::load(&dir.path().join("strict")).unwrap().unwrap();
    assert_eq!(m.points[0].status, PointStatus::Failed);
    assert!(m.points[0].error.as_deref().unwrap().contains("below"));
    assert_eq!(m.points[1].status, PointStatus::Skipped);

    let lenient = sweep(&cfg, &dir.path().join("lenient"), &["--keep-going"]);
    assert!(lenient.status.success());
    let m = RunManifest::load(&dir.path().join("lenient")).unwrap().unwrap();
    assert_eq!(m.count(PointStatus::Failed), 1);
    assert_eq!(m.count(PointStatus::Done), 1);
    let csv = std::fs::read_to_string(dir.path().join("lenient/valley_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("4.5,"));
}

#[test]
fn uncoupled_detectors_never_entangle() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_SWEEP.replace("n_modes = 3", "n_modes = 3\nlambda = 0.0");
    let cfg = write_config(dir.path(), "free.toml", &body);
    let out = dir.path().join("free");
    assert!(sweep(&cfg, &out, &[]).status.success());
    let mut reader = csv::Reader::from_path(out.join("valley_sweep.csv")).unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn plotting_an_empty_csv_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("valley_sweep.csv");
    std::fs::write(&csv, "f,E_N_steady,corr_q1p2_steady,cycles_to_converge,residual\n").unwrap();
    let out = run(bin().arg("plot").arg(&csv));
    assert!(!out.status.success());
    assert!(!csv.with_extension("svg").exists());
}

#[test]
fn vibration_gw_and_audit_runs_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let vib = write_config(
        dir.path(),
        "vib.toml",
        r#"
kind = "vibration"
f = 5.0
cycles = 4
[cavity]
n_modes = 3
[driver]
kind = "sinusoid"
amplitude_over_l0 = 1e-3
gamma_over_omega1 = 4e-2
"#,
    );
    let out = dir.path().join("vib");
    assert!(run(bin().arg("vibration").arg("--config").arg(&vib).arg("--out").arg(&out)).status.success());
    let text = std::fs::read_to_string(out.join("vibration.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("cycle,t,E_N,corr_q1p2"));
    assert_eq!(text.lines().count(), 5);
    assert!(run(bin().arg("plot").arg(out.join("vibration.csv"))).status.success());
    assert!(out.join("vibration.svg").exists());
    // A finished single run is not redone on resume.
    let before = std::fs::metadata(out.join("vibration.csv")).unwrap().modified().unwrap();
    assert!(run(bin().arg("vibration").arg("--config").arg(&vib).arg("--out").arg(&out).arg("--resume"))
        .status
        .success());
    assert_eq!(std::fs::metadata(out.join("vibration.csv")).unwrap().modified().unwrap(), before);

    let gw = write_config(
        dir.path(),
        "gw.toml",
        r#"
kind = "gw"
f = 5.0
cycles = 3
[cavity]
n_modes = 3
[driver]
kind = "gw_spring"
omega0_over_omega1 = 0.01
quality = 10.0
waveform = { kind = "sine", h0 = 1e-4 }
"#,
    );
    let out = dir.path().join("gw");
    assert!(run(bin().arg("gw").arg("--config").arg(&gw).arg("--out").arg(&out)).status.success());
    let text = std::fs::read_to_string(out.join("gw.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("cycle,t,E_N,corr_q1p2,L,delta_x"));
    assert_eq!(text.lines().count(), 4);

    let audit = write_config(
        dir.path(),
        "audit.toml",
        r#"
kind = "audit"
f = 5.0
cycles = 2
[cavity]
n_modes = 3
[driver]
kind = "sinusoid"
amplitude_over_l0 = 1e-3
gamma_over_omega1 = 4e-2
[audit.small_case]
n_modes = 2
cycles = 1
t_start = 0.0
"#,
    );
    let out = dir.path().join("audit");
    let result = run(bin().arg("audit").arg("--config").arg(&audit).arg("--out").arg(&out));
    assert!(result.status.success());
    assert!(String::from_utf8_lossy(&result.stdout).contains("ratio_1"));
    let text = std::fs::read_to_string(out.join("audit.csv")).unwrap();
    assert!(text.starts_with("metric,value\nratio_1,"));
    assert!(out.join("audit.json").exists());
}

#[test]
fn wrong_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", SMALL_SWEEP);
    let out = run(bin().arg("vibration").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("x")));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("valley_sweep"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let scenario = cavityfarm::experiment::ScenarioConfig::load(&path).unwrap();
        assert!(scenario.kind.is_some(), "{}", path.display());
        scenario.resolved_cavity().unwrap();
        seen += 1;
    }
    assert_eq!(seen, 5);
}
