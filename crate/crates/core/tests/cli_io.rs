use std::path::Path;
use std::process::{Command, Output};

use wakevec::case::CaseConfig;
use wakevec::io::manifest::{verify_manifest, RunManifest, MANIFEST_NAME};
use wakevec::io::{parse_case_file, parse_case_file_with, parse_case_str, serialize_case};

const SMALL: &str = "\
# 120 mm disk in a 1 m box
disk_diameter = 0.12
disk_thrust = 2
tilt_deg = 0
domain_edge = 1
base_cells = 20
disk_refine_level = 2
";

fn wakevec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wakevec"))
        .args(args)
        .env("WAKEVEC_THREADS", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn overrides_match_edited_file() {
    let dir = tempfile::tempdir().unwrap();
    let base = write(dir.path(), "a.case", SMALL);
    let edited = write(
        dir.path(),
        "b.case",
        &SMALL.replace("tilt_deg = 0", "tilt_deg = 60").replace("disk_thrust = 2", "disk_thrust = 3.5"),
    );
    let via_override =
        parse_case_file_with(Path::new(&base), &["tilt_deg=60".into(), "disk_thrust = 3.5".into()]).unwrap();
    assert_eq!(via_override, parse_case_file(Path::new(&edited)).unwrap());
    assert!(parse_case_file_with(Path::new(&base), &["tilt=60".into()]).is_err());
}

#[test]
fn benchtop_configs_survive_serialization() {
    for cfg in [CaseConfig::benchtop(0.0, None), CaseConfig::benchtop(60.0, Some(20.0))] {
        let text = serialize_case(&cfg);
        assert_eq!(parse_case_str(&text).unwrap(), cfg);
    }
}

#[test]
fn oracle_verb_prints_grid() {
    let out = wakevec(&["oracle", "--eta", "0.25", "--exit", "0", "--phi", "0,90"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("phi_deg,theta_deg,eta,T_over_Tp\n"));
    let last: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 0.25).abs() < 1e-12);
}

#[test]
fn hover_from_curve_file() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write(
        dir.path(),
        "curve.csv",
        "phi_deg,T_over_T0\n0,1\n30,0.9\n60,0.7\n83,0.49\n90,0.4\n",
    );
    let out_dir = dir.path().join("hover");
    let out = wakevec(&[
        "hover",
        "--curve",
        &curve,
        "--lambda",
        "0.49",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("lambda = 0.49"), "{text}");
    assert!(text.contains("phi_c = 83.0 deg"), "{text}");
    assert!(out_dir.join("hover.csv").exists());
    assert!(verify_manifest(&out_dir).unwrap().is_empty());

    let other = dir.path().join("mass");
    let out = wakevec(&["hover", "--curve", &curve, "--mass", "5", "--max-thrust", "11.2", "-o", other.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("lambda = 0.45"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.case", &format!("{SMALL}tilt_dge = 3\n"));
    let out = wakevec(&["mesh-info", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tilt_dge") && err.contains("line 8"), "{err}");

    let good = write(dir.path(), "good.case", SMALL);
    let out = wakevec(&["mesh-info", &good, "--set", "tilt_deg=120"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_complete_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let case = write(dir.path(), "s.case", SMALL);
    let run = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let mut args = vec!["solve", case.as_str(), "-o", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        (wakevec(&args), out_dir)
    };

    let (out, a) = run("a", &["--set", "max_iterations=40"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["field.vtk", "forces.csv", "balance.csv", "residuals.csv", MANIFEST_NAME] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    assert!(verify_manifest(&a).unwrap().is_empty());
    let manifest: RunManifest = serde_json::from_slice(&std::fs::read(a.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(manifest.verb, "solve");
    assert_eq!(manifest.rows.len(), 1);
    assert!(!manifest.rows[0].converged);
    assert_eq!(manifest.files.len(), 4);
    let residuals = std::fs::read_to_string(a.join("residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 41);

    let (_, b) = run("b", &["--set", "max_iterations=40"]);
    for f in ["field.vtk", "forces.csv", "balance.csv", "residuals.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let (out, c) = run("c", &["--set", "disk_thrust=0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(verify_manifest(&c).unwrap().is_empty());
}

#[test]
fn check_verb_passes() {
    let out = wakevec(&["check"]);
    assert!(out.status.success());
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn sweep_writes_curve_and_row_directories() {
    let dir = tempfile::tempdir().unwrap();
    let case = write(dir.path(), "s.case", &format!("{SMALL}exit_angle_deg = 0\n"));
    let out_dir = dir.path().join("sweep");
    let overlap = wakevec(&["sweep", &case, "--phi", "0", "-o", dir.path().join("bad").to_str().unwrap()]);
    assert_eq!(overlap.status.code(), Some(2));
    let case = write(dir.path(), "t.case", &format!("{SMALL}exit_angle_deg = 0\ndeflector_refine_level = 2\n"));
    let out = wakevec(&[
        "sweep",
        &case,
        "--phi",
        "0,90",
        "--set",
        "max_iterations=5",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let curve = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert!(curve.lines().nth(1).unwrap().starts_with("0,"));
    for row in ["phi_000.00", "phi_090.00"] {
        assert!(out_dir.join(row).join("field.vtk").exists());
        assert!(verify_manifest(&out_dir.join(row)).unwrap().is_empty());
    }
    assert!(verify_manifest(&out_dir).unwrap().is_empty());
    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(out_dir.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(manifest.rows.len(), 2);
    assert!(manifest.config.unwrap().contains("exit_angle_deg = 0"));
}
