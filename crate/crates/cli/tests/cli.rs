//! End-to-end tests of the binary: exit codes, report contents, grid export,
//! and the determinism acceptance criterion.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kundt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_flat_scene_passes() {
    let out = run(&["verify", scene("flat.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("result: PASS"), "{text}");
    assert!(text.contains("ccnv_grad_ell"));
    assert!(text.contains("ell.lie"));
}

#[test]
fn verify_example_ii_scene_passes_both_paths() {
    let out = run(&["verify", scene("example2.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("kv1:custom.lie"));
    assert!(text.contains("kv1:custom.frame"));
    assert!(text.contains("oracle_agreement"));
    assert!(text.contains("result: PASS"));
}

#[test]
fn verify_mutated_scene_fails_and_names_point() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let out = run(&[
        "verify",
        scene("example2_mutated.scene").to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("FAIL"), "{text}");
    assert!(text.contains("worst point"), "{text}");
    let machine = std::fs::read_to_string(&report).unwrap();
    assert!(machine.contains("status = fail"));
    assert!(machine.contains("worst_point ="));
    assert!(machine.contains("scene_mutated"));
}

#[test]
fn input_errors_exit_2() {
    // unknown metric kind
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scene");
    std::fs::write(
        &bad,
        "ccnv-scene v1\n[chart]\ndimension = 5\n[metric]\nkind = nonsense\n",
    )
    .unwrap();
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown metric kind"));

    // mask violation names the function and coordinate
    std::fs::write(
        &bad,
        "ccnv-scene v1\n[chart]\ndimension = 5\n[metric]\nkind = case-1.1i\nf2 = v\n",
    )
    .unwrap();
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("f_2") && err.contains('v'), "{err}");

    // missing file
    let out = run(&["verify", dir.path().join("nope.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_patch_is_all_timelike_and_exports_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let out = run(&[
        "classify",
        scene("example1_patch.scene").to_str().unwrap(),
        "--grid-out",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("timelike 100.0%"), "{text}");
    assert!(text.contains("Case1") || text.contains("Both"), "{text}");
    let csv = std::fs::read_to_string(&grid).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "label_index,u,v,x3,x4,norm,label"
    );
    // 6^4 grid points for one KV
    assert_eq!(csv.lines().count(), 1 + 6usize.pow(4));
    assert!(csv.contains(",timelike"));
}

#[test]
fn classify_null_normalized_example_ii() {
    let out = run(&["classify", scene("example2_null.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("null 100.0%"), "{text}");
    assert!(text.contains("derived true"), "{text}");
}

#[test]
fn classify_ell_is_all_null() {
    let out = run(&["classify", scene("ppwave.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("null 100.0%"), "{text}");
}

#[test]
fn bracket_reports_forms() {
    // form A: example II commutes with ell
    let out = run(&["bracket", scene("example2.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("bracket_prop_ell"), "{text}");
    assert!(text.contains("sigma = 0."), "{text}");

    // form B: example I bracket is a constant multiple of ell, |sigma| = 1
    let out = run(&["bracket", scene("example1_patch.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("sigma = 1.0"), "{text}");

    // form C: case 2.2 yields the spacelike bracket with norm (D_3 F_1)^2
    let out = run(&["bracket", scene("case22.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("yc_norm_identity"), "{text}");
    assert!(text.contains("result: PASS"), "{text}");
}

#[test]
fn invariants_probe_verdicts() {
    let out = run(&["invariants", scene("ppwave.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("vanishing = true"), "{text}");
    assert!(text.contains("constant = true"), "{text}");

    // flat-transverse example II is VSI too
    let out = run(&[
        "invariants",
        scene("example2.scene").to_str().unwrap(),
        "--samples",
        "12",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("vanishing = true"));

    let out = run(&["invariants", scene("inhomogeneous.scene").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("constant = false"), "{text}");
    assert!(text.contains("vanishing = false"), "{text}");
}

#[test]
fn seed_and_samples_overrides() {
    let out = run(&[
        "verify",
        scene("flat.scene").to_str().unwrap(),
        "--seed",
        "99",
        "--samples",
        "12",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("seed 99"));
    assert!(text.contains("12 samples"));
}
