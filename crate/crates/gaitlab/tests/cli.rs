//! End-to-end exercises of the `gaitlab` binary: synth -> enroll ->
//! identify -> evaluate, plus the error and help surfaces.

use std::path::Path;
use std::process::Output;

fn run(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_gaitlab"))
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

struct Workbench {
    _tmp: tempfile::TempDir,
    root: std::path::PathBuf,
    artifacts: std::path::PathBuf,
}

/// Synthesize a small dataset with coat probes and enroll it once.
fn workbench() -> Workbench {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("data");
    let artifacts = tmp.path().join("artifacts");
    let out = run(&[
        "synth",
        "--out",
        root.to_str().unwrap(),
        "--subjects",
        "4",
        "--sequences",
        "3",
        "--frames",
        "50",
        "--cycle",
        "20",
        "--probe-sequences",
        "1",
        "--covariate",
        "coat",
        "--affected-part",
        "chest",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "synth: {}", stderr(&out));
    let out = run(&[
        "enroll",
        root.to_str().unwrap(),
        "--out",
        artifacts.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "enroll: {}", stderr(&out));
    Workbench {
        _tmp: tmp,
        root,
        artifacts,
    }
}

fn identify_args(bench: &Workbench, probe: &Path) -> Vec<String> {
    vec![
        "identify".into(),
        probe.to_str().unwrap().into(),
        "--moment-db".into(),
        bench.artifacts.join("momentdb.txt").to_str().unwrap().into(),
        "--model-bank".into(),
        bench
            .artifacts
            .join("modelbank.txt")
            .to_str()
            .unwrap()
            .into(),
    ]
}

#[test]
fn identify_gallery_member_ranks_itself_first() {
    let bench = workbench();
    let probe = bench.root.join("s001").join("normal00");
    let args = identify_args(&bench, &probe);
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(&arg_refs);
    assert!(out.status.success(), "identify: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("clean parts: neck+chest+pelvic+limb"),
        "gallery member should screen clean:\n{text}"
    );
    assert!(
        text.contains("1. s001"),
        "rank 1 should be the probe's subject:\n{text}"
    );
}

#[test]
fn identify_coat_probe_excludes_chest() {
    let bench = workbench();
    let probe = bench.root.join("s002").join("coat00");
    let args = identify_args(&bench, &probe);
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(&arg_refs);
    assert!(out.status.success(), "identify: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        !text.contains("clean parts: neck+chest"),
        "chest should be excluded:\n{text}"
    );
    assert!(text.contains("1. s002"), "coat probe misidentified:\n{text}");
}

#[test]
fn identify_rejects_mismatched_config() {
    let bench = workbench();
    let cfg_path = bench.root.join("other.cfg");
    std::fs::write(&cfg_path, "normalization_height = 136\nnormalization_width = 72\n").unwrap();
    let probe = bench.root.join("s000").join("normal00");
    let mut args = identify_args(&bench, &probe);
    args.push("--config".into());
    args.push(cfg_path.to_str().unwrap().into());
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(&arg_refs);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("incompatible"),
        "expected incompatibility error, got: {}",
        stderr(&out)
    );
}

#[test]
fn identify_reports_missing_model_file() {
    let bench = workbench();
    let probe = bench.root.join("s000").join("normal00");
    let missing = bench.artifacts.join("nope.txt");
    let out = run(&[
        "identify",
        probe.to_str().unwrap(),
        "--moment-db",
        bench.artifacts.join("momentdb.txt").to_str().unwrap(),
        "--model-bank",
        missing.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("nope.txt"),
        "error should name the missing file: {}",
        stderr(&out)
    );
}

#[test]
fn evaluate_split_mode_with_assertions() {
    let bench = workbench();
    let eval_dir = bench.root.join("eval");
    let out = run(&[
        "evaluate",
        bench.root.to_str().unwrap(),
        "--mode",
        "split",
        "--out",
        eval_dir.to_str().unwrap(),
        "--assert-rank1-min",
        "75",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "evaluate: {}", stderr(&out));
    assert!(stdout(&out).contains("rank-1 CCR"));
    assert!(eval_dir.join("report.csv").exists());
    assert!(eval_dir.join("cmc.csv").exists());

    // An impossible bar must flip the exit code.
    let out = run(&[
        "evaluate",
        bench.root.to_str().unwrap(),
        "--mode",
        "split",
        "--out",
        eval_dir.to_str().unwrap(),
        "--assert-rank1-min",
        "101",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("assertion failed"));
}

#[test]
fn evaluate_loo_writes_probe_rows_and_features() {
    let bench = workbench();
    let eval_dir = bench.root.join("eval_loo");
    let features = bench.root.join("features.csv");
    let out = run(&[
        "evaluate",
        bench.root.to_str().unwrap(),
        "--mode",
        "loo",
        "--out",
        eval_dir.to_str().unwrap(),
        "--dump-features",
        features.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "evaluate: {}", stderr(&out));
    let report = std::fs::read_to_string(eval_dir.join("report.csv")).unwrap();
    // 4 subjects x 4 sequences (3 gallery + 1 probe) = 16 rows + header.
    assert_eq!(report.lines().count(), 17);
    let features = std::fs::read_to_string(&features).unwrap();
    // 15 combinations per sequence.
    assert_eq!(features.lines().count(), 16 * 15);
    let first = features.lines().next().unwrap();
    assert!(first.starts_with("s000,"));
}

#[test]
fn zernike_prints_moment_csv() {
    let bench = workbench();
    let aesi_png = bench.root.join("aesi.png");
    let out = run(&[
        "build-aesi",
        bench.root.join("s000").join("normal00").to_str().unwrap(),
        "--out",
        aesi_png.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "build-aesi: {}", stderr(&out));
    assert!(aesi_png.exists());

    let out = run(&["zernike", aesi_png.to_str().unwrap()]);
    assert!(out.status.success(), "zernike: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,m,re,im,magnitude"));
    assert_eq!(lines.clone().count(), 3);
    assert!(lines.all(|l| l.starts_with("5,")));

    let out = run(&[
        "zernike",
        aesi_png.to_str().unwrap(),
        "--indices",
        "0:0,4:2",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn build_aesi_dumps_part_slices() {
    let bench = workbench();
    let aesi_png = bench.root.join("aesi2.png");
    let parts_dir = bench.root.join("parts");
    let out = run(&[
        "build-aesi",
        bench.root.join("s001").join("normal01").to_str().unwrap(),
        "--out",
        aesi_png.to_str().unwrap(),
        "--dump-parts",
        parts_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "build-aesi: {}", stderr(&out));
    for name in ["neck", "chest", "pelvic", "limb"] {
        assert!(parts_dir.join(format!("{name}.png")).exists());
    }
}

#[test]
fn split_mode_without_probe_roles_is_a_manifest_error() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("data");
    let out = run(&[
        "synth",
        "--out",
        root.to_str().unwrap(),
        "--subjects",
        "2",
        "--sequences",
        "2",
        "--frames",
        "40",
        "--cycle",
        "20",
    ]);
    assert!(out.status.success());
    let out = run(&[
        "evaluate",
        root.to_str().unwrap(),
        "--mode",
        "split",
        "--out",
        tmp.path().join("r").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("manifest"));
}

#[test]
fn synth_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut captures = Vec::new();
    for run_name in ["a", "b"] {
        let root = tmp.path().join(run_name);
        let out = run(&[
            "synth",
            "--out",
            root.to_str().unwrap(),
            "--subjects",
            "2",
            "--sequences",
            "2",
            "--frames",
            "30",
            "--cycle",
            "20",
            "--seed",
            "9",
        ]);
        assert!(out.status.success());
        let manifest = std::fs::read(root.join("dataset.json")).unwrap();
        let frame = std::fs::read(root.join("s001").join("normal01").join("0017.png")).unwrap();
        captures.push((manifest, frame));
    }
    assert_eq!(captures[0], captures[1]);
}

#[test]
fn unknown_flags_are_rejected() {
    let out = run(&["enroll", "somewhere", "--out", "x", "--frobnicate"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--frobnicate"));
}

#[test]
fn help_covers_every_subcommand() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for sub in ["enroll", "identify", "evaluate", "synth", "zernike", "build-aesi"] {
        assert!(text.contains(sub), "--help missing {sub}");
    }
    for sub in ["enroll", "identify", "evaluate", "synth", "zernike", "build-aesi"] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
    }
}

#[test]
fn enroll_rejects_single_subject_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("data");
    let out = run(&[
        "synth",
        "--out",
        root.to_str().unwrap(),
        "--subjects",
        "1",
        "--sequences",
        "3",
        "--frames",
        "40",
        "--cycle",
        "20",
    ]);
    assert!(out.status.success());
    let out = run(&[
        "enroll",
        root.to_str().unwrap(),
        "--out",
        tmp.path().join("a").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("insufficient classes"));
}
