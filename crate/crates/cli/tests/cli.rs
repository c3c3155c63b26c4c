use std::path::Path;
use std::process::{Command, Output};

fn maskprune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskprune"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn maskprune")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    let out = maskprune(&[
        "synth", "--out", p(dir), "--seed", "3", "--objects", "1200", "--background", "2500", "--floaters", "400",
        "--width", "160", "--height", "120",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn prune_args<'a>(dir: &'a Path, out: &'a str) -> Vec<String> {
    [
        "prune",
        "--model",
        p(&dir.join("scene.ply")),
        "--cameras",
        p(&dir.join("cameras")),
        "--masks",
        p(&dir.join("masks")),
        "--images",
        p(&dir.join("images")),
        "--out",
        p(&dir.join(out)),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    maskprune(&refs)
}

#[test]
fn prune_happy_path_writes_model_and_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let mut args = prune_args(dir.path(), "out.ply");
    args.extend(["--variant", "neighbor"].map(String::from));
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out.ply").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["stages"].as_array().unwrap().len(), 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("compression"), "{stdout}");

    let eval = maskprune(&[
        "eval",
        "--labels",
        p(&dir.path().join("labels.bin")),
        "--report",
        p(&dir.path().join("out.report.json")),
        "--model",
        p(&dir.path().join("out.ply")),
    ]);
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert!(metrics["object_recall"].as_f64().unwrap() > 0.9);
}

#[test]
fn basic_variant_reports_two_stages() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let mut args = prune_args(dir.path(), "basic.ply");
    args.extend(["--variant", "basic", "--report", p(&dir.path().join("r.json"))].map(String::from));
    assert!(run(&args).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["whitelist", "color_validation"]);
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for (workers, name) in [("1", "w1.ply"), ("96", "w96.ply")] {
        let mut args = prune_args(dir.path(), name);
        args.extend(["--variant", "combined", "--workers", workers].map(String::from));
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("w1.ply")).unwrap();
    let b = std::fs::read(dir.path().join("w96.ply")).unwrap();
    assert_eq!(a, b);
    let counts = |name: &str| {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        (v["stages"].as_array().unwrap().iter().map(|s| s["removed"].as_u64().unwrap()).collect::<Vec<_>>(), v["kept_indices"].clone())
    };
    assert_eq!(counts("w1.report.json"), counts("w96.report.json"));
}

#[test]
fn missing_model_is_a_usage_error() {
    let out = maskprune(&["prune", "--cameras", "c", "--masks", "m", "--out", "o.ply"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--model"), "{stderr}");
    assert!(stderr.contains("Usage"), "{stderr}");
}

#[test]
fn bad_values_are_usage_errors() {
    for extra in [
        ["--tau", "0"],
        ["--tau", "-1"],
        ["--variant", "clean"],
        ["--workers", "0"],
        ["--p-neighbor", "100"],
    ] {
        let mut args = vec!["prune", "--model", "m.ply", "--cameras", "c", "--masks", "m", "--out", "o.ply"];
        args.extend(extra);
        let out = maskprune(&args);
        assert_eq!(out.status.code(), Some(2), "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let both = maskprune(&[
        "prune", "--model", "m.ply", "--cameras", "c", "--cameras-json", "c.json", "--masks", "m", "--out", "o.ply",
    ]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let mut args = prune_args(dir.path(), "out.ply");
    args[2] = p(&dir.path().join("missing.ply")).to_string();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: ") && stderr.contains("missing.ply"), "{stderr}");
}

#[test]
fn inapplicable_flags_warn() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let mut args = prune_args(dir.path(), "out.ply");
    args.extend(["--variant", "basic", "--p-spatial", "90", "--min-views", "3"].map(String::from));
    let out = run(&args);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--p-spatial has no effect"), "{stderr}");
    assert!(stderr.contains("--min-views has no effect"), "{stderr}");
}

#[test]
fn info_prints_model_and_rig() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = maskprune(&[
        "info",
        "--model",
        p(&dir.path().join("scene.ply")),
        "--cameras-json",
        p(&dir.path().join("cameras.json")),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gaussians      4100"), "{stdout}");
    assert!(stdout.contains("248 bytes per vertex"), "{stdout}");
    assert!(stdout.contains("(12 views)"), "{stdout}");
    assert_eq!(maskprune(&["info"]).status.code(), Some(2));
}
