use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn turbfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turbfuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, frames: &str, seed: &str) {
    let out = turbfuse(&[
        "simulate",
        "-o",
        dir.to_str().unwrap(),
        "--width",
        "64",
        "--height",
        "64",
        "--text",
        "AB",
        "--frames",
        frames,
        "--seed",
        seed,
        "--dump-flows",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_manifest_and_flows() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate(&seq, "3", "5");
    assert!(seq.join("manifest.json").exists());
    assert!(seq.join("ground_truth/clean.png").exists());
    assert_eq!(fs::read_dir(seq.join("flows")).unwrap().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(seq.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
}

#[test]
fn restore_reports_metrics_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate(&seq, "6", "1");
    let out = dir.path().join("out.png");
    let report = dir.path().join("report.json");
    let o = turbfuse(&[
        "restore",
        seq.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--pattern",
        "frame_*",
        "--flow-iters",
        "40",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("psnr"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["frames_in"], 6);
    assert_eq!(json["config"]["registration"]["iterations"], 40);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate(&seq, "4", "2");
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "select_fraction = 0.25\npattern = \"frame_*\"\n[deartifact]\nmode = \"none\"\n").unwrap();
    let report = dir.path().join("r.json");
    let o = turbfuse(&[
        "restore",
        seq.to_str().unwrap(),
        "-o",
        dir.path().join("o.png").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--select-fraction",
        "1.0",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["frames_selected"], 4);
    assert_eq!(json["config"]["deartifact"]["mode"], "none");
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dir.path().join("o.png");
    let o = out.to_str().unwrap();
    for args in [
        vec!["restore", d, "-o", o, "--fusion-mode", "median"],
        vec!["restore", d, "-o", o, "--qf", "0"],
        vec!["restore", d, "-o", o, "--deartifact", "external"],
        vec!["restore", d, "-o", o, "--dump-flows"],
        vec!["batch", d, "-o", d, "--select-fraction", "1.5"],
        vec!["restore", d, "-o", o, "--config", "/nonexistent.toml"],
    ] {
        let r = turbfuse(&args);
        assert_eq!(r.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "nonsense_key = 3\n").unwrap();
    let r = turbfuse(&["restore", d, "-o", o, "--config", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let r = turbfuse(&[
        "restore",
        dir.path().to_str().unwrap(),
        "-o",
        dir.path().join("o.png").to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no frames"));
}

#[test]
fn batch_exit_status_follows_failures() {
    let root = tempfile::tempdir().unwrap();
    simulate(&root.path().join("a"), "4", "1");
    simulate(&root.path().join("b"), "4", "2");
    let out = tempfile::tempdir().unwrap();
    let args = |o: &Path| {
        turbfuse(&[
            "batch",
            root.path().to_str().unwrap(),
            "-o",
            o.to_str().unwrap(),
            "--pattern",
            "frame_*",
            "--flow-iters",
            "30",
        ])
    };
    let r = args(out.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.path().join("a.png").exists() && out.path().join("b.png").exists());

    fs::create_dir(root.path().join("c_empty")).unwrap();
    let out2 = tempfile::tempdir().unwrap();
    let r = args(out2.path());
    assert_eq!(r.status.code(), Some(1));
    let report = fs::read_to_string(out2.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.lines().any(|l| l.starts_with("c_empty,failed,load,")));
}

#[test]
fn analyze_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate(&seq, "5", "3");
    let csv = dir.path().join("s.csv");
    let r = turbfuse(&[
        "analyze",
        seq.to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
        "--pattern",
        "frame_*",
    ]);
    assert!(r.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);

    let truth = seq.join("ground_truth/clean.png");
    let t = truth.to_str().unwrap();
    let r = turbfuse(&["metrics", t, t, "--json"]);
    assert!(r.status.success());
    let m: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!((m["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let r = turbfuse(&["metrics", t, seq.join("frame_0000.png").to_str().unwrap()]);
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.starts_with("psnr "), "{text}");
}
