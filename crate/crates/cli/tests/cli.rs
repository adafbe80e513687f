//! End-to-end tests driving the compiled binary.

use curvesig::groups::GroupElement;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curvesig"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_sig_fixture(path: &Path) {
    let mut text = String::from("index,s,kappa\n");
    for i in 0..24 {
        let s = i as f64 * 0.5;
        let kappa = (i as f64 * 0.4).sin();
        text.push_str(&format!("{i},{s},{kappa}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("dataset"));
    assert!(text.contains("signature"));
}

#[test]
fn unknown_flag_exits_two() {
    let out = run(&["dataset", "synth", "--count", "1", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn module_error_exits_one() {
    let out = run(&["baseline", "--curve", "/nonexistent.csv", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("/nonexistent.csv"), "{text}");
}

#[test]
fn synth_writes_curves_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "dataset",
        "synth",
        "--count",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
        "--image-size",
        "96",
        "--min-points",
        "50",
        "--seed",
        "3",
    ]);
    assert_ok(&out);
    let mut csvs = 0;
    let mut manifests = 0;
    for split in ["train", "validation", "test"] {
        let sub = dir.path().join(split);
        for entry in std::fs::read_dir(&sub).unwrap() {
            let name = entry.unwrap().file_name().to_string_lossy().into_owned();
            if name.ends_with(".csv") {
                csvs += 1;
            }
            if name == "manifest.json" {
                manifests += 1;
            }
        }
    }
    assert_eq!(csvs, 5);
    assert_eq!(manifests, 3);
    assert!(dir.path().join("run_config.json").exists());

    let info = run(&[
        "dataset",
        "info",
        dir.path().join("train/manifest.json").to_str().unwrap(),
    ]);
    assert_ok(&info);
    assert!(String::from_utf8_lossy(&info.stdout).contains("curves:"));
}

#[test]
fn plot_emits_one_polyline_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let sig1 = dir.path().join("one.csv");
    let sig2 = dir.path().join("two.csv");
    write_sig_fixture(&sig1);
    write_sig_fixture(&sig2);
    let single = dir.path().join("single.svg");
    assert_ok(&run(&[
        "plot",
        sig1.to_str().unwrap(),
        "--out",
        single.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&single).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);

    let double = dir.path().join("double.svg");
    assert_ok(&run(&[
        "plot",
        sig1.to_str().unwrap(),
        sig2.to_str().unwrap(),
        "--out",
        double.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&double).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
    assert!(text.contains(">one<"));
    assert!(text.contains(">two<"));
}

// Golden-file check: a fixed input renders byte-identically.
#[test]
fn plot_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("golden_input.csv");
    write_sig_fixture(&sig);
    let out = dir.path().join("golden.svg");
    assert_ok(&run(&[
        "plot",
        sig.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--title",
        "golden",
    ]));
    let got = std::fs::read(&out).unwrap();
    let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/plot.svg");
    let want = std::fs::read(&golden_path).unwrap_or_default();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden_path, &got).unwrap();
        return;
    }
    assert_eq!(
        got,
        want,
        "golden SVG drifted; rerun with UPDATE_GOLDEN=1 if intentional"
    );
}

// Full pipeline at smoke scale: synth -> train both models -> signature of a
// transformed pair -> compare reports a finite discrepancy.
#[test]
fn end_to_end_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_ok(&run(&[
        "dataset",
        "synth",
        "--count",
        "12",
        "--out",
        data.to_str().unwrap(),
        "--image-size",
        "128",
        "--min-points",
        "120",
        "--seed",
        "5",
    ]));

    let config = dir.path().join("smoke.toml");
    std::fs::write(
        &config,
        r#"
batch_size = 8
hidden_dims = [16, 16]
learning_rate = 0.003
val_interval = 100
val_batch = 8
half_width = 3
offset_range = [3, 8]
num_anchors = 3
section_len = 10
gap_range = [10, 30]
"#,
    )
    .unwrap();

    let model_k = dir.path().join("k.json");
    let model_s = dir.path().join("s.json");
    for (kind, out) in [("curvature", &model_k), ("arclength", &model_s)] {
        let res = run(&[
            "train",
            kind,
            "--group",
            "se2",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--steps",
            "200",
            "--seed",
            "7",
            "--config",
            config.to_str().unwrap(),
        ]);
        assert_ok(&res);
        assert!(out.exists());
        assert!(out.with_extension("log.csv").exists());
    }

    // Build a transformed copy of one test curve.
    let test_manifest = data.join("test/manifest.json");
    let (_, test_curves) = curvesig::dataset::load_dataset(&test_manifest).unwrap();
    let curve_a = dir.path().join("a.csv");
    let curve_b = dir.path().join("b.csv");
    let g = GroupElement::rotation(0.8, [0.4, -0.2]);
    curvesig::dataset::write_curve_csv(&curve_a, &test_curves[0]).unwrap();
    curvesig::dataset::write_curve_csv(&curve_b, &g.apply_curve(&test_curves[0])).unwrap();

    let sig_a = dir.path().join("sig_a");
    let sig_b = dir.path().join("sig_b");
    for (curve, out) in [(&curve_a, &sig_a), (&curve_b, &sig_b)] {
        assert_ok(&run(&[
            "signature",
            "--model-k",
            model_k.to_str().unwrap(),
            "--model-s",
            model_s.to_str().unwrap(),
            "--curve",
            curve.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
    }

    let report = dir.path().join("report.json");
    let out = run(&[
        "compare",
        sig_a.with_extension("csv").to_str().unwrap(),
        sig_b.with_extension("csv").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = std::fs::read_to_string(&report).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let d = parsed["discrepancy"].as_f64().unwrap();
    assert!(d.is_finite(), "discrepancy {d}");

    // Baseline on the same curve.
    let base = dir.path().join("baseline_out");
    assert_ok(&run(&[
        "baseline",
        "--curve",
        curve_a.to_str().unwrap(),
        "--out",
        base.to_str().unwrap(),
    ]));
    assert!(base.with_extension("csv").exists());
    assert!(base.with_extension("svg").exists());
}
