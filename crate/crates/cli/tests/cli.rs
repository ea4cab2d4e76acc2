use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "sensor": {"radius_mm": 5.0},
  "sim": {"substeps": 50, "frames": 6},
  "camera": {"width": 24, "height": 24},
  "calibration": {"iters": 1},
  "optical": {"training": {"epochs": 2}},
  "synthetic": {"frames": 4},
  "evaluation": {"n_points": 128}
}"#;

fn gelsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gelsim")).args(args).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = gelsim(dir, args);
    assert!(o.status.success(), "gelsim {args:?}: {}", stderr(&o));
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes the small config and generates a dataset of `scenes` scenes in `data`.
fn dataset(dir: &Path, scenes: usize) {
    std::fs::write(dir.join("small.json"), SMALL).unwrap();
    ok(dir, &["gen-synthetic", "--config", "small.json", "--scenes", &scenes.to_string(), "--out", "data"]);
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["simulate", "calibrate", "render", "train-optical", "evaluate", "gen-synthetic"] {
        let o = gelsim(dir.path(), &[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in ["--config", "--out", "--seed", "--threads", "--verbose"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gelsim(dir.path(), &["evaluate", "--bogus"])), 2);
    assert_eq!(code(&gelsim(dir.path(), &["gen-synthetic", "--scenes", "1"])), 2);
    let o = gelsim(dir.path(), &["gen-synthetic", "--scenes", "1", "--out", "x", "--config", "missing.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn malformed_config_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"sim\": {\"fps\": }\n}").unwrap();
    let o = gelsim(dir.path(), &["simulate", "--config", "bad.json", "--out", "o"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.json:2:"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_reports_its_pointer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"material": {"E": 1e4, "poisson": 0.3}}"#).unwrap();
    let o = gelsim(dir.path(), &["simulate", "--config", "bad.json", "--out", "o"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/material") && stderr(&o).contains("poisson"), "{}", stderr(&o));
}

#[test]
fn simulate_without_indenter_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.json"), SMALL).unwrap();
    let o = gelsim(dir.path(), &["simulate", "--config", "small.json", "--out", "o"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn simulate_writes_frames_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(SMALL).unwrap();
    cfg["indenter"] = serde_json::json!({
        "shape": {"type": "sphere", "radius": 2.0},
        "trajectory": {"press": {"depth_mm": 1.0, "duration_s": 0.2}}
    });
    std::fs::write(dir.path().join("press.json"), cfg.to_string()).unwrap();
    ok(dir.path(), &["simulate", "--config", "press.json", "--out", "o"]);
    let summary = json(&dir.path().join("o/summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["frames"], 6);
    assert_eq!(summary["substeps"], 50);
    let disp = summary["max_displacement_mm"].as_f64().unwrap();
    assert!(disp > 0.3 && disp < 2.0, "{disp}");
    for k in 0..6 {
        assert!(dir.path().join(format!("o/clouds/{k:04}.xyz")).is_file());
        assert!(dir.path().join(format!("o/maps/{k:04}.pfm")).is_file());
    }
}

#[test]
fn generated_dataset_layout_and_split() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 10);
    let m = json(&dir.path().join("data/manifest.json"));
    assert_eq!(m["schema_version"], 1);
    let scenes = m["scenes"].as_array().unwrap();
    assert_eq!(scenes.len(), 10);
    assert_eq!(scenes.iter().filter(|s| s["role"] == "train").count(), 8);
    let ok_scenes: Vec<_> = scenes.iter().filter(|s| s["status"] == "ok").collect();
    assert!(!ok_scenes.is_empty());
    let mut next = 0;
    for s in ok_scenes {
        let frames: Vec<u64> = s["frames"].as_array().unwrap().iter().map(|f| f.as_u64().unwrap()).collect();
        assert_eq!(frames, (next..next + 4).collect::<Vec<_>>());
        next += 4;
        let seq = dir.path().join("data").join(s["config"].as_str().unwrap()).parent().unwrap().to_path_buf();
        assert!(seq.join("trajectory.csv").is_file());
        assert!(seq.join("targets/0003.xyz").is_file());
        for f in &frames {
            for ext in ["pfm", "normal.ppm", "mask.pbm", "ppm", "xyz"] {
                assert!(dir.path().join(format!("data/frames/{f:04}.{ext}")).is_file(), "{f}.{ext}");
            }
        }
    }
}

#[test]
fn evaluating_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 2);
    ok(dir.path(), &["evaluate", "--config", "small.json", "--pred", "data", "--gt", "data", "--out", "eval"]);
    let report = json(&dir.path().join("eval/metrics_report.json"));
    assert_eq!(report["schema_version"], 1);
    let mean = &report["mean"];
    assert_eq!(mean["image"]["mean_l2"].as_f64().unwrap(), 0.0);
    assert_eq!(mean["image"]["psnr"], "inf");
    assert_eq!(mean["cloud"]["l2_cd"].as_f64().unwrap(), 0.0);
    assert_eq!(mean["cloud"]["emd"].as_f64().unwrap(), 0.0);
    assert_eq!(mean["cloud"]["fscore_1mm"].as_f64().unwrap(), 100.0);
    let csv = std::fs::read_to_string(dir.path().join("eval/metrics_report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "frame,mean_l2,sig_l2,psnr,l2_cd,sig_l2_cd,emd,fscore_1mm");
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn mismatched_frames_are_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    let pred = dir.path().join("pred/frames");
    std::fs::create_dir_all(&pred).unwrap();
    for k in 0..3 {
        std::fs::copy(dir.path().join(format!("data/frames/{k:04}.ppm")), pred.join(format!("{k:04}.ppm"))).unwrap();
    }
    let o =
        gelsim(dir.path(), &["evaluate", "--config", "small.json", "--pred", "pred", "--gt", "data", "--out", "eval"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn calibrating_an_empty_directory_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let o = gelsim(dir.path(), &["calibrate", "--sequences", "empty", "--out", "c"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn diverging_calibration_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    let mut cfg: Value = serde_json::from_str(SMALL).unwrap();
    cfg["calibration"]["init_E"] = serde_json::json!(1e12);
    std::fs::write(dir.path().join("stiff.json"), cfg.to_string()).unwrap();
    let o = gelsim(dir.path(), &["calibrate", "--config", "stiff.json", "--sequences", "data/sequences", "--out", "c"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("scene_000"), "{}", stderr(&o));
    assert!(!dir.path().join("c/calibration_result.json").exists());
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    std::fs::write(dir.path().join("blocker"), b"").unwrap();
    let o = gelsim(
        dir.path(),
        &["evaluate", "--config", "small.json", "--pred", "data", "--gt", "data", "--out", "blocker/eval"],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn missing_dataset_pieces_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("nothing")).unwrap();
    let o = gelsim(dir.path(), &["train-optical", "--dataset", "nothing", "--out", "t"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = gelsim(dir.path(), &["evaluate", "--pred", "nothing", "--gt", "nothing", "--split", "eval", "--out", "e"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn seed_flag_changes_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.json"), SMALL).unwrap();
    for (seed, out) in [("1", "a"), ("1", "b"), ("2", "c")] {
        ok(dir.path(), &["gen-synthetic", "--config", "small.json", "--scenes", "2", "--seed", seed, "--out", out]);
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("manifest.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(json(&dir.path().join("a/manifest.json"))["seed"], 1);
}

#[test]
fn full_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 3);
    let d = dir.path();
    ok(d, &["calibrate", "--config", "small.json", "--sequences", "data/sequences", "--out", "calib"]);
    ok(d, &["train-optical", "--config", "small.json", "--dataset", "data", "--out", "train"]);
    ok(
        d,
        &[
            "render",
            "--config",
            "small.json",
            "--dataset",
            "data",
            "--weights",
            "train/weights.optw",
            "--calibration",
            "calib/calibration_result.json",
            "--out",
            "pred",
        ],
    );
    ok(d, &["evaluate", "--config", "small.json", "--pred", "pred", "--gt", "data", "--out", "eval"]);

    let calib = json(&d.join("calib/calibration_result.json"));
    assert_eq!(calib["schema_version"], 1);
    assert_eq!(calib["sequences"].as_array().unwrap().len(), 3);
    assert!(calib["E"].as_f64().unwrap() > 0.0);
    let history = std::fs::read_to_string(d.join("train/loss_history.csv")).unwrap();
    assert_eq!(history.lines().next().unwrap(), "epoch,loss");
    assert_eq!(history.lines().count(), 3);
    let render = json(&d.join("pred/render.json"));
    assert_eq!(render["E"], calib["E"]);
    let report = json(&d.join("eval/metrics_report.json"));
    let frames = report["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 12);
    let psnr = report["mean"]["image"]["psnr"].as_f64().unwrap();
    assert!(psnr.is_finite() && psnr > 10.0, "{psnr}");
}
