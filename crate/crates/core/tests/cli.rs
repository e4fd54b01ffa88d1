//! End-to-end checks of the `fota` binary: exit codes, manifests, schemas,
//! golden eval output and the solve fixtures.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use fota::model::{Box3D, Detection, FrameBundle};
use fota::scenario::{rig_at, FileHeader, GtFrame, ScenarioConfig};

fn fota(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fota")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fota(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_jsonl<H: serde::Serialize, L: serde::Serialize>(p: &Path, header: &H, lines: &[L]) {
    let mut text = serde_json::to_string(header).unwrap() + "\n";
    for l in lines {
        text += &serde_json::to_string(l).unwrap();
        text.push('\n');
    }
    std::fs::write(p, text).unwrap();
}

fn sha256_hex(p: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(p).unwrap()))
}

/// Small scenario on disk: returns (frames, gt) paths.
fn generated(dir: &TempDir, prefix: &str, seed: &str, frames: &str) -> (String, String) {
    ok(&["generate", "--out", &path(dir, prefix), "--seed", seed, "--frames", frames]);
    (path(dir, &format!("{prefix}.frames.jsonl")), path(dir, &format!("{prefix}.gt.jsonl")))
}

#[test]
fn generate_writes_two_files_and_a_verifiable_manifest() {
    let dir = TempDir::new().unwrap();
    generated(&dir, "a", "42", "8");
    let manifest = read_json(path(&dir, "a.manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["config"]["seed"], 42);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for o in outputs {
        let file = dir.path().join(o["path"].as_str().unwrap());
        assert_eq!(o["sha256"].as_str().unwrap(), sha256_hex(&file));
    }
    let errors = common::jsonl_schema_errors(Path::new(&path(&dir, "a.frames.jsonl")), "scenario_header", "frame_bundle");
    assert!(errors.is_empty(), "{errors:?}");
    let errors = common::jsonl_schema_errors(Path::new(&path(&dir, "a.gt.jsonl")), "scenario_header", "gt_frame");
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn same_invocation_gives_identical_digests() {
    let dir = TempDir::new().unwrap();
    generated(&dir, "a", "7", "10");
    generated(&dir, "b", "7", "10");
    let digests = |name: &str| -> Vec<String> {
        read_json(path(&dir, name))["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].as_str().unwrap().to_owned())
            .collect()
    };
    assert_eq!(digests("a.manifest.json"), digests("b.manifest.json"));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, r#"{"miss_rate": 1.5}"#).unwrap();
    let out = fota(&["generate", "--config", &bad, "--out", &path(&dir, "x")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("miss_rate"));

    let out = fota(&["track", &path(&dir, "missing.jsonl"), "--out", &path(&dir, "r.jsonl")]);
    assert_eq!(out.status.code(), Some(1));

    let (frames, _) = generated(&dir, "s", "1", "3");
    for args in [["--association", "hungarian"], ["--metric", "iou"]] {
        let out = fota(&["track", &frames, "--out", &path(&dir, "r.jsonl"), args[0], args[1]]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn track_output_matches_schema_and_records_inputs() {
    let dir = TempDir::new().unwrap();
    let (frames, _) = generated(&dir, "s", "3", "12");
    let results = path(&dir, "r.jsonl");
    ok(&["track", &frames, "--out", &results, "--metric", "giou3d", "--association", "km"]);
    let errors = common::jsonl_schema_errors(Path::new(&results), "results_header", "frame_result");
    assert!(errors.is_empty(), "{errors:?}");
    let manifest = read_json(format!("{results}.manifest.json"));
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap(), sha256_hex(Path::new(&frames)));
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap(), sha256_hex(Path::new(&results)));
    let header: Value = serde_json::from_str(std::fs::read_to_string(&results).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["tracker_config"]["association"], "km");
    assert_eq!(header["tracker_config"]["distance_metric"], "giou3d");
}

#[test]
fn noise_free_fota_tracking_has_no_identity_switches() {
    let dir = TempDir::new().unwrap();
    let config = path(&dir, "clean.json");
    let clean = json!({
        "seed": 42, "num_frames": 60, "miss_rate": 0.0, "clutter_rate": 0.0,
        "detection_noise_sigma": {"pos": 0.0, "dims": 0.0, "yaw": 0.0, "velocity": 0.0}
    });
    std::fs::write(&config, clean.to_string()).unwrap();
    ok(&["generate", "--config", &config, "--out", &path(&dir, "s")]);
    let results = path(&dir, "r.jsonl");
    ok(&["track", &path(&dir, "s.frames.jsonl"), "--out", &results, "--association", "fota", "--metric", "mahalanobis"]);
    let report = path(&dir, "report.json");
    ok(&["eval", "--gt", &path(&dir, "s.gt.jsonl"), "--results", &results, "--report", &report]);
    let report = read_json(report);
    assert_eq!(report["ids"], 0);
    assert!(report["mota"].as_f64().unwrap() > 0.99);
}

/// One car seen by two overlapping cameras for five frames.
fn two_camera_fixture(dir: &TempDir) -> String {
    let mut config = ScenarioConfig::default();
    config.num_cameras = 2;
    config.rig.yaw_offsets_deg = Some(vec![0.0, 30.0]);
    let header = FileHeader {
        schema_version: 1,
        scenario_id: config.scenario_id(),
        config: config.clone(),
    };
    let frames: Vec<FrameBundle> = (0..5u64)
        .map(|t| {
            let b = Box3D::new([12.0 + 0.5 * t as f64, 3.0, 0.8], [4.5, 1.9, 1.6], 0.0).unwrap();
            let dets = vec![Detection::new(b, 1, 0.9, 0, t), Detection::new(b, 1, 0.9, 1, t)];
            FrameBundle::new(t, 0.5 * t as f64, dets, rig_at(&config, 0.0))
        })
        .collect();
    let p = dir.path().join("two_camera.frames.jsonl");
    write_jsonl(&p, &header, &frames);
    p.to_string_lossy().into_owned()
}

fn reported_ids(results: &str) -> BTreeSet<u64> {
    std::fs::read_to_string(results)
        .unwrap()
        .lines()
        .skip(1)
        .flat_map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            v["outputs"].as_array().unwrap().iter().map(|o| o["track_id"].as_u64().unwrap()).collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn km_splits_a_co_visible_object_and_fota_does_not() {
    let dir = TempDir::new().unwrap();
    let frames = two_camera_fixture(&dir);
    let (km, fota_out) = (path(&dir, "km.jsonl"), path(&dir, "fota.jsonl"));
    ok(&["track", &frames, "--association", "km", "--out", &km]);
    ok(&["track", &frames, "--association", "fota", "--out", &fota_out]);
    assert!(reported_ids(&km).len() > 1);
    assert_eq!(reported_ids(&fota_out).len(), 1);
}

/// Results whose outputs are the ground truth boxes themselves.
fn perfect_results(dir: &TempDir, gt: &str, tracked: &str) -> String {
    let text = std::fs::read_to_string(gt).unwrap();
    let frames: Vec<GtFrame> = text.lines().skip(1).map(|l| serde_json::from_str(l).unwrap()).collect();
    let header: Value = serde_json::from_str(std::fs::read_to_string(tracked).unwrap().lines().next().unwrap()).unwrap();
    let lines: Vec<Value> = frames
        .iter()
        .map(|f| {
            let outputs: Vec<Value> = f
                .objects
                .iter()
                .map(|o| json!({"track_id": o.gt_id, "class_id": o.class_id, "box": o.bbox, "score": 1.0, "velocity": o.velocity}))
                .collect();
            json!({"frame_index": f.frame_index, "outputs": outputs})
        })
        .collect();
    let p = dir.path().join("perfect.jsonl");
    write_jsonl(&p, &header, &lines);
    p.to_string_lossy().into_owned()
}

#[test]
fn eval_of_perfect_results_prints_mota_one_and_a_valid_report() {
    let dir = TempDir::new().unwrap();
    let (frames, gt) = generated(&dir, "s", "5", "15");
    let tracked = path(&dir, "r.jsonl");
    ok(&["track", &frames, "--out", &tracked]);
    let perfect = perfect_results(&dir, &gt, &tracked);
    let report = path(&dir, "report.json");
    let table = ok(&["eval", "--gt", &gt, "--results", &perfect, "--report", &report]);
    let all = table.lines().find(|l| l.starts_with("all")).unwrap();
    assert_eq!(all.split_whitespace().nth(4), Some("1.000"), "{table}");
    let value = read_json(&report);
    assert_eq!(value["mota"], 1.0);
    let errors = common::schema_errors(&common::load_schema("metric_report"), &value);
    assert!(errors.is_empty(), "{errors:?}");

    let json_out: Value = serde_json::from_str(&ok(&["eval", "--gt", &gt, "--results", &perfect, "--format", "json"])).unwrap();
    assert_eq!(json_out, value);
}

#[test]
fn eval_rejects_results_from_another_scenario() {
    let dir = TempDir::new().unwrap();
    let (frames, _) = generated(&dir, "a", "1", "4");
    let (_, other_gt) = generated(&dir, "b", "2", "4");
    let results = path(&dir, "r.jsonl");
    ok(&["track", &frames, "--out", &results]);
    let out = fota(&["eval", "--gt", &other_gt, "--results", &results]);
    assert_eq!(out.status.code(), Some(2));
}

/// Gt and result files around a metrics fixture, with headers taken from a
/// real generate/track run so the scenario ids agree.
fn fixture_files(dir: &TempDir, name: &str) -> (String, String) {
    let (frames, gt) = generated(dir, "h", "0", "2");
    let tracked = path(dir, "h.results.jsonl");
    ok(&["track", &frames, "--out", &tracked]);
    let first = |p: &str| -> Value { serde_json::from_str(std::fs::read_to_string(p).unwrap().lines().next().unwrap()).unwrap() };
    let fixture = read_json(common::fixture_dir().join("metrics").join(format!("{name}.json")));
    let (gt_out, hyp_out) = (dir.path().join(format!("{name}.gt.jsonl")), dir.path().join(format!("{name}.hyp.jsonl")));
    write_jsonl(&gt_out, &first(&gt), fixture["gt"].as_array().unwrap());
    write_jsonl(&hyp_out, &first(&tracked), fixture["hyp"].as_array().unwrap());
    (gt_out.to_string_lossy().into_owned(), hyp_out.to_string_lossy().into_owned())
}

#[test]
fn eval_table_matches_golden_file() {
    let dir = TempDir::new().unwrap();
    let (gt, hyp) = fixture_files(&dir, "id_switch");
    let table = ok(&["eval", "--gt", &gt, "--results", &hyp]);
    let golden: PathBuf = common::fixture_dir().join("metrics").join("id_switch.table.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &table).unwrap();
    }
    assert_eq!(table, std::fs::read_to_string(golden).unwrap());
}

#[test]
fn solve_fixtures_reproduce_expected_plans() {
    let dir = common::fixture_dir().join("solve");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().into_string().unwrap().strip_suffix(".problem.json").map(str::to_owned))
        .collect();
    names.sort();
    assert_eq!(names, ["diagonal", "one_to_many", "uniform"]);
    for name in names {
        let problem = dir.join(format!("{name}.problem.json"));
        let got: Value = serde_json::from_str(&ok(&["solve", problem.to_str().unwrap()])).unwrap();
        let want = read_json(dir.join(format!("{name}.expected.json")));
        let tol = want["tol"].as_f64().unwrap();
        for (i, row) in want["interior"].as_array().unwrap().iter().enumerate() {
            for (j, v) in row.as_array().unwrap().iter().enumerate() {
                let g = got["plan"][i][j].as_f64().unwrap();
                assert!((g - v.as_f64().unwrap()).abs() <= tol, "{name}[{i}][{j}] = {g}");
            }
        }
        assert_eq!(got["assignment"], want["assignment"], "{name}");
        assert_eq!(got["converged"], true, "{name}");
    }
}

#[test]
fn solve_rejects_unknown_fields_and_ragged_costs() {
    let dir = TempDir::new().unwrap();
    for (name, body) in [("typo", r#"{"cost": [[1.0]], "gama": 0.1}"#), ("ragged", r#"{"cost": [[1.0, 2.0], [3.0]]}"#)] {
        let p = path(&dir, name);
        std::fs::write(&p, body).unwrap();
        assert_eq!(fota(&["solve", &p]).status.code(), Some(2), "{name}");
    }
}

#[test]
fn loss_document_reports_the_tagged_value() {
    let dir = TempDir::new().unwrap();
    let cube = |x: f64| json!({"center": [x, 0.0, 0.5], "dims": [1.0, 1.0, 1.0], "yaw": 0.0});
    let doc = json!({
        "gts": [{"track_id": 0, "class_id": 1, "box": cube(0.0), "visible_t": true, "visible_prev": false}],
        "preds": [{"box": cube(1.0), "class_probs": [0.0, 1.0, 0.0, 0.0], "query_kind": {"kind": "object_query"}}],
        "weights": {"lambda_l1": 0.0, "lambda_giou": 2.0}
    });
    let p = path(&dir, "loss.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    let out: Value = serde_json::from_str(&ok(&["loss", &p])).unwrap();
    assert!((out["loss"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{out}");
    assert_eq!(out["matching"], json!([0]));
}

#[test]
fn compare_over_seeds_prints_six_rows_with_spread() {
    let dir = TempDir::new().unwrap();
    let config = path(&dir, "short.json");
    std::fs::write(&config, r#"{"num_frames": 15}"#).unwrap();
    let table = ok(&["compare", "--seeds", "2", "--config", &config]);
    let rows: Vec<&str> = table.lines().skip(1).filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(rows.len(), 6, "{table}");
    assert!(rows.iter().all(|r| r.contains('±')), "{table}");

    let rows: Value = serde_json::from_str(&ok(&["compare", "--seeds", "2", "--config", &config, "--format", "json"])).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["reports"].as_array().unwrap().len() == 2));
}
