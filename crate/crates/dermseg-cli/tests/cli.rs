//! Integration tests for the batch commands and the binary.

mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use dermseg::colormodel;
use dermseg::imgcore::io;
use dermseg_cli::commands::{cmd_evaluate, cmd_pipeline, cmd_segment, cmd_train};
use dermseg_cli::manifest::RunManifest;
use dermseg_cli::CliError;

#[test]
fn jpeg_round_trip_is_gentle_on_fixture_colors() {
    // quality-100 JPEG must not push any fixture pixel across the color
    // margins the corpus relies on (flood tolerance 20, tone gap >= 40)
    let dir = tempfile::tempdir().unwrap();
    let f = lesion_fixture("probe", (101, 101), (50, 50), 15, [90, 60, 70], None);
    let path = dir.path().join("probe.jpg");
    write_jpeg(&f.image, &path);
    let back = io::load_rgb(&path).unwrap();
    let max_err = f
        .image
        .data()
        .iter()
        .flatten()
        .zip(back.data().iter().flatten())
        .map(|(a, b)| (*a as i16 - *b as i16).abs())
        .max()
        .unwrap();
    assert!(max_err <= 12, "jpeg round-trip error {max_err} too large");
}

#[test]
fn train_learns_fixture_colors_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, _) = six_image_corpus(dir.path());
    let model_path = dir.path().join("model.json");
    cmd_train(&train_dir, &model_path, &corpus_config()).unwrap();

    let model = colormodel::load_model(&std::fs::read(&model_path).unwrap()).unwrap();
    assert_eq!(model.per_class.len(), 3);
    for class in ["melanoma", "nevus", "seborrheic_keratosis"] {
        assert!(model.per_class.contains_key(class), "missing {class}");
    }
    // lesion colors sit in 80..=100 per the fixtures, with jpeg slack
    let r = model.combined;
    assert!(r.lo[0] >= 70 && r.hi[0] <= 110, "red range {:?}", r);
    assert!(r.lo[1] >= 45 && r.hi[1] <= 80, "green range {:?}", r);
}

#[test]
fn train_without_masks_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data, &[lesion_free_fixture("plain", (40, 40))]);
    let err = cmd_train(&data, &dir.path().join("m.json"), &corpus_config()).unwrap_err();
    assert!(matches!(err, CliError::Data(_)));
}

#[test]
fn segment_writes_masks_overlays_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, eval_dir) = six_image_corpus(dir.path());
    let model_path = dir.path().join("model.json");
    let config = corpus_config();
    cmd_train(&train_dir, &model_path, &config).unwrap();

    let out = dir.path().join("masks");
    let outcome = cmd_segment(&eval_dir, &model_path, &out, &config).unwrap();
    assert_eq!(outcome.failures, 0);

    // every eval image got a prediction matching its ground truth well
    for f in [
        lesion_fixture("eval_a", (101, 101), (50, 50), 15, [90, 60, 70], None),
        lesion_fixture("eval_b", (110, 101), (60, 45), 13, [85, 58, 68], None),
        lesion_fixture("eval_c", (101, 110), (45, 60), 15, [95, 62, 72], None),
    ] {
        let pred = io::load_mask(&out.join(format!("{}_pred.png", f.id))).unwrap();
        let score = iou(&pred, &f.mask);
        assert!(score >= 0.95, "{}: IoU {score}", f.id);
        assert!(out.join(format!("{}_overlay.png", f.id)).is_file());
    }

    let manifest = RunManifest::from_json(
        &std::fs::read_to_string(out.join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest.entries.len(), 3);
    assert_eq!(manifest.failures, 0);
    assert!(manifest.entries.iter().all(|e| e.error.is_none()));
    assert_eq!(manifest.config, config);
}

#[test]
fn lesion_free_image_yields_empty_mask_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, _) = six_image_corpus(dir.path());
    let model_path = dir.path().join("model.json");
    let config = corpus_config();
    cmd_train(&train_dir, &model_path, &config).unwrap();

    let data = dir.path().join("nolesion");
    write_dataset(&data, &[lesion_free_fixture("plain", (60, 60))]);
    let out = dir.path().join("out");
    let outcome = cmd_segment(&data, &model_path, &out, &config).unwrap();
    assert_eq!(outcome.failures, 0);

    let pred = io::load_mask(&out.join("plain_pred.png")).unwrap();
    assert_eq!(pred.count_true(), 0);
    let manifest =
        RunManifest::from_json(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert!(manifest.entries[0].no_cluster_selected);
}

#[test]
fn per_image_failures_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, eval_dir) = six_image_corpus(dir.path());
    let model_path = dir.path().join("model.json");
    let config = corpus_config();
    cmd_train(&train_dir, &model_path, &config).unwrap();

    // corrupt one jpeg
    std::fs::write(eval_dir.join("eval_b.jpg"), b"not a jpeg").unwrap();
    let out = dir.path().join("masks");
    let outcome = cmd_segment(&eval_dir, &model_path, &out, &config).unwrap();
    assert_eq!(outcome.failures, 1);

    let manifest =
        RunManifest::from_json(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    let failed = manifest
        .entries
        .iter()
        .find(|e| e.image_id == "eval_b")
        .unwrap();
    assert!(failed.error.is_some());
    assert!(failed.pred_path.is_none());
    // the other two images still produced masks
    assert!(out.join("eval_a_pred.png").is_file());
    assert!(out.join("eval_c_pred.png").is_file());
}

#[test]
fn evaluate_perfect_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let gt_dir = dir.path().join("gt");
    let pred_dir = dir.path().join("pred");
    std::fs::create_dir_all(&gt_dir).unwrap();
    std::fs::create_dir_all(&pred_dir).unwrap();

    let f = lesion_fixture("img1", (50, 50), (25, 25), 10, [90, 60, 70], None);
    io::save_mask(&f.mask, &gt_dir.join("img1_segmentation.png")).unwrap();
    io::save_mask(&f.mask, &pred_dir.join("img1_pred.png")).unwrap();

    let out = dir.path().join("metrics");
    cmd_evaluate(&pred_dir, &gt_dir, &out).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mean"]["overall"], 1.0);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.lines().count() == 2 && csv.starts_with("image_id,"));

    // unmatched prediction fails and is named
    io::save_mask(&f.mask, &pred_dir.join("orphan_pred.png")).unwrap();
    let err = cmd_evaluate(&pred_dir, &gt_dir, &out).unwrap_err();
    assert!(err.to_string().contains("orphan"));
    std::fs::remove_file(pred_dir.join("orphan_pred.png")).unwrap();

    // dimension mismatch fails and names the id
    let small = dermseg::imgcore::BinaryMask::empty(10, 10);
    io::save_mask(&small, &pred_dir.join("img1_pred.png")).unwrap();
    let err = cmd_evaluate(&pred_dir, &gt_dir, &out).unwrap_err();
    assert!(err.to_string().contains("img1"));
}

#[test]
fn pipeline_emits_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, eval_dir) = six_image_corpus(dir.path());
    let out = dir.path().join("run");
    let outcome = cmd_pipeline(&train_dir, &eval_dir, &out, &corpus_config()).unwrap();
    assert_eq!(outcome.failures, 0);

    assert!(out.join("model.json").is_file());
    assert!(out.join("masks/manifest.json").is_file());
    assert!(out.join("metrics.csv").is_file());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let overall = summary["mean"]["overall"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&overall));
    assert!(overall > 0.9, "overall {overall}");
    assert_eq!(summary["scored_at"], "processing_resolution");
}

#[test]
fn oversized_images_score_at_original_resolution_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    // 1600 px wide: the size rule shrinks it to 400x75 for processing;
    // 12-px texture cells survive the quarter-scale as 3-px cells
    let mk = |id, center| {
        lesion_fixture_cells(id, (1600, 300), center, 60, [90, 60, 70], 12, None)
    };
    let train_dir = dir.path().join("train");
    let eval_dir = dir.path().join("eval");
    write_dataset(&train_dir, &[mk("big_t", (700, 140))]);
    write_dataset(&eval_dir, &[mk("big", (800, 150))]);

    let mut config = corpus_config();
    config.score_at_original_resolution = true;
    let out = dir.path().join("run");
    cmd_pipeline(&train_dir, &eval_dir, &out, &config).unwrap();

    // the prediction was upscaled back to the photo's dimensions; the
    // quarter-resolution boundary costs precision, so the bar is lower
    // than at processing resolution
    let pred = io::load_mask(&out.join("masks/big_pred.png")).unwrap();
    assert_eq!((pred.width(), pred.height()), (1600, 300));
    let gt = mk("big", (800, 150)).mask;
    let score = iou(&pred, &gt);
    assert!(score >= 0.8, "IoU {score} at original resolution");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scored_at"], "original_resolution");
}

#[test]
fn rerun_from_manifest_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, eval_dir) = six_image_corpus(dir.path());
    let model_path = dir.path().join("model.json");
    let config = corpus_config();
    cmd_train(&train_dir, &model_path, &config).unwrap();

    let out1 = dir.path().join("run1");
    cmd_segment(&eval_dir, &model_path, &out1, &config).unwrap();

    // re-execute using only what the manifest recorded
    let manifest =
        RunManifest::from_json(&std::fs::read_to_string(out1.join("manifest.json")).unwrap())
            .unwrap();
    let out2 = dir.path().join("run2");
    cmd_segment(&eval_dir, Path::new(&manifest.model_path), &out2, &manifest.config).unwrap();

    let d1: Vec<_> = dir_digest(&out1)
        .into_iter()
        .filter(|(name, _)| name != "manifest.json")
        .collect();
    let d2: Vec<_> = dir_digest(&out2)
        .into_iter()
        .filter(|(name, _)| name != "manifest.json")
        .collect();
    assert_eq!(d1, d2);
}

fn run_binary(args: &[&str], envs: &[(&str, &str)]) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dermseg"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // usage errors exit 1
    let out = run_binary(&["train", "--data"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_binary(&["nonsense"], &[]);
    assert_eq!(out.status.code(), Some(1));

    // data errors exit 2
    let missing = dir.path().join("missing");
    let out = run_binary(
        &[
            "train",
            "--data",
            missing.to_str().unwrap(),
            "--out",
            dir.path().join("m.json").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));

    // config defaults print and exit 0
    let out = run_binary(&["config", "--print-defaults"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["segment"]["kmeans"]["k"], 5);

    // per-image failures exit 3
    let (train_dir, eval_dir) = six_image_corpus(dir.path());
    let model = dir.path().join("model.json");
    let out = run_binary(
        &[
            "train",
            "--data",
            train_dir.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
            "--set",
            "clahe_enabled=false",
            "--set",
            "hair_removal_enabled=false",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(eval_dir.join("eval_a.jpg"), b"broken").unwrap();
    let out = run_binary(
        &[
            "segment",
            "--data",
            eval_dir.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--out",
            dir.path().join("masks").to_str().unwrap(),
            "--set",
            "clahe_enabled=false",
            "--set",
            "hair_removal_enabled=false",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn worker_count_independence_via_env() {
    let dir = tempfile::tempdir().unwrap();
    let (train_dir, eval_dir) = six_image_corpus(dir.path());

    // both runs write the same path so every output, including the
    // manifest with its embedded paths, must be byte-identical
    let out = dir.path().join("run");
    let mut digests = Vec::new();
    for workers in ["1", "4"] {
        if out.exists() {
            std::fs::remove_dir_all(&out).unwrap();
        }
        let result = run_binary(
            &[
                "pipeline",
                "--train",
                train_dir.to_str().unwrap(),
                "--eval",
                eval_dir.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--set",
                "clahe_enabled=false",
                "--set",
                "hair_removal_enabled=false",
            ],
            &[("DERMSEG_WORKERS", workers)],
        );
        assert_eq!(
            result.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&result.stderr)
        );
        digests.push(dir_digest(&out));
    }
    let names = |d: &Vec<(String, Vec<u8>)>| d.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&digests[0]), names(&digests[1]));
    for ((name, a), (_, b)) in digests[0].iter().zip(&digests[1]) {
        assert_eq!(a, b, "file {name} differs between worker counts");
    }
}
