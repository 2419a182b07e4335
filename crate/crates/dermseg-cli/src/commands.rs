//! The four batch commands: train, segment, evaluate, pipeline.
//!
//! Per-image work runs on a bounded worker pool; results are collected in
//! dataset-index order, so outputs are byte-identical for any worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dermseg::colormodel::{self, ColorHistogram, LesionColorModel, UNLABELED_CLASS};
use dermseg::eval;
use dermseg::imgcore::{self, io, BinaryMask, Dimensions, RgbImage};
use dermseg::pipeline::{preprocess_image, segment_preprocessed, PipelineConfig};

use crate::dataset::{index_dataset, DatasetEntry};
use crate::manifest::{ManifestEntry, RunManifest, MANIFEST_VERSION};
use crate::overlay::draw_boundary;
use crate::{CliError, Result};

/// Batch result; per-image failures are non-fatal but reported via the
/// exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchOutcome {
    pub failures: usize,
}

/// Worker count: `DERMSEG_WORKERS` overrides the config; 0 means one
/// thread per CPU.
fn worker_count(config: &PipelineConfig) -> Result<usize> {
    match std::env::var("DERMSEG_WORKERS") {
        Ok(raw) => raw
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("DERMSEG_WORKERS must be an integer, got '{raw}'"))),
        Err(_) => Ok(config.workers),
    }
}

fn thread_pool(config: &PipelineConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(config)?)
        .build()
        .map_err(|e| CliError::Data(format!("cannot build worker pool: {e}")))
}

/// Loads one training pair and returns its preprocessed image, the mask
/// tracked to the preprocessed dimensions, and the class name.
fn load_training_pair(
    entry: &DatasetEntry,
    config: &PipelineConfig,
) -> Result<(RgbImage, BinaryMask, String)> {
    let mask_path = entry.mask_path.as_ref().expect("masked entry");
    let img = io::load_rgb(&entry.image_path)?;
    let mask = io::load_mask(mask_path)?;
    if mask.dims() != img.dims() {
        return Err(CliError::Data(format!(
            "{}: mask {}x{} does not match image {}x{}",
            entry.image_id,
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    let pre = preprocess_image(&img, config)?;
    let mask = if pre.dims() != img.dims() {
        imgcore::resize_mask_nearest(&mask, pre.width(), pre.height())?
    } else {
        mask
    };
    let class = entry.class.clone().unwrap_or_else(|| UNLABELED_CLASS.to_string());
    Ok((pre, mask, class))
}

/// Trains the lesion color model from every masked entry under `data`.
pub fn cmd_train(data: &Path, out: &Path, config: &PipelineConfig) -> Result<()> {
    let index = index_dataset(data)?;
    let masked: Vec<&DatasetEntry> = index.masked_entries().collect();
    if masked.is_empty() {
        return Err(CliError::Data(format!(
            "no image/mask pairs under {}",
            data.display()
        )));
    }

    let pool = thread_pool(config)?;
    let per_image: Vec<Result<(String, ColorHistogram)>> = pool.install(|| {
        masked
            .par_iter()
            .map(|entry| {
                let (pre, mask, class) = load_training_pair(entry, config)?;
                let hist = colormodel::accumulate(
                    &pre,
                    &mask,
                    ColorHistogram::new(config.model.bins)?,
                )?;
                Ok((class, hist))
            })
            .collect()
    });

    // merge partial histograms in dataset order
    let mut by_class: BTreeMap<String, ColorHistogram> = BTreeMap::new();
    for item in per_image {
        let (class, hist) = item?;
        match by_class.get_mut(&class) {
            Some(acc) => acc.merge(&hist)?,
            None => {
                by_class.insert(class, hist);
            }
        }
    }

    for (class, hist) in &by_class {
        println!("class {class}: {} lesion pixels", hist.total());
    }

    let model = colormodel::train_from_histograms(
        by_class,
        config.model.percentile_lo,
        config.model.percentile_hi,
        config.model.bins,
    )?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    std::fs::write(out, colormodel::save_model(&model)).map_err(CliError::io(out))?;
    println!("model written to {}", out.display());
    Ok(())
}

fn load_model_file(path: &Path) -> Result<LesionColorModel> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(colormodel::load_model(&bytes)?)
}

/// Segments one image end to end; returns the manifest entry.
fn segment_one(entry: &DatasetEntry, model: &LesionColorModel, config: &PipelineConfig, out_dir: &Path) -> Result<ManifestEntry> {
    let original = io::load_rgb(&entry.image_path)?;
    let pre = preprocess_image(&original, config)?;
    let result = segment_preprocessed(&pre, model, config)?;

    let (mask, overlay_base) = if config.score_at_original_resolution && pre.dims() != original.dims()
    {
        let up = imgcore::resize_mask_nearest(&result.mask, original.width(), original.height())?;
        (up, &original)
    } else {
        (result.mask.clone(), &pre)
    };

    let pred_name = format!("{}_pred.png", entry.image_id);
    let overlay_name = format!("{}_overlay.png", entry.image_id);
    io::save_mask(&mask, &out_dir.join(&pred_name))?;
    io::save_rgb_png(&draw_boundary(overlay_base, &mask), &out_dir.join(&overlay_name))?;

    Ok(ManifestEntry {
        image_id: entry.image_id.clone(),
        pred_path: Some(pred_name),
        overlay_path: Some(overlay_name),
        no_cluster_selected: result.no_cluster_selected,
        seeds: result.seeds,
        error: None,
    })
}

/// Segments every indexed image, writing masks, overlays, and a manifest.
pub fn cmd_segment(
    data: &Path,
    model_path: &Path,
    out_dir: &Path,
    config: &PipelineConfig,
) -> Result<BatchOutcome> {
    let model = load_model_file(model_path)?;
    let index = index_dataset(data)?;
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;

    let pool = thread_pool(config)?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        index
            .entries
            .par_iter()
            .map(|entry| {
                segment_one(entry, &model, config, out_dir).unwrap_or_else(|e| ManifestEntry {
                    image_id: entry.image_id.clone(),
                    pred_path: None,
                    overlay_path: None,
                    no_cluster_selected: false,
                    seeds: Vec::new(),
                    error: Some(e.to_string()),
                })
            })
            .collect()
    });

    let failures = entries.iter().filter(|e| e.error.is_some()).count();
    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        model_path: model_path.display().to_string(),
        config: config.clone(),
        entries,
        failures,
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()).map_err(CliError::io(&manifest_path))?;

    println!(
        "segmented {} images, {} failures, manifest at {}",
        manifest.entries.len(),
        failures,
        manifest_path.display()
    );
    Ok(BatchOutcome { failures })
}

fn list_predictions(pred_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut preds = Vec::new();
    let listing = std::fs::read_dir(pred_dir).map_err(CliError::io(pred_dir))?;
    for item in listing {
        let path = item.map_err(CliError::io(pred_dir))?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(id) = name.strip_suffix("_pred.png") {
            preds.push((id.to_string(), path.clone()));
        }
    }
    preds.sort();
    Ok(preds)
}

fn write_report(report: &eval::MetricsReport, out_dir: &Path, scored_at: &str) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let csv_path = out_dir.join("metrics.csv");
    std::fs::write(&csv_path, eval::report_csv(report)).map_err(CliError::io(&csv_path))?;
    let json_path = out_dir.join("summary.json");
    let summary = serde_json::to_string_pretty(&eval::report_summary_json(report, scored_at))
        .expect("summary serializes");
    std::fs::write(&json_path, summary).map_err(CliError::io(&json_path))?;

    let m = &report.mean;
    println!(
        "jaccard {:.4}  dice {:.4}  sensitivity {:.4}  specificity {:.4}  accuracy {:.4}",
        m.jaccard, m.dice, m.sensitivity, m.specificity, m.accuracy
    );
    println!("overall score {:.4} over {} images", m.overall, report.per_image.len());
    Ok(())
}

/// Scores `<id>_pred.png` files against `<id>_segmentation.png` ground
/// truth of identical dimensions.
pub fn cmd_evaluate(pred_dir: &Path, gt_dir: &Path, out_dir: &Path) -> Result<()> {
    let preds = list_predictions(pred_dir)?;
    if preds.is_empty() {
        return Err(CliError::Data(format!(
            "no *_pred.png files under {}",
            pred_dir.display()
        )));
    }

    let unmatched: Vec<&str> = preds
        .iter()
        .filter(|(id, _)| !gt_dir.join(format!("{id}_segmentation.png")).is_file())
        .map(|(id, _)| id.as_str())
        .collect();
    if !unmatched.is_empty() {
        return Err(CliError::Data(format!(
            "predictions without ground truth: {}",
            unmatched.join(", ")
        )));
    }

    let mut loaded = Vec::with_capacity(preds.len());
    for (id, path) in &preds {
        let pred = io::load_mask(path)?;
        let gt = io::load_mask(&gt_dir.join(format!("{id}_segmentation.png")))?;
        if pred.dims() != gt.dims() {
            return Err(CliError::Data(format!(
                "{id}: prediction {}x{} does not match ground truth {}x{}",
                pred.width(),
                pred.height(),
                gt.width(),
                gt.height()
            )));
        }
        loaded.push((id.clone(), pred, gt));
    }
    let pairs: Vec<(String, &BinaryMask, &BinaryMask)> = loaded
        .iter()
        .map(|(id, p, g)| (id.clone(), p, g))
        .collect();
    let report = eval::evaluate_dataset(&pairs)?;
    write_report(&report, out_dir, "as_provided")
}

/// Train on one directory, segment and score another; the single command
/// that reproduces the experiment shape end to end.
pub fn cmd_pipeline(
    train_dir: &Path,
    eval_dir: &Path,
    out_dir: &Path,
    config: &PipelineConfig,
) -> Result<BatchOutcome> {
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let model_path = out_dir.join("model.json");
    cmd_train(train_dir, &model_path, config)?;

    let masks_dir = out_dir.join("masks");
    let outcome = cmd_segment(eval_dir, &model_path, &masks_dir, config)?;

    // score against ground truth, tracking masks to the scoring resolution
    let index = index_dataset(eval_dir)?;
    let mut loaded = Vec::new();
    for entry in index.masked_entries() {
        let pred_path = masks_dir.join(format!("{}_pred.png", entry.image_id));
        if !pred_path.is_file() {
            continue; // per-image failure already recorded in the manifest
        }
        let pred = io::load_mask(&pred_path)?;
        let mut gt = io::load_mask(entry.mask_path.as_ref().expect("masked entry"))?;
        if gt.dims() != pred.dims() {
            gt = imgcore::resize_mask_nearest(&gt, pred.width(), pred.height())?;
        }
        loaded.push((entry.image_id.clone(), pred, gt));
    }
    if loaded.is_empty() {
        return Err(CliError::Data(
            "pipeline produced no scorable prediction/ground-truth pairs".into(),
        ));
    }
    let pairs: Vec<(String, &BinaryMask, &BinaryMask)> = loaded
        .iter()
        .map(|(id, p, g)| (id.clone(), p, g))
        .collect();
    let report = eval::evaluate_dataset(&pairs)?;
    let scored_at = if config.score_at_original_resolution {
        "original_resolution"
    } else {
        "processing_resolution"
    };
    write_report(&report, out_dir, scored_at)?;
    Ok(outcome)
}
