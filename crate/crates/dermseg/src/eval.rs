//! Challenge-style scoring of predicted masks against ground truth.

use serde::{Deserialize, Serialize};

use crate::imgcore::BinaryMask;
use crate::{Error, Result};

/// Pixel-level confusion counts; foreground = lesion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// The five challenge metrics plus their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsScores {
    pub jaccard: f64,
    pub dice: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub overall: f64,
}

/// Scores for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub image_id: String,
    #[serde(flatten)]
    pub scores: MetricsScores,
}

/// Per-image scores plus unweighted dataset means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<ImageScore>,
    pub mean: MetricsScores,
}

/// Tallies per-pixel agreement between prediction and ground truth.
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::dims(
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
            "prediction vs ground truth",
        ));
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_pos += 1,
            (false, true) => counts.false_neg += 1,
            (false, false) => counts.true_neg += 1,
        }
    }
    Ok(counts)
}

#[inline]
fn ratio(num: u64, den: u64) -> f64 {
    // a zero denominator means the condition is vacuous (nothing to miss
    // or nothing to falsely flag), which scores as perfect
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Derives the five metrics and their mean from confusion counts.
/// The counts must cover at least one pixel.
pub fn metrics(counts: &ConfusionCounts) -> MetricsScores {
    assert!(counts.total() > 0, "metrics need at least one pixel");
    let ConfusionCounts {
        true_pos: tp,
        false_pos: fp,
        false_neg: fneg,
        true_neg: tn,
    } = *counts;

    let jaccard = ratio(tp, tp + fp + fneg);
    let dice = ratio(2 * tp, 2 * tp + fp + fneg);
    let sensitivity = ratio(tp, tp + fneg);
    let specificity = ratio(tn, tn + fp);
    let accuracy = (tp + tn) as f64 / counts.total() as f64;
    let overall = (jaccard + dice + sensitivity + specificity + accuracy) / 5.0;
    MetricsScores {
        jaccard,
        dice,
        sensitivity,
        specificity,
        accuracy,
        overall,
    }
}

/// Scores every (prediction, ground truth) pair and aggregates unweighted
/// dataset means; the dataset overall is the mean of the five mean metrics.
pub fn evaluate_dataset(pairs: &[(String, &BinaryMask, &BinaryMask)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no prediction/ground-truth pairs"));
    }
    let mut per_image = Vec::with_capacity(pairs.len());
    let mut sums = [0.0f64; 5];
    for (id, pred, gt) in pairs {
        let scores = metrics(&confusion(pred, gt)?);
        sums[0] += scores.jaccard;
        sums[1] += scores.dice;
        sums[2] += scores.sensitivity;
        sums[3] += scores.specificity;
        sums[4] += scores.accuracy;
        per_image.push(ImageScore {
            image_id: id.clone(),
            scores,
        });
    }
    let n = pairs.len() as f64;
    let means = [sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n, sums[4] / n];
    let mean = MetricsScores {
        jaccard: means[0],
        dice: means[1],
        sensitivity: means[2],
        specificity: means[3],
        accuracy: means[4],
        overall: means.iter().sum::<f64>() / 5.0,
    };
    Ok(MetricsReport { per_image, mean })
}

/// Per-image CSV with the challenge column layout.
pub fn report_csv(report: &MetricsReport) -> String {
    let mut out = String::from("image_id,jaccard,dice,sensitivity,specificity,accuracy\n");
    for entry in &report.per_image {
        let s = &entry.scores;
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            entry.image_id, s.jaccard, s.dice, s.sensitivity, s.specificity, s.accuracy
        ));
    }
    out
}

/// JSON summary: dataset means, overall, image count, and the resolution
/// the masks were scored at.
pub fn report_summary_json(report: &MetricsReport, scored_at: &str) -> serde_json::Value {
    serde_json::json!({
        "images": report.per_image.len(),
        "scored_at": scored_at,
        "mean": report.mean,
    })
}
