//! Lesion color model: per-channel histograms accumulated over masked
//! training pixels, reduced to percentile color ranges per lesion class
//! plus a combined envelope used when the class is unknown at inference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::imgcore::{BinaryMask, RgbImage};
use crate::{Error, Result};

/// Model file format version accepted by [`load_model`].
pub const MODEL_VERSION: u32 = 1;

/// Class bucket for samples without a label.
pub const UNLABELED_CLASS: &str = "unlabeled";

/// Per-channel counting histogram over 8-bit values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorHistogram {
    bins: usize,
    counts: [Vec<u64>; 3],
    total: u64,
}

impl ColorHistogram {
    /// `bins` must divide the 0..=255 range sensibly; 256 gives exact
    /// 8-bit resolution and is the default everywhere.
    pub fn new(bins: usize) -> Result<Self> {
        if !(2..=256).contains(&bins) {
            return Err(Error::InvalidParam(format!(
                "histogram bins must be in 2..=256, got {bins}"
            )));
        }
        Ok(Self {
            bins,
            counts: [vec![0; bins], vec![0; bins], vec![0; bins]],
            total: 0,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self, channel: usize) -> &[u64] {
        &self.counts[channel]
    }

    /// Lowest 8-bit value covered by a bin.
    fn bin_lo(&self, bin: usize) -> u8 {
        (bin * 256 / self.bins) as u8
    }

    /// Highest 8-bit value covered by a bin.
    fn bin_hi(&self, bin: usize) -> u8 {
        ((bin + 1) * 256 / self.bins - 1) as u8
    }

    fn add_pixel(&mut self, p: [u8; 3]) {
        let bins = self.bins;
        for (counts, &value) in self.counts.iter_mut().zip(&p) {
            counts[value as usize * bins / 256] += 1;
        }
        self.total += 1;
    }

    /// Merges another histogram with the same bin layout (parallel
    /// training workers combine their partial histograms this way).
    pub fn merge(&mut self, other: &ColorHistogram) -> Result<()> {
        if self.bins != other.bins {
            return Err(Error::InvalidParam(format!(
                "cannot merge histograms with {} and {} bins",
                self.bins, other.bins
            )));
        }
        for c in 0..3 {
            for (a, b) in self.counts[c].iter_mut().zip(&other.counts[c]) {
                *a += b;
            }
        }
        self.total += other.total;
        Ok(())
    }
}

/// Inclusive per-channel color box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorRange {
    pub lo: [u8; 3],
    pub hi: [u8; 3],
}

impl ColorRange {
    /// The whole RGB cube.
    pub fn full() -> Self {
        Self {
            lo: [0, 0, 0],
            hi: [255, 255, 255],
        }
    }

    /// Channel-wise envelope of two ranges.
    pub fn union(&self, other: &ColorRange) -> ColorRange {
        let mut lo = [0u8; 3];
        let mut hi = [0u8; 3];
        for c in 0..3 {
            lo[c] = self.lo[c].min(other.lo[c]);
            hi[c] = self.hi[c].max(other.hi[c]);
        }
        ColorRange { lo, hi }
    }

    pub fn contains(&self, other: &ColorRange) -> bool {
        (0..3).all(|c| self.lo[c] <= other.lo[c] && self.hi[c] >= other.hi[c])
    }

    /// Midpoint of the box, used by the fallback cluster picker.
    pub fn center(&self) -> [f64; 3] {
        [
            (self.lo[0] as f64 + self.hi[0] as f64) / 2.0,
            (self.lo[1] as f64 + self.hi[1] as f64) / 2.0,
            (self.lo[2] as f64 + self.hi[2] as f64) / 2.0,
        ]
    }
}

/// Learned lesion color model: one range per class and their envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionColorModel {
    pub version: u32,
    pub bins: usize,
    pub percentile_lo: f64,
    pub percentile_hi: f64,
    pub combined: ColorRange,
    pub per_class: BTreeMap<String, ColorRange>,
}

impl LesionColorModel {
    /// Range for a named class, or the combined envelope when `class` is
    /// `None` or unknown.
    pub fn range_for(&self, class: Option<&str>) -> ColorRange {
        class
            .and_then(|name| self.per_class.get(name).copied())
            .unwrap_or(self.combined)
    }
}

/// Adds every mask-true pixel of `img` into `hist` (one count per channel).
pub fn accumulate(img: &RgbImage, mask: &BinaryMask, mut hist: ColorHistogram) -> Result<ColorHistogram> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(Error::dims(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
            "training mask vs image",
        ));
    }
    for (p, &m) in img.data().iter().zip(mask.data()) {
        if m {
            hist.add_pixel(*p);
        }
    }
    Ok(hist)
}

/// Percentile color range: per channel, the boundary is the smallest bin
/// whose cumulative count reaches the requested percentage of the total.
pub fn derive_range(hist: &ColorHistogram, pct_lo: f64, pct_hi: f64) -> Result<ColorRange> {
    if !(0.0 <= pct_lo && pct_lo < pct_hi && pct_hi <= 100.0) {
        return Err(Error::InvalidParam(format!(
            "percentiles must satisfy 0 <= lo < hi <= 100, got {pct_lo}/{pct_hi}"
        )));
    }
    if hist.total == 0 {
        return Err(Error::EmptyInput("histogram has no accumulated pixels"));
    }

    let mut lo = [0u8; 3];
    let mut hi = [0u8; 3];
    for c in 0..3 {
        let lo_target = pct_lo / 100.0 * hist.total as f64;
        let hi_target = pct_hi / 100.0 * hist.total as f64;
        let mut cum = 0u64;
        let mut lo_bin = None;
        let mut hi_bin = None;
        for (b, &count) in hist.counts[c].iter().enumerate() {
            cum += count;
            if lo_bin.is_none() && cum as f64 >= lo_target {
                lo_bin = Some(b);
            }
            if hi_bin.is_none() && cum as f64 >= hi_target {
                hi_bin = Some(b);
                break;
            }
        }
        // cumulative total reaches 100% by construction
        let lb = lo_bin.unwrap_or(hist.bins - 1);
        let hb = hi_bin.unwrap_or(hist.bins - 1);
        lo[c] = hist.bin_lo(lb);
        hi[c] = hist.bin_hi(hb);
    }
    Ok(ColorRange { lo, hi })
}

/// One training sample: image, aligned lesion mask, optional class label.
pub type TrainingSample<'a> = (&'a RgbImage, &'a BinaryMask, Option<&'a str>);

/// Builds the model: one histogram per class (unlabeled samples go to the
/// "unlabeled" class), percentile ranges per class, combined envelope.
pub fn train(samples: &[TrainingSample<'_>], pct_lo: f64, pct_hi: f64, bins: usize) -> Result<LesionColorModel> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no training samples"));
    }

    let mut by_class: BTreeMap<String, ColorHistogram> = BTreeMap::new();
    for &(img, mask, class) in samples {
        let name = class.unwrap_or(UNLABELED_CLASS).to_string();
        let hist = match by_class.remove(&name) {
            Some(h) => h,
            None => ColorHistogram::new(bins)?,
        };
        by_class.insert(name, accumulate(img, mask, hist)?);
    }
    train_from_histograms(by_class, pct_lo, pct_hi, bins)
}

/// Model construction from already-accumulated per-class histograms;
/// batch trainers stream images through [`accumulate`] and finish here.
pub fn train_from_histograms(
    by_class: BTreeMap<String, ColorHistogram>,
    pct_lo: f64,
    pct_hi: f64,
    bins: usize,
) -> Result<LesionColorModel> {
    let mut per_class = BTreeMap::new();
    let mut combined: Option<ColorRange> = None;
    for (name, hist) in &by_class {
        if hist.total == 0 {
            // a class whose masks were all empty contributes nothing
            continue;
        }
        let range = derive_range(hist, pct_lo, pct_hi)?;
        combined = Some(match combined {
            Some(c) => c.union(&range),
            None => range,
        });
        per_class.insert(name.clone(), range);
    }
    let combined = combined.ok_or(Error::EmptyInput("all training masks are empty"))?;

    Ok(LesionColorModel {
        version: MODEL_VERSION,
        bins,
        percentile_lo: pct_lo,
        percentile_hi: pct_hi,
        combined,
        per_class,
    })
}

/// Inclusive membership test on all three channels.
#[inline]
pub fn pixel_in_range(pixel: [u8; 3], range: &ColorRange) -> bool {
    (0..3).all(|c| range.lo[c] <= pixel[c] && pixel[c] <= range.hi[c])
}

/// Fraction of the listed pixels passing [`pixel_in_range`]; an empty list
/// yields 0.
pub fn fraction_in_range(img: &RgbImage, pixel_ids: &[usize], range: &ColorRange) -> f64 {
    if pixel_ids.is_empty() {
        return 0.0;
    }
    let hits = pixel_ids
        .iter()
        .filter(|&&i| pixel_in_range(img.data()[i], range))
        .count();
    hits as f64 / pixel_ids.len() as f64
}

/// Serializes the model as a human-readable JSON document.
pub fn save_model(model: &LesionColorModel) -> Vec<u8> {
    serde_json::to_vec_pretty(model).expect("model serializes")
}

/// Parses and validates a model document produced by [`save_model`].
pub fn load_model(bytes: &[u8]) -> Result<LesionColorModel> {
    let model: LesionColorModel = serde_json::from_slice(bytes)?;
    if model.version != MODEL_VERSION {
        return Err(Error::ModelVersion {
            found: model.version,
            expected: MODEL_VERSION,
        });
    }
    for range in model.per_class.values().chain(std::iter::once(&model.combined)) {
        if (0..3).any(|c| range.lo[c] > range.hi[c]) {
            return Err(Error::InvalidParam("model range has lo > hi".into()));
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img_of(pixels: &[[u8; 3]]) -> RgbImage {
        RgbImage::new(pixels.len(), 1, pixels.to_vec()).unwrap()
    }

    fn full_mask(w: usize) -> BinaryMask {
        BinaryMask::filled(w, 1, true)
    }

    #[test]
    fn accumulate_counts_masked_pixels_only() {
        let hist = ColorHistogram::new(256).unwrap();
        let img = img_of(&[[10, 20, 30], [10, 20, 30]]);

        let empty = BinaryMask::empty(2, 1);
        let out = accumulate(&img, &empty, hist.clone()).unwrap();
        assert_eq!(out, hist);

        let out = accumulate(&img, &full_mask(2), hist).unwrap();
        assert_eq!(out.total(), 2);
        assert_eq!(out.counts(0)[10], 2);
        assert_eq!(out.counts(1)[20], 2);
        assert_eq!(out.counts(2)[30], 2);
    }

    #[test]
    fn accumulate_partial_mask() {
        let img = img_of(&[[1, 2, 3], [4, 5, 6], [7, 8, 9]]);
        let mut mask = BinaryMask::empty(3, 1);
        mask.set(0, 0, true);
        mask.set(2, 0, true);
        let out = accumulate(&img, &mask, ColorHistogram::new(256).unwrap()).unwrap();
        assert_eq!(out.total(), 2);
        for c in 0..3 {
            assert_eq!(out.counts(c).iter().filter(|&&n| n > 0).count(), 2);
        }
    }

    #[test]
    fn accumulate_rejects_mismatched_dims() {
        let img = img_of(&[[0, 0, 0]]);
        let mask = BinaryMask::empty(2, 1);
        assert!(accumulate(&img, &mask, ColorHistogram::new(256).unwrap()).is_err());
    }

    #[test]
    fn derive_range_degenerate_distribution() {
        let img = img_of(&[[57, 57, 57]]);
        let hist = accumulate(&img, &full_mask(1), ColorHistogram::new(256).unwrap()).unwrap();
        let r = derive_range(&hist, 1.0, 99.0).unwrap();
        assert_eq!(r.lo, [57, 57, 57]);
        assert_eq!(r.hi, [57, 57, 57]);
    }

    #[test]
    fn derive_range_uniform_and_two_point() {
        // uniform counts over red values 0..=99
        let pixels: Vec<[u8; 3]> = (0..100).map(|v| [v as u8, 0, 0]).collect();
        let hist = accumulate(&img_of(&pixels), &full_mask(100), ColorHistogram::new(256).unwrap()).unwrap();
        let r = derive_range(&hist, 1.0, 99.0).unwrap();
        assert_eq!(r.lo[0], 0);
        assert_eq!(r.hi[0], 98);

        // 50/50 mass at red = 10 and red = 200
        let pixels: Vec<[u8; 3]> = (0..100)
            .map(|i| if i < 50 { [10, 0, 0] } else { [200, 0, 0] })
            .collect();
        let hist = accumulate(&img_of(&pixels), &full_mask(100), ColorHistogram::new(256).unwrap()).unwrap();
        let r = derive_range(&hist, 1.0, 99.0).unwrap();
        assert_eq!(r.lo[0], 10);
        assert_eq!(r.hi[0], 200);
    }

    #[test]
    fn derive_range_rejects_empty_and_bad_percentiles() {
        let hist = ColorHistogram::new(256).unwrap();
        assert!(derive_range(&hist, 1.0, 99.0).is_err());
        let img = img_of(&[[1, 1, 1]]);
        let hist = accumulate(&img, &full_mask(1), hist).unwrap();
        assert!(derive_range(&hist, 99.0, 1.0).is_err());
        assert!(derive_range(&hist, -1.0, 99.0).is_err());
    }

    #[test]
    fn derive_range_monotone_in_percentiles() {
        let pixels: Vec<[u8; 3]> = (0..120).map(|i| [(i * 2) as u8, (i + 50) as u8, 128]).collect();
        let hist = accumulate(&img_of(&pixels), &full_mask(120), ColorHistogram::new(256).unwrap()).unwrap();
        let narrow = derive_range(&hist, 10.0, 90.0).unwrap();
        let wide = derive_range(&hist, 1.0, 99.0).unwrap();
        assert!(wide.contains(&narrow));
    }

    #[test]
    fn train_single_color_and_envelope() {
        let img = img_of(&[[40, 80, 120]; 4]);
        let mask = full_mask(4);
        let model = train(&[(&img, &mask, Some("melanoma"))], 1.0, 99.0, 256).unwrap();
        assert_eq!(model.per_class["melanoma"].lo, [40, 80, 120]);
        assert_eq!(model.combined.lo, [40, 80, 120]);
        assert_eq!(model.combined.hi, [40, 80, 120]);

        // two classes with disjoint single colors produce the envelope
        let a = img_of(&[[10, 10, 10]; 4]);
        let b = img_of(&[[200, 200, 200]; 4]);
        let model = train(
            &[(&a, &mask, Some("one")), (&b, &mask, Some("two"))],
            1.0,
            99.0,
            256,
        )
        .unwrap();
        assert_eq!(model.combined.lo, [10, 10, 10]);
        assert_eq!(model.combined.hi, [200, 200, 200]);
    }

    #[test]
    fn train_three_classes_and_unlabeled() {
        let img = img_of(&[[100, 100, 100]; 2]);
        let mask = full_mask(2);
        let model = train(
            &[
                (&img, &mask, Some("melanoma")),
                (&img, &mask, Some("seborrheic_keratosis")),
                (&img, &mask, Some("nevus")),
            ],
            1.0,
            99.0,
            256,
        )
        .unwrap();
        assert_eq!(model.per_class.len(), 3);

        let model = train(&[(&img, &mask, None)], 1.0, 99.0, 256).unwrap();
        assert!(model.per_class.contains_key(UNLABELED_CLASS));
    }

    #[test]
    fn train_errors_and_empty_mask_tolerance() {
        assert!(train(&[], 1.0, 99.0, 256).is_err());

        let img = img_of(&[[5, 5, 5]; 2]);
        let empty = BinaryMask::empty(2, 1);
        let mask = full_mask(2);
        // an all-false mask contributes nothing but is not an error
        let model = train(
            &[(&img, &empty, Some("a")), (&img, &mask, Some("b"))],
            1.0,
            99.0,
            256,
        )
        .unwrap();
        assert!(!model.per_class.contains_key("a"));
        assert!(model.per_class.contains_key("b"));

        assert!(train(&[(&img, &empty, Some("a"))], 1.0, 99.0, 256).is_err());
    }

    #[test]
    fn range_membership() {
        let r = ColorRange {
            lo: [90, 90, 90],
            hi: [110, 110, 110],
        };
        assert!(pixel_in_range([90, 90, 90], &r));
        assert!(pixel_in_range([100, 100, 100], &r));
        assert!(pixel_in_range([110, 110, 110], &r));
        assert!(!pixel_in_range([111, 100, 100], &r));

        // singleton range contains its own point
        for p in [[0u8, 0, 0], [255, 255, 255], [13, 95, 201]] {
            let r = ColorRange { lo: p, hi: p };
            assert!(pixel_in_range(p, &r));
        }
    }

    #[test]
    fn fraction_counting() {
        let img = img_of(&[[5, 5, 5], [5, 5, 5], [5, 5, 5], [250, 250, 250]]);
        let r = ColorRange {
            lo: [0, 0, 0],
            hi: [10, 10, 10],
        };
        assert_eq!(fraction_in_range(&img, &[0, 1, 2, 3], &r), 0.75);
        assert_eq!(fraction_in_range(&img, &[0, 1], &r), 1.0);
        assert_eq!(fraction_in_range(&img, &[], &r), 0.0);
    }

    #[test]
    fn model_round_trip_and_validation() {
        let img = img_of(&[[40, 80, 120]; 4]);
        let mask = full_mask(4);
        let model = train(&[(&img, &mask, Some("melanoma"))], 1.0, 99.0, 256).unwrap();
        let bytes = save_model(&model);
        assert_eq!(load_model(&bytes).unwrap(), model);

        // truncated document fails
        assert!(load_model(&bytes[..bytes.len() / 2]).is_err());

        // version mismatch fails
        let mut doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        doc["version"] = serde_json::json!(99);
        assert!(matches!(
            load_model(&serde_json::to_vec(&doc).unwrap()),
            Err(Error::ModelVersion { found: 99, .. })
        ));
    }

    #[test]
    fn minimal_hand_written_document_accepts_everything() {
        let doc = br#"{
            "version": 1,
            "bins": 256,
            "percentile_lo": 1.0,
            "percentile_hi": 99.0,
            "combined": {"lo": [0, 0, 0], "hi": [255, 255, 255]},
            "per_class": {}
        }"#;
        let model = load_model(doc).unwrap();
        for p in [[0u8, 0, 0], [255, 255, 255], [7, 130, 222]] {
            assert!(pixel_in_range(p, &model.combined));
        }
        assert_eq!(model.range_for(Some("unknown")), model.combined);
    }

    #[test]
    fn accumulation_is_order_independent_and_additive() {
        let a = img_of(&[[10, 20, 30], [40, 50, 60]]);
        let b = img_of(&[[70, 80, 90], [10, 20, 30]]);
        let mask = full_mask(2);

        let h1 = accumulate(&b, &mask, accumulate(&a, &mask, ColorHistogram::new(256).unwrap()).unwrap()).unwrap();
        let h2 = accumulate(&a, &mask, accumulate(&b, &mask, ColorHistogram::new(256).unwrap()).unwrap()).unwrap();
        assert_eq!(h1, h2);

        // splitting an image into two half-masks accumulates identically
        let mut left = BinaryMask::empty(2, 1);
        left.set(0, 0, true);
        let mut right = BinaryMask::empty(2, 1);
        right.set(1, 0, true);
        let whole = accumulate(&a, &mask, ColorHistogram::new(256).unwrap()).unwrap();
        let split = accumulate(&a, &right, accumulate(&a, &left, ColorHistogram::new(256).unwrap()).unwrap()).unwrap();
        assert_eq!(whole, split);

        // merge is the same as sequential accumulation
        let mut m = accumulate(&a, &mask, ColorHistogram::new(256).unwrap()).unwrap();
        m.merge(&accumulate(&b, &mask, ColorHistogram::new(256).unwrap()).unwrap()).unwrap();
        assert_eq!(m, h1);
    }
}
