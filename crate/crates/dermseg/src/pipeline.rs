//! Pipeline configuration and stage composition.

use serde::{Deserialize, Serialize};

use crate::colormodel::LesionColorModel;
use crate::imgcore::{self, RgbImage};
use crate::preprocess::{self, ClaheParams, FrangiParams, HairRemovalParams};
use crate::segment::{segment_image, SegmentParams, SegmentationResult};
use crate::Result;

/// Size rule applied before everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    /// Images whose larger side exceeds this get downscaled.
    pub max_dim: usize,
    pub factor: f64,
}

impl Default for ScaleParams {
    fn default() -> Self {
        Self {
            max_dim: imgcore::DOWNSCALE_MAX_DIM,
            factor: imgcore::DOWNSCALE_FACTOR,
        }
    }
}

/// Color model training knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub bins: usize,
    pub percentile_lo: f64,
    pub percentile_hi: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            bins: 256,
            percentile_lo: 1.0,
            percentile_hi: 99.0,
        }
    }
}

/// Every parameter of every stage, plus runner knobs. This struct is the
/// config file schema and is embedded verbatim in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub scale: ScaleParams,
    pub clahe_enabled: bool,
    pub clahe: ClaheParams,
    pub hair_removal_enabled: bool,
    pub frangi: FrangiParams,
    pub hair: HairRemovalParams,
    pub model: ModelParams,
    pub segment: SegmentParams,
    /// Upscale predicted masks back to the original image size
    /// (nearest-neighbor) before writing and scoring.
    pub score_at_original_resolution: bool,
    /// Worker threads for batch runs; 0 means one per CPU.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scale: ScaleParams::default(),
            clahe_enabled: true,
            clahe: ClaheParams::default(),
            hair_removal_enabled: true,
            frangi: FrangiParams::default(),
            hair: HairRemovalParams::default(),
            model: ModelParams::default(),
            segment: SegmentParams::default(),
            score_at_original_resolution: false,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale.max_dim == 0 {
            return Err(crate::Error::InvalidParam("scale.max_dim must be >= 1".into()));
        }
        if !(self.scale.factor > 0.0 && self.scale.factor <= 1.0) {
            return Err(crate::Error::InvalidParam(format!(
                "scale.factor must be in (0,1], got {}",
                self.scale.factor
            )));
        }
        if !(0.0..=1.0).contains(&self.segment.min_fraction) {
            return Err(crate::Error::InvalidParam(format!(
                "segment.min_fraction must be in [0,1], got {}",
                self.segment.min_fraction
            )));
        }
        if self.segment.boundary_offset == 0 {
            return Err(crate::Error::InvalidParam(
                "segment.boundary_offset must be >= 1".into(),
            ));
        }
        if !(0.0 <= self.model.percentile_lo
            && self.model.percentile_lo < self.model.percentile_hi
            && self.model.percentile_hi <= 100.0)
        {
            return Err(crate::Error::InvalidParam(format!(
                "model percentiles must satisfy 0 <= lo < hi <= 100, got {}/{}",
                self.model.percentile_lo, self.model.percentile_hi
            )));
        }
        self.clahe.validate()?;
        self.frangi.validate()?;
        self.hair.validate()?;
        self.segment.kmeans.validate()?;
        Ok(())
    }
}

/// Runs the preprocessing phase: size rule, illumination correction on L,
/// hair detection and removal.
pub fn preprocess_image(img: &RgbImage, config: &PipelineConfig) -> Result<RgbImage> {
    let mut out = imgcore::maybe_downscale_with(img, config.scale.max_dim, config.scale.factor);
    if config.clahe_enabled {
        out = preprocess::clahe_l_channel(&out, &config.clahe)?;
    }
    if config.hair_removal_enabled {
        let gray = imgcore::rgb_to_gray(&out);
        let response = preprocess::frangi_vesselness(&gray, &config.frangi)?;
        let hair = preprocess::detect_hair(&response, &config.hair);
        if hair.count_true() < out.width() * out.height() {
            out = preprocess::remove_hair(&out, &hair, &config.hair)?;
        }
    }
    Ok(out)
}

/// Segments one already-preprocessed image under the config.
pub fn segment_preprocessed(
    img: &RgbImage,
    model: &LesionColorModel,
    config: &PipelineConfig,
) -> Result<SegmentationResult> {
    segment_image(img, model, &config.segment)
}
