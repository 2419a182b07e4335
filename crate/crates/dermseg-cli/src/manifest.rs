//! Run manifest: everything needed to reproduce a segmentation run.

use serde::{Deserialize, Serialize};

use dermseg::pipeline::PipelineConfig;
use dermseg::segment::SeedSpec;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub pred_path: Option<String>,
    pub overlay_path: Option<String>,
    pub no_cluster_selected: bool,
    pub seeds: Vec<SeedSpec>,
    /// Present when this image failed; the batch keeps going.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub model_path: String,
    /// The exact configuration of the run; re-running with it reproduces
    /// identical outputs.
    pub config: PipelineConfig,
    pub entries: Vec<ManifestEntry>,
    pub failures: usize,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
