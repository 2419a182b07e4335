//! Dataset directory indexing.
//!
//! Images are the `*.jpg` files directly under the dataset root. The mask
//! for `X.jpg` is `X_segmentation.png`, looked up next to the image, then
//! in a `masks/` subdirectory, then in a `masks/` directory beside the
//! root. Optional class labels come from a `labels.csv` with
//! `image_id,class` lines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetIndex {
    pub fn masked_entries(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(|e| e.mask_path.is_some())
    }
}

fn read_labels(root: &Path) -> Result<BTreeMap<String, String>> {
    let path = root.join("labels.csv");
    let mut labels = BTreeMap::new();
    if !path.is_file() {
        return Ok(labels);
    }
    let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("image_id,class")) {
            continue;
        }
        let (id, class) = line.split_once(',').ok_or_else(|| {
            CliError::Data(format!("labels.csv line {}: expected image_id,class", lineno + 1))
        })?;
        labels.insert(id.trim().to_string(), class.trim().to_string());
    }
    Ok(labels)
}

fn find_mask(image_path: &Path, image_id: &str) -> Option<PathBuf> {
    let name = format!("{image_id}_segmentation.png");
    let dir = image_path.parent()?;
    let candidates = [
        dir.join(&name),
        dir.join("masks").join(&name),
        dir.parent().map(|p| p.join("masks").join(&name))?,
    ];
    candidates.into_iter().find(|p| p.is_file())
}

/// Scans a dataset directory into a deterministic, id-sorted index.
pub fn index_dataset(root: &Path) -> Result<DatasetIndex> {
    if !root.is_dir() {
        return Err(CliError::Data(format!(
            "dataset directory {} does not exist",
            root.display()
        )));
    }
    let labels = read_labels(root)?;

    let mut entries = Vec::new();
    let listing = std::fs::read_dir(root).map_err(CliError::io(root))?;
    for item in listing {
        let item = item.map_err(CliError::io(root))?;
        let path = item.path();
        let is_jpg = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.eq_ignore_ascii_case("jpg"))
            .unwrap_or(false);
        if !path.is_file() || !is_jpg {
            continue;
        }
        let image_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Data(format!("unreadable file name {}", path.display())))?
            .to_string();
        let mask_path = find_mask(&path, &image_id);
        let class = labels.get(&image_id).cloned();
        entries.push(DatasetEntry {
            image_id,
            image_path: path,
            mask_path,
            class,
        });
    }

    entries.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for pair in entries.windows(2) {
        if pair[0].image_id == pair[1].image_id {
            return Err(CliError::Data(format!(
                "duplicate image id {}",
                pair[0].image_id
            )));
        }
    }
    Ok(DatasetIndex {
        root: root.to_owned(),
        entries,
    })
}
