//! Synthetic dermoscopy-style corpus shared by the integration and
//! acceptance suites.
//!
//! Every image is a flat dark lesion square on a two-tone 3x3-cell
//! checkerboard "skin". The texture blocks flood fill from leaking out of
//! a background seed cell while staying fully deterministic. Images are
//! written as quality-100 JPEGs; lesion/background contrasts are large
//! enough that codec error cannot move any pixel across a color-range or
//! flood-tolerance boundary.

use std::path::{Path, PathBuf};

use dermseg::imgcore::{io, BinaryMask, RgbImage};
use dermseg::pipeline::PipelineConfig;

pub struct Fixture {
    pub id: String,
    pub image: RgbImage,
    pub mask: BinaryMask,
    pub class: Option<String>,
}

/// Lesion square of the given half-side centered at (cx, cy).
pub fn lesion_fixture(
    id: &str,
    size: (usize, usize),
    center: (usize, usize),
    half: usize,
    lesion: [u8; 3],
    class: Option<&str>,
) -> Fixture {
    lesion_fixture_cells(id, size, center, half, lesion, 3, class)
}

/// [`lesion_fixture`] with an explicit checkerboard cell size; oversized
/// fixtures use cells that survive the 0.25 downscale.
pub fn lesion_fixture_cells(
    id: &str,
    size: (usize, usize),
    center: (usize, usize),
    half: usize,
    lesion: [u8; 3],
    cell: usize,
    class: Option<&str>,
) -> Fixture {
    let (w, h) = size;
    let (cx, cy) = center;
    let tone_a = [210u8, 180, 170];
    let tone_b = [150u8, 120, 110];
    let mut data = Vec::with_capacity(w * h);
    let mut mask = BinaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let inside = x.abs_diff(cx) <= half && y.abs_diff(cy) <= half;
            if inside {
                data.push(lesion);
            } else if (x / cell + y / cell).is_multiple_of(2) {
                data.push(tone_a);
            } else {
                data.push(tone_b);
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if x.abs_diff(cx) <= half && y.abs_diff(cy) <= half {
                mask.set(x, y, true);
            }
        }
    }
    Fixture {
        id: id.to_string(),
        image: RgbImage::new(w, h, data).unwrap(),
        mask,
        class: class.map(str::to_string),
    }
}

/// Pure checkerboard, no lesion at all.
#[allow(dead_code)]
pub fn lesion_free_fixture(id: &str, size: (usize, usize)) -> Fixture {
    let (w, h) = size;
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if (x / 3 + y / 3).is_multiple_of(2) {
                [210u8, 180, 170]
            } else {
                [150u8, 120, 110]
            }
        })
        .collect();
    Fixture {
        id: id.to_string(),
        image: RgbImage::new(w, h, data).unwrap(),
        mask: BinaryMask::empty(w, h),
        class: None,
    }
}

pub fn write_jpeg(img: &RgbImage, path: &Path) {
    let buf: Vec<u8> = img.data().iter().flatten().copied().collect();
    let raw = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, buf).unwrap();
    let file = std::fs::File::create(path).unwrap();
    let mut writer = std::io::BufWriter::new(file);
    let mut encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut writer, 100);
    encoder.encode_image(&raw).unwrap();
}

/// Writes fixtures as a dataset directory: JPEGs, masks, labels.csv.
pub fn write_dataset(dir: &Path, fixtures: &[Fixture]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut labels = String::from("image_id,class\n");
    let mut have_labels = false;
    for f in fixtures {
        write_jpeg(&f.image, &dir.join(format!("{}.jpg", f.id)));
        if f.mask.count_true() > 0 {
            io::save_mask(&f.mask, &dir.join(format!("{}_segmentation.png", f.id))).unwrap();
        }
        if let Some(class) = &f.class {
            labels.push_str(&format!("{},{}\n", f.id, class));
            have_labels = true;
        }
    }
    if have_labels {
        std::fs::write(dir.join("labels.csv"), labels).unwrap();
    }
}

/// The six-image corpus: three training images (three classes) and three
/// evaluation images, lesions at varied positions and sizes.
pub fn six_image_corpus(root: &Path) -> (PathBuf, PathBuf) {
    let train_dir = root.join("train");
    let eval_dir = root.join("eval");
    write_dataset(
        &train_dir,
        &[
            lesion_fixture("train_a", (101, 101), (50, 50), 15, [90, 60, 70], Some("melanoma")),
            lesion_fixture("train_b", (101, 101), (40, 55), 12, [80, 55, 65], Some("nevus")),
            lesion_fixture(
                "train_c",
                (120, 90),
                (60, 45),
                14,
                [100, 65, 75],
                Some("seborrheic_keratosis"),
            ),
        ],
    );
    write_dataset(
        &eval_dir,
        &[
            lesion_fixture("eval_a", (101, 101), (50, 50), 15, [90, 60, 70], None),
            lesion_fixture("eval_b", (110, 101), (60, 45), 13, [85, 58, 68], None),
            lesion_fixture("eval_c", (101, 110), (45, 60), 15, [95, 62, 72], None),
        ],
    );
    (train_dir, eval_dir)
}

/// Config used for the synthetic corpora: preprocessing stage toggles off
/// (the fixtures are adversarial for hair detection by construction;
/// preprocessing correctness has its own dedicated suites).
pub fn corpus_config() -> PipelineConfig {
    PipelineConfig {
        clahe_enabled: false,
        hair_removal_enabled: false,
        ..PipelineConfig::default()
    }
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.data().iter().zip(b.data()) {
        if *x && *y {
            inter += 1;
        }
        if *x || *y {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Recursive byte-level directory comparison.
pub fn dir_digest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for item in std::fs::read_dir(&d).unwrap() {
            let path = item.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}
