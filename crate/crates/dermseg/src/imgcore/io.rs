//! Image file I/O: JPEG photos in, PNG masks and overlays out.
//!
//! Mask semantics: when reading, any pixel value >= 128 is foreground;
//! masks are written as 8-bit grayscale PNG holding only {0, 255}.

use std::path::Path;

use image::ImageReader;

use super::{BinaryMask, RgbImage};
use crate::{Error, Result};

fn open(path: &Path) -> Result<image::DynamicImage> {
    ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?
        .decode()
        .map_err(|source| Error::ImageFile {
            path: path.to_owned(),
            source,
        })
}

/// Decodes a JPEG or PNG photo into an [`RgbImage`].
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let decoded = open(path)?.into_rgb8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = decoded.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, data)
}

/// Decodes a mask PNG; any pixel value >= 128 counts as foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let decoded = open(path)?.into_luma8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = decoded.pixels().map(|p| p.0[0] >= 128).collect();
    BinaryMask::new(w, h, data)
}

/// Writes a mask as 8-bit grayscale PNG with values {0, 255}.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let buf: Vec<u8> = mask.data().iter().map(|&v| if v { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, buf)
        .expect("buffer length matches dimensions");
    img.save(path).map_err(|source| Error::ImageFile {
        path: path.to_owned(),
        source,
    })
}

/// Writes an RGB image as PNG (overlays, debug output).
pub fn save_rgb_png(img: &RgbImage, path: &Path) -> Result<()> {
    let buf: Vec<u8> = img.data().iter().flatten().copied().collect();
    let out = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, buf)
        .expect("buffer length matches dimensions");
    out.save(path).map_err(|source| Error::ImageFile {
        path: path.to_owned(),
        source,
    })
}
