//! Hair masking and removal.
//!
//! Hairs are wherever the normalized vesselness response clears a
//! threshold; the mask is grown by a disk so hair borders are covered, and
//! masked pixels are replaced by the channel-wise median of nearby clean
//! pixels. Medians use the lower-middle element for even counts.

use serde::{Deserialize, Serialize};

use crate::imgcore::{BinaryMask, GrayImage, RgbImage};
use crate::{Error, Result};

/// Thresholding, dilation, and inpainting knobs for hair removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HairRemovalParams {
    /// Cutoff on the normalized vesselness map, in (0, 1].
    pub response_threshold: f64,
    /// Disk radius in pixels for growing the detected mask.
    pub dilation_radius: usize,
    /// Half-side of the median sampling window; at least 1.
    pub inpaint_radius: usize,
}

impl Default for HairRemovalParams {
    fn default() -> Self {
        Self {
            response_threshold: 0.25,
            dilation_radius: 2,
            inpaint_radius: 5,
        }
    }
}

impl HairRemovalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.response_threshold > 0.0 && self.response_threshold <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "hair response_threshold must be in (0,1], got {}",
                self.response_threshold
            )));
        }
        if self.inpaint_radius == 0 {
            return Err(Error::InvalidParam("hair inpaint_radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Morphological dilation with a Euclidean disk of the given radius.
fn dilate_disk(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let r = radius as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();

    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

/// Thresholds the normalized vesselness map (>= comparison) and dilates
/// the result by a disk of `dilation_radius`.
pub fn detect_hair(response: &GrayImage, params: &HairRemovalParams) -> BinaryMask {
    let mask_data = response
        .data()
        .iter()
        .map(|&v| v >= params.response_threshold)
        .collect();
    let mask = BinaryMask::new(response.width(), response.height(), mask_data)
        .expect("dimensions preserved");
    dilate_disk(&mask, params.dilation_radius)
}

fn lower_median(values: &mut [u8]) -> u8 {
    debug_assert!(!values.is_empty());
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Replaces masked pixels by the channel-wise median of unmasked pixels in
/// a square window of side `2 * inpaint_radius + 1`; an all-masked window
/// keeps growing by `inpaint_radius` until it finds clean pixels.
pub fn remove_hair(img: &RgbImage, hair: &BinaryMask, params: &HairRemovalParams) -> Result<RgbImage> {
    let (w, h) = (img.width(), img.height());
    if (hair.width(), hair.height()) != (w, h) {
        return Err(Error::dims(w, h, hair.width(), hair.height(), "hair mask vs image"));
    }
    if hair.count_true() == w * h {
        return Err(Error::InvalidParam(
            "hair mask covers the whole image, nothing to sample".into(),
        ));
    }

    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            if !hair.get(x, y) {
                continue;
            }
            let mut radius = params.inpaint_radius;
            let replacement = loop {
                let x0 = x.saturating_sub(radius);
                let y0 = y.saturating_sub(radius);
                let x1 = (x + radius).min(w - 1);
                let y1 = (y + radius).min(h - 1);
                let mut channels: [Vec<u8>; 3] = Default::default();
                for wy in y0..=y1 {
                    for wx in x0..=x1 {
                        if !hair.get(wx, wy) {
                            let p = img.get(wx, wy);
                            for c in 0..3 {
                                channels[c].push(p[c]);
                            }
                        }
                    }
                }
                if !channels[0].is_empty() {
                    break [
                        lower_median(&mut channels[0]),
                        lower_median(&mut channels[1]),
                        lower_median(&mut channels[2]),
                    ];
                }
                radius += params.inpaint_radius;
            };
            out.set(x, y, replacement);
        }
    }
    Ok(out)
}
