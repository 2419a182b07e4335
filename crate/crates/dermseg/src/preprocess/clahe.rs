//! Contrast-limited adaptive histogram equalization on the L channel.
//!
//! Per-tile histograms of quantized L are clipped at `clip_limit` times the
//! uniform bin height and the excess is spread evenly over all bins. Each
//! tile gets a midpoint-CDF equalization mapping, and pixel values are
//! bilinearly blended between the mappings of the four surrounding tile
//! centers. The midpoint form (cdf minus half the bin's own mass) maps an
//! already-flat histogram onto itself, so clipped constant regions move by
//! at most one quantization step.

use serde::{Deserialize, Serialize};

use crate::imgcore::{lab_to_rgb, rgb_to_lab, GrayImage, LabImage, RgbImage};
use crate::{Error, Result};

/// Tile grid, clip factor, and histogram resolution for CLAHE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    /// Clip factor relative to the uniform bin height; at least 1.0.
    pub clip_limit: f64,
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Number of histogram bins over L in [0,100]; at least 2.
    pub bins: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tiles_x: 8,
            tiles_y: 8,
            bins: 256,
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        if self.clip_limit.is_nan() || self.clip_limit < 1.0 {
            return Err(Error::InvalidParam(format!(
                "clahe clip_limit must be >= 1.0, got {}",
                self.clip_limit
            )));
        }
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(Error::InvalidParam("clahe tile counts must be >= 1".into()));
        }
        if self.bins < 2 {
            return Err(Error::InvalidParam("clahe bins must be >= 2".into()));
        }
        Ok(())
    }
}

#[inline]
fn quantize(l: f64, bins: usize) -> usize {
    ((l.clamp(0.0, 100.0) / 100.0 * bins as f64) as usize).min(bins - 1)
}

/// Equalization mapping for one tile: quantized bin -> output L value.
fn tile_mapping(
    plane: &GrayImage,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    clip_limit: f64,
    bins: usize,
) -> Vec<f64> {
    let area = ((x1 - x0) * (y1 - y0)) as f64;
    let mut hist = vec![0.0f64; bins];
    for y in y0..y1 {
        for x in x0..x1 {
            hist[quantize(plane.get(x, y), bins)] += 1.0;
        }
    }

    let clip_height = clip_limit * area / bins as f64;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > clip_height {
            excess += *h - clip_height;
            *h = clip_height;
        }
    }
    let share = excess / bins as f64;
    hist.iter_mut().for_each(|h| *h += share);

    let mut mapping = Vec::with_capacity(bins);
    let mut cdf = 0.0;
    for &h in &hist {
        cdf += h;
        mapping.push((cdf - h / 2.0) / area * 100.0);
    }
    mapping
}

/// Per-axis interpolation plan: for each coordinate the two neighboring
/// tile indices and the blend weight toward the second one.
fn axis_plan(extent: usize, tiles: usize, bounds: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = bounds
        .iter()
        .map(|&(lo, hi)| (lo + hi - 1) as f64 / 2.0)
        .collect();
    (0..extent)
        .map(|p| {
            let pos = p as f64;
            if pos <= centers[0] {
                (0, 0, 0.0)
            } else if pos >= centers[tiles - 1] {
                (tiles - 1, tiles - 1, 0.0)
            } else {
                let i = (0..tiles - 1)
                    .find(|&i| pos < centers[i + 1])
                    .expect("pos below last center");
                let t = (pos - centers[i]) / (centers[i + 1] - centers[i]);
                (i, i + 1, t)
            }
        })
        .collect()
}

/// CLAHE over a single plane of values in [0,100].
pub fn clahe_plane(plane: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    params.validate()?;
    let (w, h) = (plane.width(), plane.height());
    if w < params.tiles_x || h < params.tiles_y {
        return Err(Error::InvalidParam(format!(
            "image {w}x{h} smaller than the {}x{} tile grid",
            params.tiles_x, params.tiles_y
        )));
    }

    let x_bounds: Vec<(usize, usize)> = (0..params.tiles_x)
        .map(|i| (i * w / params.tiles_x, (i + 1) * w / params.tiles_x))
        .collect();
    let y_bounds: Vec<(usize, usize)> = (0..params.tiles_y)
        .map(|j| (j * h / params.tiles_y, (j + 1) * h / params.tiles_y))
        .collect();

    let mut mappings = Vec::with_capacity(params.tiles_x * params.tiles_y);
    for &(y0, y1) in &y_bounds {
        for &(x0, x1) in &x_bounds {
            mappings.push(tile_mapping(plane, x0, x1, y0, y1, params.clip_limit, params.bins));
        }
    }
    let map_at = |ti: usize, tj: usize, bin: usize| mappings[tj * params.tiles_x + ti][bin];

    let x_plan = axis_plan(w, params.tiles_x, &x_bounds);
    let y_plan = axis_plan(h, params.tiles_y, &y_bounds);

    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        let (j0, j1, ty) = y_plan[y];
        for x in 0..w {
            let (i0, i1, tx) = x_plan[x];
            let bin = quantize(plane.get(x, y), params.bins);
            let top = (1.0 - tx) * map_at(i0, j0, bin) + tx * map_at(i1, j0, bin);
            let bottom = (1.0 - tx) * map_at(i0, j1, bin) + tx * map_at(i1, j1, bin);
            out[y * w + x] = ((1.0 - ty) * top + ty * bottom).clamp(0.0, 100.0);
        }
    }
    GrayImage::new(w, h, out)
}

/// Applies CLAHE to the L channel only: RGB -> Lab, equalize L, Lab -> RGB.
/// The a and b channels pass through untouched.
pub fn clahe_l_channel(img: &RgbImage, params: &ClaheParams) -> Result<RgbImage> {
    let lab = rgb_to_lab(img);
    let (w, h) = (lab.width(), lab.height());
    let l_plane = GrayImage::new(w, h, lab.data().iter().map(|p| p[0]).collect())?;
    let equalized = clahe_plane(&l_plane, params)?;
    let merged: Vec<[f64; 3]> = lab
        .data()
        .iter()
        .zip(equalized.data())
        .map(|(p, &l)| [l, p[1], p[2]])
        .collect();
    Ok(lab_to_rgb(&LabImage::new(w, h, merged)?))
}
