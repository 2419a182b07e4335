//! Image buffers and geometric primitives shared by the whole pipeline.
//!
//! All buffers are row-major with `data.len() == width * height`. Pixel
//! `(x, y)` lives at index `y * width + x`.

mod color;
pub mod io;

pub use color::{lab_to_rgb, rgb_to_lab};

use crate::{Error, Result};

/// 8-bit RGB image, the universal currency between pipeline stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

/// CIE L*a*b* image; L in [0,100], a and b in [-128,127].
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

/// Single-channel real-valued image (luminance planes, filter responses).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Per-pixel boolean raster; `true` marks foreground (lesion).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

/// Zero-based pixel position, x = column, y = row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

macro_rules! impl_raster {
    ($ty:ident, $px:ty) => {
        impl $ty {
            /// Builds an image from a row-major pixel buffer.
            pub fn new(width: usize, height: usize, data: Vec<$px>) -> Result<Self> {
                if width == 0 || height == 0 {
                    return Err(Error::InvalidParam(format!(
                        "image dimensions must be positive, got {width}x{height}"
                    )));
                }
                if data.len() != width * height {
                    return Err(Error::InvalidParam(format!(
                        "buffer length {} does not match {width}x{height}",
                        data.len()
                    )));
                }
                Ok(Self {
                    width,
                    height,
                    data,
                })
            }

            /// Constant-valued image.
            pub fn filled(width: usize, height: usize, value: $px) -> Self {
                assert!(width > 0 && height > 0, "dimensions must be positive");
                Self {
                    width,
                    height,
                    data: vec![value; width * height],
                }
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn data(&self) -> &[$px] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [$px] {
                &mut self.data
            }

            #[inline]
            pub fn idx(&self, x: usize, y: usize) -> usize {
                debug_assert!(x < self.width && y < self.height);
                y * self.width + x
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> $px {
                self.data[y * self.width + x]
            }

            #[inline]
            pub fn set(&mut self, x: usize, y: usize, value: $px) {
                let i = self.idx(x, y);
                self.data[i] = value;
            }

            pub fn contains(&self, p: PixelCoord) -> bool {
                p.x < self.width && p.y < self.height
            }

            pub fn same_dims_as<T: Dimensions>(&self, other: &T) -> bool {
                self.width == other.dims().0 && self.height == other.dims().1
            }
        }

        impl Dimensions for $ty {
            fn dims(&self) -> (usize, usize) {
                (self.width, self.height)
            }
        }
    };
}

/// Width/height accessor shared by every raster type.
pub trait Dimensions {
    fn dims(&self) -> (usize, usize);
}

impl_raster!(RgbImage, [u8; 3]);
impl_raster!(LabImage, [f64; 3]);
impl_raster!(GrayImage, f64);
impl_raster!(BinaryMask, bool);

impl BinaryMask {
    /// All-background mask.
    pub fn empty(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// Images with max(width, height) above this are shrunk to a quarter size.
pub const DOWNSCALE_MAX_DIM: usize = 1500;
/// Shrink factor applied by [`maybe_downscale`].
pub const DOWNSCALE_FACTOR: f64 = 0.25;

/// Output dimensions of a uniform rescale, rounded half-up per axis.
pub fn scaled_dims(width: usize, height: usize, scale: f64) -> Result<(usize, usize)> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "scale must be positive and finite, got {scale}"
        )));
    }
    let w = (width as f64 * scale + 0.5).floor() as usize;
    let h = (height as f64 * scale + 0.5).floor() as usize;
    if w == 0 || h == 0 {
        return Err(Error::InvalidParam(format!(
            "scale {scale} collapses {width}x{height} to a zero dimension"
        )));
    }
    Ok((w, h))
}

/// Rescales with bilinear interpolation under center-aligned sampling
/// (source coordinate = (dst + 0.5) / scale - 0.5).
pub fn resize_bilinear(img: &RgbImage, scale: f64) -> Result<RgbImage> {
    let (out_w, out_h) = scaled_dims(img.width, img.height, scale)?;
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let sy = ((y as f64 + 0.5) / scale - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = sy - y0 as f64;
        for x in 0..out_w {
            let sx = ((x as f64 + 0.5) / scale - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = sx - x0 as f64;

            let p00 = img.get(x0, y0);
            let p01 = img.get(x1, y0);
            let p10 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            let mut px = [0u8; 3];
            for c in 0..3 {
                let top = (1.0 - fx) * p00[c] as f64 + fx * p01[c] as f64;
                let bottom = (1.0 - fx) * p10[c] as f64 + fx * p11[c] as f64;
                let v = (1.0 - fy) * top + fy * bottom;
                px[c] = (v + 0.5).floor() as u8; // convex blend stays in [0,255]
            }
            data.push(px);
        }
    }
    RgbImage::new(out_w, out_h, data)
}

/// Applies the size rule: images whose larger side exceeds `DOWNSCALE_MAX_DIM`
/// are resized to a quarter; everything else passes through untouched.
pub fn maybe_downscale(img: &RgbImage) -> RgbImage {
    maybe_downscale_with(img, DOWNSCALE_MAX_DIM, DOWNSCALE_FACTOR)
}

/// [`maybe_downscale`] with an explicit threshold and factor.
pub fn maybe_downscale_with(img: &RgbImage, max_dim: usize, factor: f64) -> RgbImage {
    if img.width.max(img.height) > max_dim {
        // max_dim >= 1 and factor in (0,1] keep both output dims >= 1
        resize_bilinear(img, factor).expect("downscale factor must preserve dimensions")
    } else {
        img.clone()
    }
}

/// Nearest-neighbor mask resize to exact target dimensions, center-aligned.
/// Keeps ground-truth masks binary while tracking [`maybe_downscale`].
pub fn resize_mask_nearest(mask: &BinaryMask, out_w: usize, out_h: usize) -> Result<BinaryMask> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidParam(
            "mask target dimensions must be positive".into(),
        ));
    }
    let sx = out_w as f64 / mask.width as f64;
    let sy = out_h as f64 / mask.height as f64;
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let src_y = (((y as f64 + 0.5) / sy - 0.5).round().max(0.0) as usize).min(mask.height - 1);
        for x in 0..out_w {
            let src_x =
                (((x as f64 + 0.5) / sx - 0.5).round().max(0.0) as usize).min(mask.width - 1);
            data.push(mask.get(src_x, src_y));
        }
    }
    BinaryMask::new(out_w, out_h, data)
}

/// Per-pixel luminance 0.299 r + 0.587 g + 0.114 b.
pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}
