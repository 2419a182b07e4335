//! Hessian estimation and the 2D Frangi vesselness measure.
//!
//! Hairs are thin dark tubes on brighter skin, so the filter runs with
//! `bright_on_dark = false` in the pipeline; both polarities are supported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imgcore::GrayImage;
use crate::{Error, Result};

/// Scale and sensitivity knobs for [`frangi_vesselness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrangiParams {
    /// Gaussian scales in pixels; must be non-empty and strictly increasing.
    pub sigmas: Vec<f64>,
    /// Blobness sensitivity (beta); larger tolerates blobbier structures.
    pub beta: f64,
    /// Structureness sensitivity. `None` picks half of the maximum
    /// structureness observed at each scale, the usual adaptive heuristic.
    pub c: Option<f64>,
    /// `true` enhances bright tubes on dark background, `false` dark tubes.
    pub bright_on_dark: bool,
}

impl Default for FrangiParams {
    fn default() -> Self {
        Self {
            sigmas: vec![1.0, 2.0, 3.0, 4.0],
            beta: 0.5,
            c: None,
            bright_on_dark: false,
        }
    }
}

impl FrangiParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::InvalidParam("frangi sigmas must be non-empty".into()));
        }
        if self.sigmas.windows(2).any(|w| w[0] >= w[1]) || self.sigmas[0] <= 0.0 {
            return Err(Error::InvalidParam(
                "frangi sigmas must be positive and strictly increasing".into(),
            ));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::InvalidParam("frangi beta must be positive".into()));
        }
        if let Some(c) = self.c {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidParam("frangi c must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Scale-normalized second partial derivatives at one Gaussian scale.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub dxx: GrayImage,
    pub dxy: GrayImage,
    pub dyy: GrayImage,
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// 1D horizontal convolution with reflected borders.
fn conv_rows(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = (kernel.len() / 2) as isize;
    let src = img.data();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let base = y * w;
        for (x, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - r, w);
                acc += kv * src[base + sx];
            }
            *slot = acc;
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

/// 1D vertical convolution with reflected borders.
fn conv_cols(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = (kernel.len() / 2) as isize;
    let src = img.data();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - r, h);
                acc += kv * src[sy * w + x];
            }
            *slot = acc;
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

/// Sampled Gaussian and its first two derivatives, truncated at 4 sigma.
/// The smoothing kernel is normalized to unit sum; the second-derivative
/// kernel has its mean removed so constants map exactly to zero.
fn gaussian_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let s2 = sigma * sigma;

    let mut g = Vec::with_capacity((2 * radius + 1) as usize);
    let mut g1 = Vec::with_capacity(g.capacity());
    let mut g2 = Vec::with_capacity(g.capacity());
    for i in -radius..=radius {
        let x = i as f64;
        let base = norm * (-x * x / (2.0 * s2)).exp();
        g.push(base);
        g1.push(-x / s2 * base);
        g2.push((x * x - s2) / (s2 * s2) * base);
    }
    let sum: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= sum);
    let mean: f64 = g2.iter().sum::<f64>() / g2.len() as f64;
    g2.iter_mut().for_each(|v| *v -= mean);
    (g, g1, g2)
}

/// Second-derivative field via separable Gaussian-derivative convolution,
/// scale-normalized by sigma^2. Borders reflect.
pub fn hessian2d(gray: &GrayImage, sigma: f64) -> Result<HessianField> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "hessian sigma must be positive, got {sigma}"
        )));
    }
    let (g, g1, g2) = gaussian_kernels(sigma);
    let s2 = sigma * sigma;

    let mut dxx = conv_cols(&conv_rows(gray, &g2), &g);
    let mut dxy = conv_cols(&conv_rows(gray, &g1), &g1);
    let mut dyy = conv_cols(&conv_rows(gray, &g), &g2);
    for plane in [&mut dxx, &mut dxy, &mut dyy] {
        plane.data_mut().iter_mut().for_each(|v| *v *= s2);
    }
    Ok(HessianField { dxx, dxy, dyy })
}

/// Eigenvalues of the symmetric matrix [[a, b], [b, d]], ordered |l1| <= |l2|.
#[inline]
fn hessian_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let half_trace = 0.5 * (a + d);
    let disc = (0.5 * (a - d)).hypot(b);
    let e1 = half_trace + disc;
    let e2 = half_trace - disc;
    if e1.abs() <= e2.abs() {
        (e1, e2)
    } else {
        (e2, e1)
    }
}

/// The Frangi measure for one pixel given ordered eigenvalues.
#[inline]
pub(crate) fn vesselness_measure(
    lambda1: f64,
    lambda2: f64,
    beta: f64,
    c: f64,
    bright_on_dark: bool,
) -> f64 {
    if lambda2 == 0.0 {
        return 0.0;
    }
    // bright tubes curve downward (lambda2 < 0), dark tubes upward
    if (bright_on_dark && lambda2 > 0.0) || (!bright_on_dark && lambda2 < 0.0) {
        return 0.0;
    }
    let rb = lambda1.abs() / lambda2.abs();
    let s = lambda1.hypot(lambda2);
    (-rb * rb / (2.0 * beta * beta)).exp() * (1.0 - (-s * s / (2.0 * c * c)).exp())
}

/// Multiscale vesselness: per-pixel maximum over sigmas, normalized to [0,1]
/// by the global maximum (an all-zero response stays all-zero).
pub fn frangi_vesselness(gray: &GrayImage, params: &FrangiParams) -> Result<GrayImage> {
    params.validate()?;
    let (w, h) = (gray.width(), gray.height());
    let mut best = vec![0.0f64; w * h];

    for &sigma in &params.sigmas {
        let hess = hessian2d(gray, sigma)?;
        let eigen: Vec<(f64, f64)> = (0..w * h)
            .into_par_iter()
            .map(|i| hessian_eigenvalues(hess.dxx.data()[i], hess.dxy.data()[i], hess.dyy.data()[i]))
            .collect();

        let c = match params.c {
            Some(c) => c,
            None => {
                // half the maximum structureness at this scale; treat
                // rounding-level residue (constant or linear images) as no
                // structure, otherwise the adaptive cutoff would rescale
                // float noise into a full-strength response
                let s_max = eigen
                    .iter()
                    .map(|&(l1, l2)| l1.hypot(l2))
                    .fold(0.0f64, f64::max);
                let image_scale = gray.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if s_max <= 1e-8 * image_scale || s_max == 0.0 {
                    continue;
                }
                s_max / 2.0
            }
        };

        best.par_iter_mut().zip(eigen.par_iter()).for_each(|(b, &(l1, l2))| {
            let v = vesselness_measure(l1, l2, params.beta, c, params.bright_on_dark);
            if v > *b {
                *b = v;
            }
        });
    }

    let max = best.iter().copied().fold(0.0f64, f64::max);
    if max > 0.0 {
        best.iter_mut().for_each(|v| *v /= max);
    }
    GrayImage::new(w, h, best)
}
