//! CIE L*a*b* conversion under D65 with sRGB companding.

use super::{LabImage, RgbImage};

// sRGB D65 reference white in XYZ.
const WHITE_X: f64 = 0.95047;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.08883;

// CIE constants: epsilon = (6/29)^3, kappa = (29/3)^3.
const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

// Linear sRGB -> XYZ (rows X, Y, Z).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

// XYZ -> linear sRGB.
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

#[inline]
fn srgb_to_linear(c: u8) -> f64 {
    let v = c as f64 / 255.0;
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(v: f64) -> u8 {
    let v = if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    };
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// Converts one sRGB pixel to L*a*b*.
pub(crate) fn pixel_rgb_to_lab(p: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(p[0]);
    let g = srgb_to_linear(p[1]);
    let b = srgb_to_linear(p[2]);

    let x = RGB_TO_XYZ[0][0] * r + RGB_TO_XYZ[0][1] * g + RGB_TO_XYZ[0][2] * b;
    let y = RGB_TO_XYZ[1][0] * r + RGB_TO_XYZ[1][1] * g + RGB_TO_XYZ[1][2] * b;
    let z = RGB_TO_XYZ[2][0] * r + RGB_TO_XYZ[2][1] * g + RGB_TO_XYZ[2][2] * b;

    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);

    [
        (116.0 * fy - 16.0).clamp(0.0, 100.0),
        (500.0 * (fx - fy)).clamp(-128.0, 127.0),
        (200.0 * (fy - fz)).clamp(-128.0, 127.0),
    ]
}

/// Converts one L*a*b* pixel back to sRGB with rounding and clamping.
pub(crate) fn pixel_lab_to_rgb(p: [f64; 3]) -> [u8; 3] {
    let [l, a, b] = p;
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;

    let fx3 = fx * fx * fx;
    let fz3 = fz * fz * fz;
    let xr = if fx3 > EPSILON {
        fx3
    } else {
        (116.0 * fx - 16.0) / KAPPA
    };
    let yr = if l > KAPPA * EPSILON {
        fy * fy * fy
    } else {
        l / KAPPA
    };
    let zr = if fz3 > EPSILON {
        fz3
    } else {
        (116.0 * fz - 16.0) / KAPPA
    };

    let x = xr * WHITE_X;
    let y = yr * WHITE_Y;
    let z = zr * WHITE_Z;

    let r = XYZ_TO_RGB[0][0] * x + XYZ_TO_RGB[0][1] * y + XYZ_TO_RGB[0][2] * z;
    let g = XYZ_TO_RGB[1][0] * x + XYZ_TO_RGB[1][1] * y + XYZ_TO_RGB[1][2] * z;
    let bb = XYZ_TO_RGB[2][0] * x + XYZ_TO_RGB[2][1] * y + XYZ_TO_RGB[2][2] * z;

    [linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(bb)]
}

/// Converts an sRGB image to CIE L*a*b* (D65).
pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let data = img.data().iter().map(|&p| pixel_rgb_to_lab(p)).collect();
    LabImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}

/// Inverse of [`rgb_to_lab`]; channels are rounded and clamped to 8 bits.
pub fn lab_to_rgb(img: &LabImage) -> RgbImage {
    let data = img.data().iter().map(|&p| pixel_lab_to_rgb(p)).collect();
    RgbImage {
        width: img.width(),
        height: img.height(),
        data,
    }
}
