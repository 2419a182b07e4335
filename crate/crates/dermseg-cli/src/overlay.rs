//! Diagnostic overlays: the mask boundary traced on the photo.

use dermseg::imgcore::{BinaryMask, RgbImage};

const TRACE: [u8; 3] = [255, 40, 40];

/// Draws a 1-px boundary trace of `mask` onto a copy of `img`. Both must
/// share dimensions.
pub fn draw_boundary(img: &RgbImage, mask: &BinaryMask) -> RgbImage {
    assert_eq!(
        (img.width(), img.height()),
        (mask.width(), mask.height()),
        "overlay needs matching dimensions"
    );
    let (w, h) = (mask.width(), mask.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut edge = false;
            for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    edge = true;
                    break;
                }
                if !mask.get(nx as usize, ny as usize) {
                    edge = true;
                    break;
                }
            }
            if edge {
                out.set(x, y, TRACE);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traces_only_the_boundary() {
        let img = RgbImage::filled(5, 5, [10, 10, 10]);
        let mut mask = BinaryMask::empty(5, 5);
        for y in 1..4 {
            for x in 1..4 {
                mask.set(x, y, true);
            }
        }
        let out = draw_boundary(&img, &mask);
        assert_eq!(out.get(1, 1), TRACE);
        assert_eq!(out.get(2, 1), TRACE);
        // interior of the block and the background keep their colors
        assert_eq!(out.get(2, 2), [10, 10, 10]);
        assert_eq!(out.get(0, 0), [10, 10, 10]);
    }
}
