//! Canonical sketch framing: tight ink box, padded square, 4% margin, 256².

use super::image::GrayImage;
use crate::error::{Error, Result};

pub const SKETCH_RES: usize = 256;
pub const MARGIN_FRAC: f64 = 0.04;

/// A normalized `SKETCH_RES²` sketch.
pub type Sketch = GrayImage;

/// Inclusive pixel bounds of the ink.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CropBox {
    /// Source-to-sketch similarity: `(center_x, center_y, source px per
    /// sketch px)` in continuous edge coordinates.
    fn frame(&self) -> (f64, f64, f64) {
        let w = (self.x1 - self.x0 + 1) as f64;
        let h = (self.y1 - self.y0 + 1) as f64;
        let cx = (self.x0 + self.x1 + 1) as f64 / 2.0;
        let cy = (self.y0 + self.y1 + 1) as f64 / 2.0;
        let content = SKETCH_RES as f64 * (1.0 - 2.0 * MARGIN_FRAC);
        (cx, cy, w.max(h) / content)
    }

    /// Maps continuous source coordinates to continuous sketch coordinates.
    pub fn to_sketch(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy, s) = self.frame();
        let half = SKETCH_RES as f64 / 2.0;
        ((x - cx) / s + half, (y - cy) / s + half)
    }
}

pub fn ink_bbox(img: &GrayImage) -> Option<CropBox> {
    let mut b: Option<CropBox> = None;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) < 0.5 {
                let c = b.get_or_insert(CropBox {
                    x0: x,
                    y0: y,
                    x1: x,
                    y1: y,
                });
                c.x0 = c.x0.min(x);
                c.x1 = c.x1.max(x);
                c.y0 = c.y0.min(y);
                c.y1 = c.y1.max(y);
            }
        }
    }
    b
}

fn binarize(img: &GrayImage) -> GrayImage {
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = if *v < 0.5 { 0.0 } else { 1.0 };
    }
    out
}

/// Crops `img` with a given box and resamples to the sketch frame.
pub fn normalize_with_box(img: &GrayImage, b: &CropBox) -> Sketch {
    let src = binarize(img);
    let (cx, cy, s) = b.frame();
    let half = SKETCH_RES as f64 / 2.0;
    let mut data = Vec::with_capacity(SKETCH_RES * SKETCH_RES);
    for oy in 0..SKETCH_RES {
        let sy = cy + (oy as f64 + 0.5 - half) * s - 0.5;
        for ox in 0..SKETCH_RES {
            let sx = cx + (ox as f64 + 0.5 - half) * s - 0.5;
            data.push(src.sample(sx, sy, 1.0));
        }
    }
    GrayImage::new(SKETCH_RES, SKETCH_RES, data).expect("fixed size")
}

/// Normalizes an arbitrary grayscale drawing. Input already in the canonical
/// frame (ink box within a pixel of the target) is returned unchanged, which
/// makes the operation idempotent.
pub fn normalize_sketch(img: &GrayImage) -> Result<Sketch> {
    let b = ink_bbox(img).ok_or(Error::EmptySketch)?;
    if img.width() == SKETCH_RES && img.height() == SKETCH_RES && is_canonical(&b) {
        let mut out = img.clone();
        out.clamp01();
        return Ok(out);
    }
    Ok(normalize_with_box(img, &b))
}

fn is_canonical(b: &CropBox) -> bool {
    let (cx, cy, s) = b.frame();
    let half = SKETCH_RES as f64 / 2.0;
    (cx - half).abs() <= 1.0 && (cy - half).abs() <= 1.0 && (s - 1.0).abs() * half <= 1.0
}
