//! Sketch augmentation: flips, perspective warps, stroke width changes and
//! stroke dropout.

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::GrayImage;
use super::normalize::{normalize_sketch, Sketch};
use crate::error::Result;

/// Largest corner displacement as a fraction of the image width.
pub const MAX_CORNER_JITTER: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Morph {
    None,
    /// Thickens ink by a disk of the given radius.
    Dilate(usize),
    /// Thins ink by a disk of the given radius.
    Erode(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    /// Displacement of the corners (top-left, top-right, bottom-right,
    /// bottom-left) in pixels.
    pub corners: [[f64; 2]; 4],
    pub morph: Morph,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            flip: false,
            corners: [[0.0; 2]; 4],
            morph: Morph::None,
        }
    }

    pub fn sample(rng: &mut impl Rng, width: usize) -> Self {
        let j = MAX_CORNER_JITTER * width as f64;
        let flip = rng.random_bool(0.5);
        let corners = std::array::from_fn(|_| [rng.random_range(-j..=j), rng.random_range(-j..=j)]);
        let radius = rng.random_range(0..=2usize);
        let morph = match (radius, rng.random_bool(0.7)) {
            (0, _) => Morph::None,
            (r, true) => Morph::Dilate(r),
            (r, false) => Morph::Erode(r),
        };
        Self {
            flip,
            corners,
            morph,
        }
    }
}

/// Homography taking the four destination points to the source points.
fn homography(dst: [[f64; 2]; 4], src: [[f64; 2]; 4]) -> Option<Matrix3<f64>> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let [x, y] = dst[i];
        let [u, v] = src[i];
        a.set_row(
            2 * i,
            &SMatrix::<f64, 1, 8>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]),
        );
        a.set_row(
            2 * i + 1,
            &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]),
        );
        b[2 * i] = u;
        b[2 * i + 1] = v;
    }
    let h = a.lu().solve(&b)?;
    Some(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

pub fn warp_perspective(img: &GrayImage, corners: &[[f64; 2]; 4]) -> GrayImage {
    if corners.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
        return img.clone();
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    let dst = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
    let src: [[f64; 2]; 4] =
        std::array::from_fn(|i| [dst[i][0] + corners[i][0], dst[i][1] + corners[i][1]]);
    let Some(hm) = homography(dst, src) else {
        return img.clone();
    };
    let mut out = GrayImage::filled(img.width(), img.height(), 1.0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = hm * nalgebra::Vector3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
            if p[2].abs() < 1e-12 {
                continue;
            }
            out.set(x, y, img.sample(p[0] / p[2] - 0.5, p[1] / p[2] - 0.5, 1.0));
        }
    }
    out
}

/// Grayscale morphology with a disk: dilating ink takes the window minimum.
pub fn morph(img: &GrayImage, op: Morph) -> GrayImage {
    let (r, dilate) = match op {
        Morph::None | Morph::Dilate(0) | Morph::Erode(0) => return img.clone(),
        Morph::Dilate(r) => (r as isize, true),
        Morph::Erode(r) => (r as isize, false),
    };
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = if dilate { f64::INFINITY } else { f64::NEG_INFINITY };
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                let v = if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    1.0
                } else {
                    img.get(nx as usize, ny as usize)
                };
                acc = if dilate { acc.min(v) } else { acc.max(v) };
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    out
}

/// Applies the given augmentation and renormalizes. An erosion that would
/// erase every stroke is skipped.
pub fn augment_with(sketch: &Sketch, params: &AugmentParams) -> Result<Sketch> {
    let mut img = if params.flip {
        sketch.flipped()
    } else {
        sketch.clone()
    };
    img = warp_perspective(&img, &params.corners);
    let m = morph(&img, params.morph);
    if m.ink_count() > 0 {
        img = m;
    }
    normalize_sketch(&img)
}

pub fn augment(sketch: &Sketch, seed: u64) -> Result<Sketch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = AugmentParams::sample(&mut rng, sketch.width());
    augment_with(sketch, &params)
}

/// Erases roughly `fraction` of the ink pixels in connected runs of 6 to 20
/// pixels. At least one ink pixel always survives.
pub fn stroke_dropout(sketch: &Sketch, fraction: f64, rng: &mut impl Rng) -> Sketch {
    let mut out = sketch.clone();
    let (w, h) = (sketch.width(), sketch.height());
    let ink: Vec<usize> = (0..w * h).filter(|&i| sketch.data()[i] < 0.5).collect();
    let target = ((ink.len() as f64) * fraction.clamp(0.0, 1.0)) as usize;
    let target = target.min(ink.len().saturating_sub(1));
    let mut removed = 0;
    let mut attempts = 0;
    while removed < target && attempts < 10 * ink.len() {
        attempts += 1;
        let start = ink[rng.random_range(0..ink.len())];
        if out.data()[start] >= 0.5 {
            continue;
        }
        let run = rng.random_range(6..=20usize).min(target - removed);
        let mut stack = vec![start];
        let mut taken = 0;
        while let Some(i) = stack.pop() {
            if taken >= run || out.data()[i] >= 0.5 {
                continue;
            }
            out.data_mut()[i] = 1.0;
            taken += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) != (0, 0) && nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        stack.push(ny as usize * w + nx as usize);
                    }
                }
            }
        }
        removed += taken;
    }
    out
}

/// Stand-in for a loosely drawn sketch: a random augmentation followed by
/// dropping 0–20% of the strokes.
pub fn abstract_substitute(sketch: &Sketch, seed: u64) -> Result<Sketch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = AugmentParams::sample(&mut rng, sketch.width());
    let warped = augment_with(sketch, &params)?;
    let frac = rng.random_range(0.0..=0.2);
    normalize_sketch(&stroke_dropout(&warped, frac, &mut rng))
}
