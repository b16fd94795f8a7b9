//! Canny edge detection on depth maps.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::image::GrayImage;
use super::trace::DepthMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlineConfig {
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the maximum gradient.
    pub low: f64,
    pub high: f64,
}

impl Default for OutlineConfig {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            low: 0.1,
            high: 0.25,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Separable blur with clamp-to-edge borders.
fn blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * src[y * w + clamp(x as isize + i as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + i as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Binary edge image (ink 0 on white 1) of a depth map. Misses are replaced
/// by the camera far distance before blurring.
pub fn extract_outline(depth: &DepthMap) -> GrayImage {
    extract_outline_with(depth, &OutlineConfig::default())
}

pub fn extract_outline_with(depth: &DepthMap, cfg: &OutlineConfig) -> GrayImage {
    let n = depth.res;
    let far = depth.background / 2.0;
    let filled: Vec<f64> = depth
        .data
        .iter()
        .map(|&d| if d >= depth.background { far } else { d })
        .collect();
    edges(&filled, n, n, cfg)
}

/// Canny on an arbitrary scalar field.
pub fn edges(field: &[f64], w: usize, h: usize, cfg: &OutlineConfig) -> GrayImage {
    let mut out = GrayImage::filled(w, h, 1.0);
    if w < 3 || h < 3 {
        return out;
    }
    let b = blur(field, w, h, cfg.sigma);
    let at = |x: usize, y: usize| b[y * w + x];
    let mut mag = vec![0.0; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            mag[y * w + x] = gx.hypot(gy);
            let mut a = gy.atan2(gx).to_degrees();
            if a < 0.0 {
                a += 180.0;
            }
            dir[y * w + x] = if !(22.5..157.5).contains(&a) {
                0
            } else if a < 67.5 {
                1
            } else if a < 112.5 {
                2
            } else {
                3
            };
        }
    }
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if !(max > 1e-12) {
        return out;
    }
    // non-maximum suppression; strict on one side so plateaus of two equal
    // pixels keep exactly one
    let mut thin = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let m = mag[y * w + x];
            if m == 0.0 {
                continue;
            }
            let (dx, dy): (isize, isize) = match dir[y * w + x] {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (-1, 1),
            };
            let before = mag[(y as isize - dy) as usize * w + (x as isize - dx) as usize];
            let after = mag[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            if m > before && m >= after {
                thin[y * w + x] = m;
            }
        }
    }
    let (low, high) = (cfg.low * max, cfg.high * max);
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            out.data_mut()[i] = 0.0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out.data()[j] == 1.0 && thin[j] >= low {
                    out.data_mut()[j] = 0.0;
                    queue.push_back(j);
                }
            }
        }
    }
    out
}
