//! Grayscale images in `[0, 1]` and 8-bit PNG I/O.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image, `0` = black ink, `1` = white background.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width * height != data.len() || width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "{width}×{height} image cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at continuous pixel-center coordinates (pixel `(x, y)`
    /// has its center at `(x, y)`); outside the image reads `background`.
    pub fn sample(&self, x: f64, y: f64, background: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let fetch = |xi: f64, yi: f64| -> f64 {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                background
            } else {
                self.data[yi as usize * self.width + xi as usize]
            }
        };
        let a = fetch(x0, y0);
        let b = fetch(x0 + 1.0, y0);
        let c = fetch(x0, y0 + 1.0);
        let d = fetch(x0 + 1.0, y0 + 1.0);
        // skip zero-weight taps so exact pixel hits are returned bit-exactly
        let top = if fx == 0.0 { a } else { a + (b - a) * fx };
        let bottom = if fx == 0.0 { c } else { c + (d - c) * fx };
        if fy == 0.0 {
            top
        } else {
            top + (bottom - top) * fy
        }
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Rounds every value to the nearest multiple of 1/255.
    pub fn quantize(&mut self) {
        for v in &mut self.data {
            *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Horizontal mirror.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.data[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }

    pub fn ink_count(&self) -> usize {
        self.data.iter().filter(|&&v| v < 0.5).count()
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc
                .write_header()
                .map_err(|e| Error::Format(e.to_string()))?;
            w.write_image_data(&self.to_u8())
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(out)
    }

    /// Decodes a PNG of any color type; color is reduced to luminance and
    /// alpha composited over white.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = png::Decoder::new(std::io::Cursor::new(bytes));
        dec.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = dec.read_info().map_err(|e| Error::Format(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Format(e.to_string()))?;
        let (w, h) = (info.width as usize, info.height as usize);
        let px = &buf[..info.buffer_size()];
        let channels = info.color_type.samples();
        let mut data = Vec::with_capacity(w * h);
        for chunk in px.chunks_exact(channels) {
            let c = |i: usize| chunk[i] as f64 / 255.0;
            let (lum, alpha) = match channels {
                1 => (c(0), 1.0),
                2 => (c(0), c(1)),
                3 => (0.299 * c(0) + 0.587 * c(1) + 0.114 * c(2), 1.0),
                _ => (0.299 * c(0) + 0.587 * c(1) + 0.114 * c(2), c(3)),
            };
            data.push(lum * alpha + (1.0 - alpha));
        }
        Self::new(w, h, data)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        std::io::Write::write_all(&mut w, &self.to_png_bytes()?)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::io::Read::read_to_end(&mut BufReader::new(std::fs::File::open(path)?), &mut bytes)?;
        Self::from_png_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless_for_8bit_values() {
        let data: Vec<f64> = (0..12 * 7).map(|i| (i % 256) as f64 / 255.0).collect();
        let img = GrayImage::new(12, 7, data).unwrap();
        let back = GrayImage::from_png_bytes(&img.to_png_bytes().unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn sampling_at_pixel_centers_is_exact() {
        let img = GrayImage::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(img.sample(1.0, 1.0, 1.0), 0.4);
        assert!((img.sample(0.5, 0.0, 1.0) - 0.15).abs() < 1e-15);
        assert_eq!(img.sample(-1.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn flip_is_an_involution() {
        let img = GrayImage::new(3, 2, vec![0.0, 0.5, 1.0, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(img.flipped().get(0, 0), 1.0);
        assert_eq!(img.flipped().flipped(), img);
    }
}
