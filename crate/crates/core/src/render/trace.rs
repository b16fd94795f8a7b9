//! Sphere tracing of part unions: depth maps and Lambert-shaded previews.

use std::io::Write as _;
use std::path::Path;

use super::camera::{Camera, Ray};
use super::image::GrayImage;
use crate::error::{arg_err, Result};
use crate::shape::mesh::{dot, norm};
use crate::shape::{part_sdf, sdf_gradient, PartPrimitive, Vec3};

pub const HIT_EPS: f64 = 1e-4;
pub const MAX_STEPS: usize = 256;

/// Per-pixel ray depth; misses hold `background` (twice the camera far
/// distance).
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub res: usize,
    pub data: Vec<f64>,
    pub background: f64,
}

impl DepthMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.res + col]
    }

    pub fn is_hit(&self, row: usize, col: usize) -> bool {
        self.get(row, col) < self.background
    }
}

/// Marches one ray; returns the hit distance or `None`.
fn trace(parts: &[&PartPrimitive], ray: &Ray, t_max: f64) -> Option<f64> {
    if parts.is_empty() {
        return None;
    }
    let at = |t: f64| -> f64 {
        let q: Vec3 = std::array::from_fn(|i| ray.origin[i] + t * ray.dir[i]);
        parts
            .iter()
            .map(|p| part_sdf(p, q))
            .fold(f64::INFINITY, f64::min)
    };
    let mut t = 0.0;
    for _ in 0..MAX_STEPS {
        let d = at(t);
        if d.abs() < HIT_EPS {
            // a few extra steps tighten the hit well below the threshold
            let mut prev = d;
            for _ in 0..8 {
                let nd = at(t + prev);
                if nd.abs() >= prev.abs() || prev.abs() < 1e-12 {
                    break;
                }
                t += prev;
                prev = nd;
            }
            return Some(t);
        }
        t += d;
        if t > t_max {
            return None;
        }
    }
    None
}

/// Parts whose bounding sphere the ray passes through.
fn candidates<'a>(parts: &'a [PartPrimitive], ray: &Ray) -> Vec<&'a PartPrimitive> {
    parts
        .iter()
        .filter(|p| {
            let rel = [
                p.center[0] - ray.origin[0],
                p.center[1] - ray.origin[1],
                p.center[2] - ray.origin[2],
            ];
            let along = dot(rel, ray.dir);
            let perp2 = dot(rel, rel) - along * along;
            let r = p.bounding_radius() + HIT_EPS;
            perp2 <= r * r
        })
        .collect()
}

pub fn render_depth(parts: &[PartPrimitive], camera: &Camera, res: usize) -> Result<DepthMap> {
    camera.validate()?;
    if res == 0 {
        return arg_err("render resolution must be positive");
    }
    let background = 2.0 * camera.far();
    let mut data = vec![background; res * res];
    for row in 0..res {
        for col in 0..res {
            let ray = camera.ray(row, col, res);
            let near = candidates(parts, &ray);
            if let Some(t) = trace(&near, &ray, camera.far()) {
                data[row * res + col] = t;
            }
        }
    }
    Ok(DepthMap {
        res,
        data,
        background,
    })
}

/// Lambert shading lit from the camera direction over a white background.
pub fn render_shaded(parts: &[PartPrimitive], camera: &Camera, res: usize) -> Result<GrayImage> {
    let depth = render_depth(parts, camera, res)?;
    let (_, _, forward) = camera.basis();
    let light = forward.map(|v| -v);
    let mut img = GrayImage::filled(res, res, 1.0);
    for row in 0..res {
        for col in 0..res {
            if !depth.is_hit(row, col) {
                continue;
            }
            let ray = camera.ray(row, col, res);
            let t = depth.get(row, col);
            let p: Vec3 = std::array::from_fn(|i| ray.origin[i] + t * ray.dir[i]);
            let n = surface_normal(parts, p);
            let lambert = dot(n, light).max(0.0);
            img.set(col, row, 0.1 + 0.8 * lambert);
        }
    }
    Ok(img)
}

/// Unit normal from central differences of the union field.
pub fn surface_normal(parts: &[PartPrimitive], p: Vec3) -> Vec3 {
    let g = sdf_gradient(parts, p, 1e-5);
    let n = norm(g);
    if n > 0.0 {
        g.map(|v| v / n)
    } else {
        [0.0, 0.0, 1.0]
    }
}

const DEPTH_MAGIC: &[u8; 8] = b"PSKDEPTH";

/// Debug dump: 8-byte magic, u32 width, u32 height, then f32 LE depths.
pub fn write_depth_debug(path: &Path, depth: &DepthMap) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 4 * depth.data.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(depth.res as u32).to_le_bytes());
    out.extend_from_slice(&(depth.res as u32).to_le_bytes());
    for &v in &depth.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
