//! Depth rendering, outline sketches and sketch preprocessing.

pub mod augment;
pub mod camera;
pub mod image;
pub mod normalize;
pub mod outline;
pub mod trace;

pub use augment::{abstract_substitute, augment, augment_with, AugmentParams, Morph};
pub use camera::{Camera, Projection};
pub use image::GrayImage;
pub use normalize::{ink_bbox, normalize_sketch, normalize_with_box, CropBox, Sketch, SKETCH_RES};
pub use outline::{extract_outline, extract_outline_with, OutlineConfig};
pub use trace::{render_depth, render_shaded, write_depth_debug, DepthMap};

use crate::error::{arg_err, Error, Result};
use crate::shape::PartPrimitive;

/// Resolution of the depth maps that outlines are extracted from.
pub const RENDER_RES: usize = 256;

/// Unnormalized outline of a part union as seen by `camera`.
pub fn raw_outline(parts: &[PartPrimitive], camera: &Camera) -> Result<GrayImage> {
    if parts.is_empty() {
        return arg_err("cannot outline an empty part list");
    }
    Ok(extract_outline(&render_depth(parts, camera, RENDER_RES)?))
}

/// Normalized outline sketch of the whole shape.
pub fn render_outline(parts: &[PartPrimitive], camera: &Camera) -> Result<Sketch> {
    let raw = raw_outline(parts, camera)?;
    let b = ink_bbox(&raw).ok_or(Error::EmptySketch)?;
    Ok(normalize_with_box(&raw, &b))
}

/// Outline of the flagged parts only, framed by the full shape's crop box so
/// the partial sketch lines up with the full one.
pub fn render_partial(parts: &[PartPrimitive], flags: &[bool], camera: &Camera) -> Result<Sketch> {
    if flags.len() != parts.len() {
        return arg_err(format!("{} flags for {} parts", flags.len(), parts.len()));
    }
    let subset: Vec<PartPrimitive> = parts
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(p, _)| *p)
        .collect();
    if subset.is_empty() {
        return arg_err("partial render needs at least one flagged part");
    }
    let full = raw_outline(parts, camera)?;
    let b = ink_bbox(&full).ok_or(Error::EmptySketch)?;
    let partial = if subset.len() == parts.len() {
        full
    } else {
        raw_outline(&subset, camera)?
    };
    if partial.ink_count() == 0 {
        return Err(Error::EmptySketch);
    }
    Ok(normalize_with_box(&partial, &b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{PartKind, Vec3};

    fn chair() -> Vec<PartPrimitive> {
        let mut parts = vec![
            PartPrimitive::new(PartKind::Box, [0.0, 0.0, 0.0], [0.5, 0.06, 0.5], 0.0),
            PartPrimitive::new(PartKind::Box, [0.0, 0.5, -0.45], [0.5, 0.45, 0.05], 0.0),
        ];
        for (x, z) in [(-0.42, -0.42), (0.42, -0.42), (-0.42, 0.42), (0.42, 0.42)] {
            parts.push(PartPrimitive::new(PartKind::Box, [x, -0.5, z], [0.05, 0.44, 0.05], 0.0));
        }
        parts
    }

    #[test]
    fn all_flags_reproduce_the_full_outline() {
        let parts = chair();
        let cam = Camera::standard_views()[1];
        let full = render_outline(&parts, &cam).unwrap();
        let partial = render_partial(&parts, &vec![true; parts.len()], &cam).unwrap();
        assert_eq!(full, partial);
        assert!(render_partial(&parts, &vec![false; parts.len()], &cam).is_err());
    }

    #[test]
    fn single_part_ink_stays_in_its_projected_box() {
        let parts = chair();
        let cam = Camera::standard_views()[1];
        let full_raw = raw_outline(&parts, &cam).unwrap();
        let crop = ink_bbox(&full_raw).unwrap();
        for k in [0, 1, 3] {
            let mut flags = vec![false; parts.len()];
            flags[k] = true;
            let s = render_partial(&parts, &flags, &cam).unwrap();
            let p = parts[k];
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for corner in 0..8 {
                let local: Vec3 = std::array::from_fn(|i| {
                    let sign = if corner >> i & 1 == 1 { 1.0 } else { -1.0 };
                    p.center[i] + sign * p.half_extents[i]
                });
                let (c, r) = cam.project(local, RENDER_RES);
                let (x, y) = crop.to_sketch(c, r);
                lo = [lo[0].min(x), lo[1].min(y)];
                hi = [hi[0].max(x), hi[1].max(y)];
            }
            let mut ink = 0;
            for y in 0..SKETCH_RES {
                for x in 0..SKETCH_RES {
                    if s.get(x, y) < 0.5 {
                        ink += 1;
                        let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                        assert!(
                            cx >= lo[0] - 3.0 && cx <= hi[0] + 3.0 && cy >= lo[1] - 3.0 && cy <= hi[1] + 3.0,
                            "part {k}: ink at ({x},{y}) outside {lo:?}..{hi:?}"
                        );
                    }
                }
            }
            assert!(ink > 0);
        }
    }

    #[test]
    fn outline_is_normalized() {
        let s = render_outline(&chair(), &Camera::standard_views()[0]).unwrap();
        assert_eq!(s.width(), SKETCH_RES);
        let again = normalize_sketch(&s).unwrap();
        assert_eq!(again, s);
    }
}
