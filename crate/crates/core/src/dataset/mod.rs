//! Training data: procedural shapes, multi-style sketch samples and the
//! on-disk dataset directory.

pub mod generate;
pub mod io;

pub use generate::{generate_shape, ShapeClass, ShapeRecord};
pub use io::{read_dataset, write_dataset, Manifest, FORMAT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::render::{
    abstract_substitute, ink_bbox, normalize_with_box, raw_outline, Camera, Sketch,
};
use crate::shape::PartSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStyle {
    Outline,
    Partial,
    /// Stroke-width and stroke-dropout stand-in for loosely drawn sketches.
    AbstractSubstitute,
    /// Sketches ingested from outside the generator.
    External,
}

impl SampleStyle {
    pub fn name(self) -> &'static str {
        match self {
            SampleStyle::Outline => "outline",
            SampleStyle::Partial => "partial",
            SampleStyle::AbstractSubstitute => "abstract_substitute",
            SampleStyle::External => "external",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample {
    pub id: String,
    pub class: ShapeClass,
    pub style: SampleStyle,
    pub view: usize,
    pub sketch: Sketch,
    pub target: PartSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub classes: Vec<ShapeClass>,
    /// Number of shapes; classes are taken round-robin.
    pub count: usize,
    pub seed: u64,
    /// Slot count; defaults to 8 for one class and 12 for several.
    pub m: Option<usize>,
    pub d_model: usize,
    pub partial_fraction: f64,
    /// Indices into [`Camera::standard_views`].
    pub views: Vec<usize>,
    /// Emit the augmented stroke-dropout style alongside plain outlines.
    pub abstract_style: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            classes: vec![ShapeClass::Chair],
            count: 64,
            seed: 0,
            m: None,
            d_model: 32,
            partial_fraction: 0.5,
            views: (0..6).collect(),
            abstract_style: true,
        }
    }
}

impl DatasetConfig {
    pub fn slots(&self) -> usize {
        self.m
            .unwrap_or(if self.classes.len() > 1 { 12 } else { 8 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("at least one shape class is required".into()));
        }
        if !(0.0..=1.0).contains(&self.partial_fraction) {
            return Err(Error::Config(format!(
                "partial_fraction {} outside [0, 1]",
                self.partial_fraction
            )));
        }
        if self.views.is_empty() || self.views.iter().any(|&v| v >= 6) {
            return Err(Error::Config("views must be a non-empty subset of 0..6".into()));
        }
        Ok(())
    }

    pub fn cameras(&self) -> Vec<Camera> {
        let all = Camera::standard_views();
        self.views.iter().map(|&v| all[v]).collect()
    }
}

/// Seed for the `index`-th shape of a dataset.
pub fn shape_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64)
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    seed ^ a.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ b.wrapping_mul(0x94D0_49BB_1331_11EB)
}

/// Samples for one shape: per view a full outline, with probability
/// `partial_fraction` a partial outline of a random strict subset of parts,
/// and an abstract substitute.
pub fn build_samples(
    record: &ShapeRecord,
    views: &[(usize, Camera)],
    partial_fraction: f64,
    seed: u64,
) -> Result<Vec<TrainSample>> {
    build_samples_with(record, views, partial_fraction, true, seed)
}

pub fn build_samples_with(
    record: &ShapeRecord,
    views: &[(usize, Camera)],
    partial_fraction: f64,
    abstract_style: bool,
    seed: u64,
) -> Result<Vec<TrainSample>> {
    if views.is_empty() {
        return arg_err("at least one view is required");
    }
    let mut out = Vec::new();
    let n = record.parts.len();
    for &(view, camera) in views {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, view as u64, 1));
        let sample = |style, sketch: Sketch, target: PartSet| {
            let mut sketch = sketch;
            sketch.quantize();
            TrainSample {
                id: record.id.clone(),
                class: record.class,
                style,
                view,
                sketch,
                target,
            }
        };
        let full_raw = raw_outline(&record.parts, &camera)?;
        let frame = ink_bbox(&full_raw).ok_or(Error::EmptySketch)?;
        let full = normalize_with_box(&full_raw, &frame);
        out.push(sample(SampleStyle::Outline, full.clone(), record.part_set.clone()));

        if n >= 2 && rng.random_bool(partial_fraction) {
            for _ in 0..8 {
                let keep = strict_subset(&mut rng, n);
                let subset: Vec<_> = record
                    .parts
                    .iter()
                    .zip(&keep)
                    .filter(|(_, &k)| k)
                    .map(|(p, _)| *p)
                    .collect();
                let raw = raw_outline(&subset, &camera)?;
                if raw.ink_count() == 0 {
                    // every kept part is hidden from this view
                    continue;
                }
                let mut slots = vec![false; record.part_set.m()];
                for (&slot, &k) in record.slots.iter().zip(&keep) {
                    slots[slot] = k;
                }
                out.push(sample(
                    SampleStyle::Partial,
                    normalize_with_box(&raw, &frame),
                    record.part_set.restricted(&slots),
                ));
                break;
            }
        }

        if abstract_style {
            let s = abstract_substitute(&full, rng.random())?;
            out.push(sample(SampleStyle::AbstractSubstitute, s, record.part_set.clone()));
        }
    }
    Ok(out)
}

/// Uniform non-empty strict subset of `n ≥ 2` items.
fn strict_subset(rng: &mut impl Rng, n: usize) -> Vec<bool> {
    loop {
        let keep: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let k = keep.iter().filter(|&&b| b).count();
        if k > 0 && k < n {
            return keep;
        }
    }
}

/// Generates every shape and sample of a dataset configuration.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Vec<TrainSample>> {
    cfg.validate()?;
    let cams: Vec<(usize, Camera)> = cfg.views.iter().copied().zip(cfg.cameras()).collect();
    let mut out = Vec::new();
    for i in 0..cfg.count {
        let class = cfg.classes[i % cfg.classes.len()];
        let seed = shape_seed(cfg.seed, i);
        let record = generate_shape(seed, class, cfg.slots(), cfg.d_model)?;
        out.extend(build_samples_with(
            &record,
            &cams,
            cfg.partial_fraction,
            cfg.abstract_style,
            mix(cfg.seed, i as u64, 2),
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn views(idx: &[usize]) -> Vec<(usize, Camera)> {
        let all = Camera::standard_views();
        idx.iter().map(|&i| (i, all[i])).collect()
    }

    #[test]
    fn two_samples_per_view_without_partials() {
        let rec = generate_shape(5, ShapeClass::Chair, 8, 32).unwrap();
        let s = build_samples(&rec, &views(&[0, 3]), 0.0, 1).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[0].style, SampleStyle::Outline);
        assert_eq!(s[1].style, SampleStyle::AbstractSubstitute);
        assert!(build_samples(&rec, &[], 0.0, 1).is_err());
    }

    #[test]
    fn partial_targets_are_strict_subsets_and_ink_is_inside_full() {
        let rec = generate_shape(8, ShapeClass::Chair, 8, 32).unwrap();
        let s = build_samples(&rec, &views(&[1, 2]), 1.0, 3).unwrap();
        let full_c = &rec.part_set.c;
        let mut partials = 0;
        for (i, sample) in s.iter().enumerate() {
            if sample.style != SampleStyle::Partial {
                continue;
            }
            partials += 1;
            let k = sample.target.c.iter().filter(|&&c| c == 1.0).count();
            assert!(k >= 1 && k < rec.parts.len());
            for (j, &c) in sample.target.c.iter().enumerate() {
                assert!(c <= full_c[j]);
                if c == 0.0 {
                    assert!(sample.target.z.row(j).iter().all(|&v| v == 0.0));
                }
            }
            assert_eq!(s[i - 1].style, SampleStyle::Outline);
        }
        assert_eq!(partials, 2);
    }

    #[test]
    fn partial_ink_lies_on_the_full_outline_without_occlusion() {
        use crate::render::render_partial;
        use crate::shape::{PartKind, PartPrimitive};
        let parts = [
            PartPrimitive::new(PartKind::Box, [-0.5, 0.0, 0.0], [0.3, 0.4, 0.3], 0.0),
            PartPrimitive::new(PartKind::Cylinder, [0.5, -0.2, 0.0], [0.25, 0.3, 0.25], 0.0),
            PartPrimitive::new(PartKind::Ellipsoid, [0.0, 0.7, 0.0], [0.3, 0.2, 0.3], 0.0),
        ];
        let cam = Camera::orthographic(0.0, 0.35);
        let full = render_partial(&parts, &[true; 3], &cam).unwrap();
        for k in 0..3 {
            let mut flags = [false; 3];
            flags[k] = true;
            let part = render_partial(&parts, &flags, &cam).unwrap();
            for y in 0..256usize {
                for x in 0..256usize {
                    if part.get(x, y) >= 0.5 {
                        continue;
                    }
                    let near = (y.saturating_sub(3)..(y + 4).min(256))
                        .any(|yy| (x.saturating_sub(3)..(x + 4).min(256)).any(|xx| full.get(xx, yy) < 0.5));
                    assert!(near, "part {k}: ink at ({x},{y}) far from the full outline");
                }
            }
        }
    }
}
