//! Dataset directory layout:
//!
//! ```text
//! manifest.json                 config echo, counts, format_version
//! targets.jsonl                 one target record per sample
//! sketches/<id>_<view>_<style>.png
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetConfig, SampleStyle, ShapeClass, TrainSample};
use crate::error::{Error, Result};
use crate::render::{GrayImage, SKETCH_RES};
use crate::shape::{encode_part, PartPrimitive, PartSet};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    /// Total samples and samples per style.
    pub counts: BTreeMap<String, usize>,
    pub m: usize,
    pub d_model: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetRecord {
    id: String,
    class: ShapeClass,
    style: SampleStyle,
    view: usize,
    c: Vec<f64>,
    /// Present parts in slot order.
    parts: Vec<PartPrimitive>,
}

fn sketch_name(s: &TrainSample) -> String {
    format!("{}_{}_{}.png", s.id, s.view, s.style.name())
}

pub fn write_dataset(samples: &[TrainSample], config: &DatasetConfig, dir: &Path) -> Result<Manifest> {
    let (m, d_model) = match samples.first() {
        Some(s) => (s.target.m(), s.target.d_model()),
        None => (config.slots(), config.d_model),
    };
    let sketch_dir = dir.join("sketches");
    std::fs::create_dir_all(&sketch_dir)?;
    let mut counts = BTreeMap::new();
    counts.insert("samples".to_string(), samples.len());
    let mut targets = BufWriter::new(std::fs::File::create(dir.join("targets.jsonl"))?);
    for s in samples {
        if s.target.m() != m || s.target.d_model() != d_model {
            return Err(Error::Config("samples disagree on (m, d_model)".into()));
        }
        *counts.entry(s.style.name().to_string()).or_default() += 1;
        s.sketch.write_png(&sketch_dir.join(sketch_name(s)))?;
        let record = TargetRecord {
            id: s.id.clone(),
            class: s.class,
            style: s.style,
            view: s.view,
            c: s.target.c.clone(),
            parts: s.target.parts()?.into_iter().map(|(_, p)| p).collect(),
        };
        serde_json::to_writer(&mut targets, &record)?;
        targets.write_all(b"\n")?;
    }
    targets.flush()?;
    let shapes: std::collections::BTreeSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    counts.insert("shapes".to_string(), shapes.len());
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        counts,
        m,
        d_model,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "dataset format version {} is not {FORMAT_VERSION}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<TrainSample>)> {
    let manifest = read_manifest(dir)?;
    let file = std::fs::File::open(dir.join("targets.jsonl"))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let rec: TargetRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let target = target_from(&rec, manifest.m, manifest.d_model).map_err(|e| parse_err(e.to_string()))?;
        let mut sample = TrainSample {
            id: rec.id,
            class: rec.class,
            style: rec.style,
            view: rec.view,
            sketch: GrayImage::filled(1, 1, 1.0),
            target,
        };
        let path: PathBuf = dir.join("sketches").join(sketch_name(&sample));
        sample.sketch = GrayImage::read_png(&path)?;
        if sample.sketch.width() != SKETCH_RES || sample.sketch.height() != SKETCH_RES {
            return Err(Error::Format(format!("{} is not {SKETCH_RES}²", path.display())));
        }
        samples.push(sample);
    }
    Ok((manifest, samples))
}

fn target_from(rec: &TargetRecord, m: usize, d_model: usize) -> Result<PartSet> {
    if rec.c.len() != m {
        return Err(Error::Format(format!("{} presence flags, expected {m}", rec.c.len())));
    }
    let slots: Vec<usize> = (0..m).filter(|&i| rec.c[i] > 0.5).collect();
    if slots.len() != rec.parts.len() {
        return Err(Error::Format(format!(
            "{} present slots but {} parts",
            slots.len(),
            rec.parts.len()
        )));
    }
    let mut set = PartSet::empty(m, d_model);
    set.c.clone_from(&rec.c);
    for (&slot, p) in slots.iter().zip(&rec.parts) {
        p.validate()?;
        set.z.row_mut(slot).copy_from_slice(&encode_part(p, d_model)?);
    }
    Ok(set)
}
