//! Editing sessions: generate from a sketch, select parts, regenerate the
//! selection with the refiner, blend in parts from a new sketch, re-render
//! the current shape as an outline, and undo.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::model::{flag_completed, RefineMask, Refiner, SketchModel, COMPLETION_THRESHOLD};
use crate::render::{normalize_sketch, render_outline, Camera, GrayImage, Sketch};
use crate::shape::{decode_part, extract_mesh, LabeledMesh, PartSet};
use crate::trainer::{EVAL_GRID, INCLUSION_THRESHOLD};

pub const HISTORY_CAP: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditConfig {
    /// Presence above this puts a slot's part into the geometry.
    pub inclusion_threshold: f64,
    /// Presence below this marks a slot as completed.
    pub completion_threshold: f64,
    pub grid_res: usize,
    pub history_cap: usize,
}

impl Default for EditConfig {
    fn default() -> Self {
        Self {
            inclusion_threshold: INCLUSION_THRESHOLD,
            completion_threshold: COMPLETION_THRESHOLD,
            grid_res: EVAL_GRID,
            history_cap: HISTORY_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub id: String,
    pub current: PartSet,
    pub selected: BTreeSet<usize>,
    /// Snapshots, oldest first; the last entry equals `current`.
    pub history: Vec<(String, PartSet)>,
    pub camera: Camera,
}

impl Session {
    pub fn new(id: impl Into<String>, m: usize, d_model: usize) -> Self {
        let empty = PartSet::empty(m, d_model);
        Self {
            id: id.into(),
            current: empty.clone(),
            selected: BTreeSet::new(),
            history: vec![("init".into(), empty)],
            camera: Camera::standard_views()[0],
        }
    }
}

/// Geometry and per-slot annotations of the current shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub mesh: LabeledMesh,
    pub presence: Vec<f64>,
    pub completion: Vec<bool>,
    /// Set when no slot passes the inclusion threshold.
    pub warning: Option<String>,
}

/// Shared, read-only networks plus thresholds; sessions carry all state.
#[derive(Clone)]
pub struct Editor {
    pub model: Arc<SketchModel>,
    pub refiner: Option<Arc<Refiner>>,
    pub cfg: EditConfig,
}

impl Editor {
    pub fn new(model: SketchModel, refiner: Option<Refiner>, cfg: EditConfig) -> Result<Self> {
        if let Some(r) = &refiner {
            if r.cfg.m != model.cfg.m || r.cfg.d_model != model.cfg.d_model {
                return Err(Error::Config(format!(
                    "refiner has m={} d_model={}, model has m={} d_model={}",
                    r.cfg.m, r.cfg.d_model, model.cfg.m, model.cfg.d_model
                )));
            }
        }
        Ok(Self {
            model: Arc::new(model),
            refiner: refiner.map(Arc::new),
            cfg,
        })
    }

    pub fn new_session(&self, id: impl Into<String>) -> Session {
        Session::new(id, self.model.cfg.m, self.model.cfg.d_model)
    }

    fn included(&self, set: &PartSet) -> Vec<usize> {
        (0..set.m()).filter(|&i| set.c[i] > self.cfg.inclusion_threshold).collect()
    }

    /// Mesh of the included slots; `face_part` holds slot indices.
    pub fn mesh(&self, set: &PartSet) -> Result<LabeledMesh> {
        let slots = self.included(set);
        if slots.is_empty() {
            return Ok(LabeledMesh::default());
        }
        let prims = slots
            .iter()
            .map(|&i| decode_part(set.z.row(i)))
            .collect::<Result<Vec<_>>>()?;
        let mut mesh = extract_mesh(&prims, self.cfg.grid_res)?;
        for fp in &mut mesh.face_part {
            *fp = slots[*fp as usize] as u32;
        }
        Ok(mesh)
    }

    pub fn result(&self, set: &PartSet) -> Result<EditResult> {
        let mesh = self.mesh(set)?;
        let warning = mesh
            .is_empty()
            .then(|| "no part passes the inclusion threshold".to_string());
        Ok(EditResult {
            mesh,
            presence: set.c.clone(),
            completion: flag_completed(&set.c, self.cfg.completion_threshold),
            warning,
        })
    }

    fn commit(&self, s: &mut Session, op: &str, next: PartSet) -> Result<EditResult> {
        let out = self.result(&next)?;
        s.current = next.clone();
        s.history.push((op.to_string(), next));
        if s.history.len() > self.cfg.history_cap {
            let excess = s.history.len() - self.cfg.history_cap;
            s.history.drain(..excess);
        }
        Ok(out)
    }

    fn predict(&self, sketch: &GrayImage) -> Result<PartSet> {
        let normalized = normalize_sketch(sketch)?;
        Ok(self.model.predict(&normalized)?.into_part_set())
    }

    pub fn generate(&self, s: &mut Session, sketch: &GrayImage) -> Result<EditResult> {
        let next = self.predict(sketch)?;
        self.commit(s, "generate", next)
    }

    /// Replaces the selection; returns it sorted and deduplicated.
    pub fn select_parts(&self, s: &mut Session, ids: &[usize]) -> Result<Vec<usize>> {
        let m = s.current.m();
        if let Some(bad) = ids.iter().find(|&&i| i >= m) {
            return arg_err(format!("part id {bad} out of range for m = {m}"));
        }
        s.selected = ids.iter().copied().collect();
        Ok(s.selected.iter().copied().collect())
    }

    fn selection(&self, s: &Session) -> Result<Vec<usize>> {
        if s.selected.is_empty() {
            return arg_err("no parts selected");
        }
        Ok(s.selected.iter().copied().collect())
    }

    /// Regenerates the selected slots from the rest; other rows are copied
    /// unchanged. Refined slots get presence 1.
    pub fn refine_selected(&self, s: &mut Session) -> Result<EditResult> {
        let sel = self.selection(s)?;
        let refiner = self
            .refiner
            .as_ref()
            .ok_or_else(|| Error::State("no refiner loaded".into()))?;
        let mask = RefineMask::from_indices(s.current.m(), &sel)?;
        let refined = refiner.refine(&mask.apply(&s.current.z), &mask)?;
        let mut next = s.current.clone();
        for &i in &sel {
            next.z.row_mut(i).copy_from_slice(refined.row(i));
            next.c[i] = 1.0;
        }
        self.commit(s, "refine", next)
    }

    /// Takes the selected slots (latents and presence) from the prediction
    /// for `sketch`.
    pub fn blend(&self, s: &mut Session, sketch: &GrayImage) -> Result<EditResult> {
        let sel = self.selection(s)?;
        let other = self.predict(sketch)?;
        let mut next = s.current.clone();
        for &i in &sel {
            next.z.row_mut(i).copy_from_slice(other.z.row(i));
            next.c[i] = other.c[i];
        }
        self.commit(s, "blend", next)
    }

    /// Outline of the current shape seen from `camera` (default: the
    /// session camera).
    pub fn outline_current(&self, s: &Session, camera: Option<Camera>) -> Result<Sketch> {
        let cam = camera.unwrap_or(s.camera);
        cam.validate()?;
        let prims = self
            .included(&s.current)
            .into_iter()
            .map(|i| decode_part(s.current.z.row(i)))
            .collect::<Result<Vec<_>>>()?;
        if prims.is_empty() {
            return Err(Error::EmptyShape);
        }
        render_outline(&prims, &cam)
    }

    pub fn undo(&self, s: &mut Session) -> Result<EditResult> {
        if s.history.len() < 2 {
            return Err(Error::State("nothing to undo".into()));
        }
        s.history.pop();
        s.current = s.history.last().expect("history keeps one entry").1.clone();
        self.result(&s.current)
    }
}

/// Faces generated by the given slots.
pub fn highlighted_faces(mesh: &LabeledMesh, slots: &[usize]) -> Vec<usize> {
    mesh.faces_of_parts(slots)
}
