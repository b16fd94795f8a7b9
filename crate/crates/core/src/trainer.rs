//! Training loops for the sketch network and the refiner, held-out
//! evaluation, loss curves and checkpoints.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{read_dataset, SampleStyle, TrainSample};
use crate::error::{arg_err, Error, Result};
use crate::metrics::chamfer;
use crate::model::losses::{loss_cls_var, loss_full_var, loss_part_var, loss_refine_var, sample_mask_in, MASK_RANGE};
use crate::model::network::check_zeroed;
use crate::model::{loss_full, ModelConfig, Refiner, SketchModel};
use crate::nn::{warmup_lr, Adam, AdamConfig, GradStore, LrSchedule, ParamStore, Tape, Tensor};
use crate::shape::{extract_mesh, sample_surface, LabeledMesh, PartSet};

pub const LOSS_HEADER: &str = "epoch,lr,loss_full,loss_cls,loss_part";
pub const REFINER_LOSS_HEADER: &str = "epoch,lr,loss_refine";
pub const EVAL_GRID: usize = 48;
/// Presence above this includes a slot's part in the geometry.
pub const INCLUSION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub full: f64,
    pub cls: f64,
    pub part: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            full: 1.0,
            cls: 1.0,
            part: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Defaults to the published ramp `1e-7 → 1e-6` over all epochs.
    pub schedule: Option<LrSchedule>,
    /// After warmup, cosine-decay the rate to this value by the last epoch
    /// (the last epoch reachable within `max_steps` when set).
    pub lr_floor: Option<f64>,
    pub seed: u64,
    pub dataset_dir: Option<PathBuf>,
    pub heldout_dir: Option<PathBuf>,
    /// Share of the dataset's partial-outline samples drawn into each epoch.
    pub partial_fraction: f64,
    pub model: ModelConfig,
    pub mask_range: (f64, f64),
    pub weights: LossWeights,
    pub adam: AdamConfig,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// Stop once an epoch's mean training `L_full` falls below this value.
    pub stop_below: Option<f64>,
    /// Train the refiner on the sketch network's predictions instead of
    /// ground-truth latents.
    pub refiner_on_predicted: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            schedule: None,
            lr_floor: None,
            seed: 0,
            dataset_dir: None,
            heldout_dir: None,
            partial_fraction: 1.0,
            model: ModelConfig::desk(),
            mask_range: MASK_RANGE,
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            max_steps: None,
            stop_below: None,
            refiner_on_predicted: false,
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        self.schedule.unwrap_or(LrSchedule {
            warmup_epochs: self.epochs.max(1),
            ..LrSchedule::default()
        })
    }

    /// Learning rate for `epoch` when an epoch holds `batches` steps.
    pub fn lr_at(&self, epoch: usize, batches: usize) -> f64 {
        let schedule = self.schedule();
        let lr = warmup_lr(epoch, &schedule);
        let Some(floor) = self.lr_floor else {
            return lr;
        };
        let horizon = match self.max_steps {
            Some(max) => self.epochs.min(max.div_ceil(batches.max(1))),
            None => self.epochs,
        };
        let start = schedule.warmup_epochs;
        if epoch < start || horizon <= start + 1 {
            return lr;
        }
        let t = ((epoch - start) as f64 / (horizon - start - 1) as f64).min(1.0);
        floor + 0.5 * (lr - floor) * (1.0 + (std::f64::consts::PI * t).cos())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let (lo, hi) = self.mask_range;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("mask_range ({lo}, {hi}) must satisfy 0 < low < high < 1")));
        }
        if !(0.0..=1.0).contains(&self.partial_fraction) {
            return Err(Error::Config("partial_fraction must lie in [0, 1]".into()));
        }
        if self.lr_floor.is_some_and(|f| !(f.is_finite() && f >= 0.0)) {
            return Err(Error::Config("lr_floor must be finite and non-negative".into()));
        }
        self.schedule().validate()?;
        self.model.validate()
    }
}

/// One row of the sketch-network loss curve. Each loss is the epoch mean
/// over the samples it applies to (0 when none did).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_full: f64,
    pub loss_cls: f64,
    pub loss_part: f64,
    pub heldout_loss_full: Option<f64>,
}

pub struct TrainOutcome {
    pub model: SketchModel,
    pub best: SketchModel,
    pub curve: Vec<EpochLog>,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinerEpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_refine: f64,
}

pub struct RefinerOutcome {
    pub refiner: Refiner,
    pub curve: Vec<RefinerEpochLog>,
    pub steps: usize,
}

/// Refiner training pair: unmasked source latents and the target.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinerPair {
    pub input: Tensor,
    pub target: Tensor,
}

fn check_target(t: &PartSet, cfg: &ModelConfig, what: &str) -> Result<()> {
    if t.m() != cfg.m || t.d_model() != cfg.d_model {
        return Err(Error::Config(format!(
            "{what} has m={} d_model={}, model expects m={} d_model={}",
            t.m(),
            t.d_model(),
            cfg.m,
            cfg.d_model
        )));
    }
    Ok(())
}

fn is_partial(s: &TrainSample) -> bool {
    s.style == SampleStyle::Partial
}

#[derive(Default)]
struct Sums {
    full: (f64, usize),
    cls: (f64, usize),
    part: (f64, usize),
}

fn mean((sum, n): (f64, usize)) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Accumulates the gradient of one sample's objective into `grads` and
/// records its loss terms.
fn sample_step(
    model: &SketchModel,
    sample: &TrainSample,
    weights: &LossWeights,
    grads: &mut GradStore,
    sums: &mut Sums,
) -> Result<()> {
    let tape = Tape::new();
    let (z, c) = model.forward(&tape, &sample.sketch)?;
    let target = &sample.target;
    let l_cls = loss_cls_var(&tape, c, &target.c)?;
    sums.cls.0 += l_cls.item();
    sums.cls.1 += 1;
    let total = if is_partial(sample) {
        let l_part = loss_part_var(&tape, z, &target.z, &target.c)?;
        sums.part.0 += l_part.item();
        sums.part.1 += 1;
        l_cls.scale(weights.cls).add(l_part.scale(weights.part))?
    } else {
        let l_full = loss_full_var(&tape, z, &target.z)?;
        sums.full.0 += l_full.item();
        sums.full.1 += 1;
        l_full.scale(weights.full).add(l_cls.scale(weights.cls))?
    };
    if !total.item().is_finite() {
        return Err(Error::Numeric(format!("non-finite loss on sample {}", sample.id)));
    }
    tape.backward(total)?.accumulate(grads);
    Ok(())
}

/// Mean `L_full` of the network's predictions against the targets.
pub fn mean_loss_full(model: &SketchModel, samples: &[TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return arg_err("no samples to score");
    }
    let mut total = 0.0;
    for s in samples {
        total += loss_full(&model.predict(&s.sketch)?.z, &s.target.z)?;
    }
    Ok(total / samples.len() as f64)
}

fn write_curve<T>(path: &Path, header: &str, rows: &[T], fmt: impl Fn(&T) -> String) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{}", fmt(r))?;
    }
    Ok(())
}

/// Trains on in-memory samples; held-out samples choose the best checkpoint.
pub fn train_sketch2shape_on(
    cfg: &TrainConfig,
    train: &[TrainSample],
    heldout: &[TrainSample],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return arg_err("training set is empty");
    }
    for s in train.iter().chain(heldout) {
        check_target(&s.target, &cfg.model, &format!("sample {}", s.id))?;
    }
    let mut model = SketchModel::new(&cfg.model, cfg.seed)?;
    let mut adam = Adam::new(cfg.adam, &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0001);
    let mut grads = GradStore::zeros_like(&model.params);
    let mut curve = Vec::new();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut steps = 0;
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
    }
    'epochs: for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch, train.len().div_ceil(cfg.batch_size));
        let mut order: Vec<usize> = (0..train.len())
            .filter(|&i| !is_partial(&train[i]) || cfg.partial_fraction >= 1.0 || rng.random_bool(cfg.partial_fraction))
            .collect();
        order.shuffle(&mut rng);
        let mut sums = Sums::default();
        let mut done = false;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            for &i in batch {
                sample_step(&model, &train[i], &cfg.weights, &mut grads, &mut sums)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.params, &grads, lr);
            steps += 1;
            if cfg.max_steps.is_some_and(|max| steps >= max) {
                done = true;
                break;
            }
        }
        let heldout_loss = if heldout.is_empty() {
            None
        } else {
            Some(mean_loss_full(&model, heldout)?)
        };
        let log = EpochLog {
            epoch,
            lr,
            loss_full: mean(sums.full),
            loss_cls: mean(sums.cls),
            loss_part: mean(sums.part),
            heldout_loss_full: heldout_loss,
        };
        log::info!(
            "epoch {epoch} lr {lr:.3e} full {:.5} cls {:.5} part {:.5}",
            log.loss_full,
            log.loss_cls,
            log.loss_part
        );
        // without held-out data the training-epoch L_full ranks checkpoints
        let score = heldout_loss.unwrap_or(log.loss_full);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, model.params.clone()));
        }
        let converged = sums.full.1 > 0 && cfg.stop_below.is_some_and(|t| log.loss_full < t);
        curve.push(log);
        if done || converged {
            break 'epochs;
        }
    }
    let mut best_model = model.clone();
    if let Some((_, params)) = best {
        best_model.params = params;
    }
    if let Some(dir) = &cfg.out_dir {
        model.save(&dir.join("model_final.ckpt"))?;
        best_model.save(&dir.join("model_best.ckpt"))?;
        write_curve(&dir.join("loss.csv"), LOSS_HEADER, &curve, |r| {
            format!("{},{},{},{},{}", r.epoch, r.lr, r.loss_full, r.loss_cls, r.loss_part)
        })?;
    }
    Ok(TrainOutcome {
        model,
        best: best_model,
        curve,
        steps,
    })
}

/// Reads `dataset_dir` (and `heldout_dir` when set) and trains.
pub fn train_sketch2shape(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let dir = cfg
        .dataset_dir
        .as_ref()
        .ok_or_else(|| Error::Config("dataset_dir is required".into()))?;
    let (manifest, train) = read_dataset(dir)?;
    if manifest.m != cfg.model.m || manifest.d_model != cfg.model.d_model {
        return Err(Error::Config(format!(
            "dataset has m={} d_model={}, model expects m={} d_model={}",
            manifest.m, manifest.d_model, cfg.model.m, cfg.model.d_model
        )));
    }
    let heldout = match &cfg.heldout_dir {
        Some(h) => read_dataset(h)?.1,
        None => Vec::new(),
    };
    train_sketch2shape_on(cfg, &train, &heldout)
}

/// Masked-slot training of the refiner on `(input, target)` pairs.
pub fn train_refiner_on(cfg: &TrainConfig, data: &[RefinerPair]) -> Result<RefinerOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return arg_err("refiner training set is empty");
    }
    let (m, d) = (cfg.model.m, cfg.model.d_model);
    for p in data {
        if p.input.shape() != [m, d] || p.target.shape() != [m, d] {
            return Err(Error::Config(format!(
                "refiner pair has shape {:?}/{:?}, model expects [{m}, {d}]",
                p.input.shape(),
                p.target.shape()
            )));
        }
    }
    let mut refiner = Refiner::new(&cfg.model, cfg.seed)?;
    let mut adam = Adam::new(cfg.adam, &refiner.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0002);
    let mut grads = GradStore::zeros_like(&refiner.params);
    let mut curve = Vec::new();
    let mut steps = 0;
    'epochs: for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch, data.len().div_ceil(cfg.batch_size));
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0);
        let mut done = false;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            for &i in batch {
                let mask = sample_mask_in(&mut rng, m, cfg.mask_range)?;
                let z_in = mask.apply(&data[i].input);
                assert!(check_zeroed(&z_in, &mask).is_ok(), "masked rows must be zero");
                let tape = Tape::new();
                let out = refiner.forward(&tape, tape.constant(z_in))?;
                let loss = loss_refine_var(&tape, out, &data[i].target, &mask)?;
                sum += loss.item();
                count += 1;
                tape.backward(loss)?.accumulate(&mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut refiner.params, &grads, lr);
            steps += 1;
            if cfg.max_steps.is_some_and(|max| steps >= max) {
                done = true;
                break;
            }
        }
        let log = RefinerEpochLog {
            epoch,
            lr,
            loss_refine: sum / count as f64,
        };
        log::info!("refiner epoch {epoch} lr {lr:.3e} loss {:.5}", log.loss_refine);
        let converged = cfg.stop_below.is_some_and(|t| log.loss_refine < t);
        curve.push(log);
        if done || converged {
            break 'epochs;
        }
    }
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        refiner.save(&dir.join("refiner.ckpt"))?;
        write_curve(&dir.join("refiner_loss.csv"), REFINER_LOSS_HEADER, &curve, |r| {
            format!("{},{},{}", r.epoch, r.lr, r.loss_refine)
        })?;
    }
    Ok(RefinerOutcome {
        refiner,
        curve,
        steps,
    })
}

/// Builds refiner pairs from samples: ground-truth inputs, or the sketch
/// network's predictions when `predictor` is given. Each distinct target
/// appears once in ground-truth mode.
pub fn refiner_pairs(samples: &[TrainSample], predictor: Option<&SketchModel>) -> Result<Vec<RefinerPair>> {
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for s in samples.iter().filter(|s| s.style != SampleStyle::Partial) {
        match predictor {
            Some(model) => pairs.push(RefinerPair {
                input: model.predict(&s.sketch)?.z,
                target: s.target.z.clone(),
            }),
            None => {
                if seen.insert(s.id.clone()) {
                    pairs.push(RefinerPair {
                        input: s.target.z.clone(),
                        target: s.target.z.clone(),
                    });
                }
            }
        }
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub grid: usize,
    /// Grid of the reference mesh extracted from the ground-truth parts.
    pub reference_grid: usize,
    pub n_points: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            grid: EVAL_GRID,
            reference_grid: 2 * EVAL_GRID,
            n_points: 4096,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean over samples whose prediction was non-empty; `None` if none was.
    pub mean_cd: Option<f64>,
    pub presence_accuracy: f64,
    pub mean_loss_full: f64,
    pub empty_predictions: usize,
    pub samples: usize,
    pub grid: usize,
}

/// Mesh of the slots whose presence exceeds [`INCLUSION_THRESHOLD`].
pub fn mesh_of(parts: &PartSet, grid: usize) -> Result<LabeledMesh> {
    let (slots, prims): (Vec<usize>, Vec<_>) = parts.parts()?.into_iter().unzip();
    if prims.is_empty() {
        return Ok(LabeledMesh::default());
    }
    let mut mesh = extract_mesh(&prims, grid)?;
    // face_part indexes the present-part list; report slot indices instead
    for fp in &mut mesh.face_part {
        *fp = slots[*fp as usize] as u32;
    }
    Ok(mesh)
}

/// Chamfer distance between the meshes of two part sets.
pub fn part_set_chamfer(a: &PartSet, b: &PartSet, opts: &EvalOptions) -> Result<Option<f64>> {
    let ma = mesh_of(a, opts.grid)?;
    let mb = mesh_of(b, opts.reference_grid)?;
    if ma.is_empty() || mb.is_empty() {
        return Ok(None);
    }
    let pa = sample_surface(&ma, opts.n_points, opts.seed)?;
    let pb = sample_surface(&mb, opts.n_points, opts.seed.wrapping_add(1))?;
    Ok(Some(chamfer(&pa, &pb)?))
}

/// Scores predicted part sets against ground truth.
pub fn evaluate_predictions(preds: &[PartSet], targets: &[PartSet], opts: &EvalOptions) -> Result<EvalReport> {
    if preds.len() != targets.len() || preds.is_empty() {
        return arg_err("held-out set must be non-empty and match the predictions");
    }
    let (mut cd_sum, mut cd_n, mut empty) = (0.0, 0, 0);
    let (mut agree, mut slots, mut lf) = (0, 0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        lf += loss_full(&p.z, &t.z)?;
        for i in 0..t.m() {
            agree += usize::from(p.present(i) == t.present(i));
            slots += 1;
        }
        match part_set_chamfer(p, t, opts)? {
            Some(cd) => {
                cd_sum += cd;
                cd_n += 1;
            }
            None => empty += 1,
        }
    }
    Ok(EvalReport {
        mean_cd: (cd_n > 0).then(|| cd_sum / cd_n as f64),
        presence_accuracy: agree as f64 / slots as f64,
        mean_loss_full: lf / preds.len() as f64,
        empty_predictions: empty,
        samples: preds.len(),
        grid: opts.grid,
    })
}

pub fn evaluate_model(model: &SketchModel, heldout: &[TrainSample], opts: &EvalOptions) -> Result<EvalReport> {
    let preds = heldout
        .iter()
        .map(|s| Ok(model.predict(&s.sketch)?.into_part_set()))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<PartSet> = heldout.iter().map(|s| s.target.clone()).collect();
    evaluate_predictions(&preds, &targets, opts)
}

pub fn evaluate_epoch(checkpoint: &Path, heldout: &[TrainSample], opts: &EvalOptions) -> Result<EvalReport> {
    evaluate_model(&SketchModel::load(checkpoint)?, heldout, opts)
}
