//! Training objectives. Each loss has a tape form (`*_var`) used for
//! training and a plain form for evaluation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Result};
use crate::nn::{Tape, Tensor, Var};

pub const PROB_CLAMP: f64 = 1e-7;
pub const MASK_RANGE: (f64, f64) = (0.05, 0.40);

fn check_same(a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return arg_err(format!("shape mismatch {a:?} vs {b:?}"));
    }
    Ok(())
}

/// Rows of ones where `flags[i]`.
fn row_mask(flags: &[bool], cols: usize) -> Tensor {
    let mut t = Tensor::zeros(&[flags.len(), cols]);
    for (i, &f) in flags.iter().enumerate() {
        if f {
            t.row_mut(i).fill(1.0);
        }
    }
    t
}

/// `(1/m) Σᵢ ‖z̃ᵢ − zᵢ‖₁`.
pub fn loss_full_var<'t>(tape: &'t Tape, pred: Var<'t>, target: &Tensor) -> Result<Var<'t>> {
    check_same(&pred.shape(), target.shape())?;
    let m = target.rows() as f64;
    Ok(pred.sub(tape.constant(target.clone()))?.abs().sum().scale(1.0 / m))
}

/// Mean binary cross-entropy with predictions clamped to `[1e-7, 1 − 1e-7]`.
pub fn loss_cls_var<'t>(tape: &'t Tape, pred: Var<'t>, target: &[f64]) -> Result<Var<'t>> {
    check_same(&pred.shape(), &[target.len()])?;
    let p = pred.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let c = tape.constant(Tensor::vector(target.to_vec()));
    let not_c = tape.constant(Tensor::vector(target.iter().map(|v| 1.0 - v).collect()));
    let ones = tape.constant(Tensor::filled(&[target.len()], 1.0));
    let pos = c.mul(p.ln())?;
    let neg = not_c.mul(ones.sub(p)?.ln())?;
    Ok(pos.add(neg)?.sum().scale(-1.0 / target.len() as f64))
}

/// `(1/‖c‖₀) Σᵢ cᵢ ‖z̃ᵢ − zᵢ‖₁`, zero when no part is present.
pub fn loss_part_var<'t>(tape: &'t Tape, pred: Var<'t>, target: &Tensor, c: &[f64]) -> Result<Var<'t>> {
    check_same(&pred.shape(), target.shape())?;
    if c.len() != target.rows() {
        return arg_err(format!("{} flags for {} rows", c.len(), target.rows()));
    }
    let flags: Vec<bool> = c.iter().map(|&v| v > 0.5).collect();
    let count = flags.iter().filter(|&&f| f).count();
    if count == 0 {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    masked_l1(tape, pred, target, &flags, count)
}

fn masked_l1<'t>(
    tape: &'t Tape,
    pred: Var<'t>,
    target: &Tensor,
    flags: &[bool],
    count: usize,
) -> Result<Var<'t>> {
    let mask = tape.constant(row_mask(flags, target.cols()));
    Ok(pred
        .sub(tape.constant(target.clone()))?
        .mul(mask)?
        .abs()
        .sum()
        .scale(1.0 / count as f64))
}

/// `(1/‖1‖₁) Σᵢ 1ᵢ ‖ẑᵢ − zᵢ‖₁` over the masked rows.
pub fn loss_refine_var<'t>(
    tape: &'t Tape,
    pred: Var<'t>,
    target: &Tensor,
    mask: &RefineMask,
) -> Result<Var<'t>> {
    check_same(&pred.shape(), target.shape())?;
    if mask.bits.len() != target.rows() {
        return arg_err(format!("{}-bit mask for {} rows", mask.bits.len(), target.rows()));
    }
    let count = mask.count();
    if count == 0 {
        return arg_err("refinement loss needs at least one masked row");
    }
    masked_l1(tape, pred, target, &mask.bits, count)
}

fn eval(f: impl for<'t> FnOnce(&'t Tape) -> Result<Var<'t>>) -> Result<f64> {
    let tape = Tape::new();
    Ok(f(&tape)?.item())
}

pub fn loss_full(pred: &Tensor, target: &Tensor) -> Result<f64> {
    eval(|t| loss_full_var(t, t.constant(pred.clone()), target))
}

pub fn loss_cls(pred: &[f64], target: &[f64]) -> Result<f64> {
    eval(|t| loss_cls_var(t, t.constant(Tensor::vector(pred.to_vec())), target))
}

pub fn loss_part(pred: &Tensor, target: &Tensor, c: &[f64]) -> Result<f64> {
    eval(|t| loss_part_var(t, t.constant(pred.clone()), target, c))
}

pub fn loss_refine(pred: &Tensor, target: &Tensor, mask: &RefineMask) -> Result<f64> {
    eval(|t| loss_refine_var(t, t.constant(pred.clone()), target, mask))
}

/// Slots to regenerate; `true` = masked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefineMask {
    pub bits: Vec<bool>,
}

impl RefineMask {
    pub fn from_indices(m: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; m];
        for &i in indices {
            if i >= m {
                return arg_err(format!("slot {i} out of range for m = {m}"));
            }
            bits[i] = true;
        }
        Ok(Self { bits })
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    /// Copy of `z` with the masked rows zeroed.
    pub fn apply(&self, z: &Tensor) -> Tensor {
        let mut out = z.clone();
        for i in self.indices() {
            out.row_mut(i).fill(0.0);
        }
        out
    }
}

/// Masks `k = max(1, round(u·m))` distinct slots with `u ~ U[0.05, 0.40]`.
pub fn sample_mask(seed: u64, m: usize) -> Result<RefineMask> {
    sample_mask_in(&mut ChaCha8Rng::seed_from_u64(seed), m, MASK_RANGE)
}

pub fn sample_mask_in(rng: &mut impl Rng, m: usize, range: (f64, f64)) -> Result<RefineMask> {
    if m < 3 {
        return arg_err(format!("mask sampling needs m ≥ 3, got {m}"));
    }
    if !(0.0 < range.0 && range.0 < range.1 && range.1 < 1.0) {
        return arg_err(format!("mask range {range:?} must satisfy 0 < low < high < 1"));
    }
    let u = rng.random_range(range.0..=range.1);
    let k = ((u * m as f64).round() as usize).clamp(1, m);
    let picked = sample(rng, m, k).into_vec();
    RefineMask::from_indices(m, &picked)
}

/// Slots judged absent: `c̃ᵢ < threshold`.
pub fn flag_completed(c: &[f64], threshold: f64) -> Vec<bool> {
    c.iter().map(|&v| v < threshold).collect()
}
