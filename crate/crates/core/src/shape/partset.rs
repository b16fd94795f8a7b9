use super::primitive::{decode_part, encode_part, PartPrimitive};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `m` latent rows plus per-slot presence.
#[derive(Clone, Debug, PartialEq)]
pub struct PartSet {
    /// `[m, d_model]`.
    pub z: Tensor,
    /// Presence per slot: `{0, 1}` for targets, `[0, 1]` for predictions.
    pub c: Vec<f64>,
}

impl PartSet {
    pub fn empty(m: usize, d_model: usize) -> Self {
        Self {
            z: Tensor::zeros(&[m, d_model]),
            c: vec![0.0; m],
        }
    }

    pub fn new(z: Tensor, c: Vec<f64>) -> Result<Self> {
        if z.shape().len() != 2 || z.rows() != c.len() {
            return Err(Error::Argument(format!(
                "latent shape {:?} does not match {} presence flags",
                z.shape(),
                c.len()
            )));
        }
        Ok(Self { z, c })
    }

    /// Ground truth with `parts[i]` in slot `i`; remaining slots are empty.
    pub fn from_parts(parts: &[PartPrimitive], m: usize, d_model: usize) -> Result<Self> {
        if parts.len() > m {
            return Err(Error::Config(format!("{} parts exceed {m} slots", parts.len())));
        }
        let mut set = Self::empty(m, d_model);
        for (i, p) in parts.iter().enumerate() {
            set.z.row_mut(i).copy_from_slice(&encode_part(p, d_model)?);
            set.c[i] = 1.0;
        }
        Ok(set)
    }

    /// Ground truth with `parts[i]` in slot `slots[i]`.
    pub fn from_slots(slots: &[usize], parts: &[PartPrimitive], m: usize, d_model: usize) -> Result<Self> {
        if slots.len() != parts.len() {
            return Err(Error::Config(format!("{} slots for {} parts", slots.len(), parts.len())));
        }
        let mut set = Self::empty(m, d_model);
        for (&i, p) in slots.iter().zip(parts) {
            if i >= m {
                return Err(Error::Config(format!("slot {i} exceeds {m} slots")));
            }
            if set.c[i] != 0.0 {
                return Err(Error::Config(format!("slot {i} assigned twice")));
            }
            set.z.row_mut(i).copy_from_slice(&encode_part(p, d_model)?);
            set.c[i] = 1.0;
        }
        Ok(set)
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    pub fn d_model(&self) -> usize {
        self.z.cols()
    }

    pub fn present(&self, i: usize) -> bool {
        self.c[i] > 0.5
    }

    /// Slots with presence above one half.
    pub fn present_slots(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.present(i)).collect()
    }

    /// Decoded parts of the present slots, in slot order.
    pub fn parts(&self) -> Result<Vec<(usize, PartPrimitive)>> {
        self.present_slots()
            .into_iter()
            .map(|i| Ok((i, decode_part(self.z.row(i))?)))
            .collect()
    }

    /// Zeroes the rows and flags of slots outside `keep`.
    pub fn restricted(&self, keep: &[bool]) -> Self {
        let mut out = self.clone();
        for (i, &k) in keep.iter().enumerate() {
            if !k {
                out.c[i] = 0.0;
                out.z.row_mut(i).fill(0.0);
            }
        }
        out
    }
}
