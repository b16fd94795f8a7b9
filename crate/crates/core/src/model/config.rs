use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::SEMANTIC_WIDTH;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch: usize,
    /// Encoder width.
    pub h_d: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    /// Part slots.
    pub m: usize,
    /// Latent width; also the decoder width.
    pub d_model: usize,
    pub refiner_layers: usize,
    /// Feed-forward hidden width as a multiple of the block width.
    #[serde(default = "default_ffn_mult")]
    pub ffn_mult: usize,
}

fn default_ffn_mult() -> usize {
    4
}

impl ModelConfig {
    /// Small configuration trainable on one CPU core.
    pub fn desk() -> Self {
        Self {
            image_size: 256,
            patch: 16,
            h_d: 64,
            enc_layers: 2,
            dec_layers: 2,
            heads: 4,
            m: 8,
            d_model: 32,
            refiner_layers: 2,
            ffn_mult: 2,
        }
    }

    /// Single-class dimensions of the original network, for reference.
    pub fn paper_scale() -> Self {
        Self {
            image_size: 256,
            patch: 16,
            h_d: 512,
            enc_layers: 8,
            dec_layers: 12,
            heads: 8,
            m: 16,
            d_model: 512,
            refiner_layers: 6,
            ffn_mult: 4,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper_scale" => Ok(Self::paper_scale()),
            other => Err(Error::Config(format!("unknown model preset {other:?}"))),
        }
    }

    pub fn tokens(&self) -> usize {
        let side = self.image_size / self.patch;
        side * side
    }

    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch
    }

    /// Width of the learned part queries before projection to `d_model`.
    pub fn query_dim(&self) -> usize {
        self.h_d * 3 / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.patch == 0 || !self.image_size.is_multiple_of(self.patch) {
            return bad(format!(
                "image size {} is not a multiple of patch {}",
                self.image_size, self.patch
            ));
        }
        if self.heads == 0 || !self.h_d.is_multiple_of(self.heads) || !self.d_model.is_multiple_of(self.heads) {
            return bad(format!(
                "widths h_d={} and d_model={} must be divisible by {} heads",
                self.h_d, self.d_model, self.heads
            ));
        }
        if self.d_model < SEMANTIC_WIDTH {
            return bad(format!("d_model {} below {SEMANTIC_WIDTH}", self.d_model));
        }
        if self.m < 3 {
            return bad(format!("m = {} part slots is too few", self.m));
        }
        if self.ffn_mult == 0 {
            return bad("ffn_mult must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let d = ModelConfig::desk();
        d.validate().unwrap();
        assert_eq!(d.tokens(), 256);
        assert_eq!(d.query_dim(), 96);
        ModelConfig::paper_scale().validate().unwrap();
        let mut bad = d.clone();
        bad.patch = 15;
        assert!(bad.validate().is_err());
        bad = d.clone();
        bad.heads = 3;
        assert!(bad.validate().is_err());
    }
}
