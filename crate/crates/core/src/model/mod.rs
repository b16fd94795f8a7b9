//! The learned components: sketch encoder, part-query decoder with latent and
//! presence heads, the refinement network and the training losses.

pub mod config;
pub mod losses;
pub mod network;

pub use config::ModelConfig;
pub use losses::{
    flag_completed, loss_cls, loss_cls_var, loss_full, loss_full_var, loss_part, loss_part_var,
    loss_refine, loss_refine_var, sample_mask, sample_mask_in, RefineMask,
};
pub use network::{patchify, Prediction, Refiner, SketchModel};

/// Presence below this marks a slot as completed away.
pub const COMPLETION_THRESHOLD: f64 = 0.01;
