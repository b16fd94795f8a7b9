//! Minimal differentiable compute: tensors, reverse-mode autodiff, layers,
//! the optimizer and warmup schedule, and checkpoint I/O.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, grad_check_coords, grad_check_params};
pub use optim::{warmup_lr, Adam, AdamConfig, LrSchedule};
pub use params::{GradStore, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{softmax, Tensor};
