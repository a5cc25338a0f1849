//! Terminal-loss training of `(Y_0, theta)`.

mod adam;
mod rollout;
mod train;

pub use adam::Adam;
pub use rollout::{
    backward_euler, loss, rollout, CorrectionMode, DphiRule, InputNorm, RolloutGraph, RolloutOptions,
    RolloutResult,
};
pub use train::{estimate_u0, IterRecord, TrainConfig, TrainState, Trainer, U0Summary};
