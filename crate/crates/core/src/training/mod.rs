//! Dataset handling, augmentation, the Adam training loop and evaluation.

mod augment;
mod dataset;
mod eval;
mod fit;
mod optim;
mod split;

pub use augment::{augment, flip_horizontal, flip_vertical, Affine, AugmentConfig};
pub use dataset::{Dataset, ImageSource, Item};
pub use eval::{evaluate, predict_all, ClassMetrics, EvalReport};
pub use fit::{dataset_loss, fit, train, EpochStats, History, TrainConfig, TrainOutcome};
pub use optim::{adam_step, adam_step_model, AdamConfig, AdamState};
pub use split::{stratified_split, train_count};
