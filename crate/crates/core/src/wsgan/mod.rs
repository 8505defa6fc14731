//! Weakly supervised InfoGAN: generator, shared trunk with D/Q/A heads,
//! interface maps between code and label posteriors, training and
//! augmentation.

mod augment;
mod checkpoint;
mod config;
mod inference;
mod losses;
mod model;
mod train;

pub use augment::{
    augment_dataset, class_balance_check, AugmentMode, Augmented, BalanceReport, LfApplicator,
    DEFAULT_BALANCE_TOLERANCE,
};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, save_history_csv, write_history_csv, CHECKPOINT_VERSION,
};
pub use config::{Mode, TrainingConfig};
pub use inference::{
    code_assignments, generate_samples, heads, predict_pseudolabel, predict_pseudolabels, CodeSpec,
    Heads, PlSource, Pseudolabels,
};
pub use losses::{
    alignment_loss, gan_value, gan_value_graph, generator_loss, info_loss, info_loss_value,
    AlignmentTerms,
};
pub use model::{
    one_hot, sample_noise, Architecture, ModelBundle, RngState, ACCURACY_HEAD_INIT_SCALE,
};
#[cfg(test)]
mod tests;

pub use train::{fit, initialize, train, EpochRecord, StepLosses, TrainingHistory};
