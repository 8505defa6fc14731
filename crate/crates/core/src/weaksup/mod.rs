//! Labeling functions and label models: majority vote, one-coin
//! Dawid-Skene, and the weighted-vote softmax used by the WSGAN label model.

mod dawid_skene;
pub mod io;
mod label_models;
mod matrix;
mod synth;

pub use dawid_skene::{
    dawid_skene_fit, one_coin_log_likelihood, DawidSkeneFit, DawidSkeneOptions, ACCURACY_CLAMP,
};
pub use label_models::{
    majority_vote, weighted_softmax_posterior, weighted_softmax_table, LfWeights,
};
pub use matrix::{coverage_filter, LabelMatrix, PosteriorTable};
pub use synth::{generate_synthetic_lfs, lf_stats, LfSpec, LfStat, LfStats};
