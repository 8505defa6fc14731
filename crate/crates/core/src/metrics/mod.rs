//! Evaluation: pseudolabel accuracy, support-weighted F1 and mAP, ARI,
//! Fréchet distance between Gaussian fits, and a small end classifier.

mod ari;
mod classification;
mod classifier;
mod frechet;

pub use ari::adjusted_rand_index;
pub use classification::{
    accuracy, average_precision, pseudolabel_accuracy, weighted_f1, weighted_map, EvalReport,
};
pub use classifier::{train_eval_classifier, ClassifierConfig};
pub use frechet::{frechet_gaussian_1d, frechet_gaussian_distance};
