//! Weakly supervised GAN laboratory.
//!
//! Label models for programmatic weak supervision, an InfoGAN-style
//! generator whose discrete code is aligned with the label model through
//! interface maps, evaluation metrics, and a numerical checker for the
//! accompanying concentration and noisy-channel bounds.

pub mod data;
pub mod diffcore;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod theory;
pub mod weaksup;
pub mod wsgan;

pub use data::Dataset;
pub use error::{Error, Result};
