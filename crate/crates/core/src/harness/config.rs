use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::DatasetSpec;
use super::lfs::LfSpecRanges;
use crate::error::{Error, Result};
use crate::metrics::ClassifierConfig;
use crate::weaksup::{DawidSkeneOptions, LfSpec};
use crate::wsgan::{TrainingConfig, DEFAULT_BALANCE_TOLERANCE};

/// Relative output directories are resolved against this variable when set.
pub const OUTPUT_ROOT_ENV: &str = "WSGAN_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfSource {
    /// Drawn per seed from the given ranges.
    Random(LfSpecRanges),
    /// Used as is for every seed.
    Explicit(Vec<LfSpec>),
}

impl Default for LfSource {
    fn default() -> Self {
        LfSource::Random(LfSpecRanges::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mv,
    DawidSkene,
    InfoGan,
    WsganVector,
    WsganEncoder,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Mv,
        ModelKind::DawidSkene,
        ModelKind::InfoGan,
        ModelKind::WsganVector,
        ModelKind::WsganEncoder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mv => "mv",
            ModelKind::DawidSkene => "dawid_skene",
            ModelKind::InfoGan => "infogan",
            ModelKind::WsganVector => "wsgan_vector",
            ModelKind::WsganEncoder => "wsgan_encoder",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    WeightedF1,
    WeightedMap,
    Ari,
    CoveredFraction,
    Frechet,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::WeightedF1,
        Metric::WeightedMap,
        Metric::Ari,
        Metric::CoveredFraction,
        Metric::Frechet,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub n_synth: usize,
    /// Size of the held-out test set drawn from the same mixture.
    pub test_n: usize,
    pub classifier: ClassifierConfig,
    pub balance_tolerance: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            n_synth: 1000,
            test_n: 2000,
            classifier: ClassifierConfig::default(),
            balance_tolerance: DEFAULT_BALANCE_TOLERANCE,
        }
    }
}

/// Everything a benchmark or augmentation run needs. Per seed `s` the
/// dataset uses seed `s`, the LF draw `s + 100`, training `s`, sample
/// generation for the Fréchet distance `s + 200`, the test set `s + 300`,
/// the end classifier `s + 400` and augmentation sampling `s + 500`; the
/// dataset spec's own seed is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub lfs: LfSource,
    pub training: TrainingConfig,
    pub label_model: DawidSkeneOptions,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub metrics: Vec<Metric>,
    /// Generated samples compared against the real features; 0 means as
    /// many as there are real samples.
    pub frechet_samples: usize,
    pub augmentation: AugmentationConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            lfs: LfSource::default(),
            training: TrainingConfig::default(),
            label_model: DawidSkeneOptions::default(),
            seeds: vec![0, 1, 2],
            models: ModelKind::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            frechet_samples: 0,
            augmentation: AugmentationConfig::default(),
            output_dir: PathBuf::from("runs/benchmark"),
        }
    }
}

pub const SEED_OFFSET_LFS: u64 = 100;
pub const SEED_OFFSET_FRECHET: u64 = 200;
pub const SEED_OFFSET_TEST: u64 = 300;
pub const SEED_OFFSET_CLASSIFIER: u64 = 400;
pub const SEED_OFFSET_AUGMENT: u64 = 500;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        self.dataset.validate()?;
        self.training.validate()?;
        if let LfSource::Explicit(specs) = &self.lfs {
            if specs.is_empty() {
                return Err(Error::invalid("explicit LF list is empty"));
            }
            for s in specs {
                s.validate(self.dataset.classes)?;
            }
        }
        if self.models.is_empty() {
            return Err(Error::invalid("no models selected"));
        }
        if self.augmentation.test_n == 0 {
            return Err(Error::invalid("augmentation test set must be non-empty"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Output directory, resolved against the output-root variable when
    /// relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
