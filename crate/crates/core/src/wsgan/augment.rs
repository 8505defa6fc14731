use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::inference::{generate_samples, heads, predict_pseudolabels, CodeSpec};
use super::model::ModelBundle;
use crate::data::Dataset;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::weaksup::LabelMatrix;

pub const DEFAULT_BALANCE_TOLERANCE: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    /// Labels from `F1(Q(x̃))`.
    SyntheticPl,
    /// Labels from the weighted label model over LF votes on `x̃`.
    LfPl,
}

impl AugmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentMode::SyntheticPl => "synthetic_pl",
            AugmentMode::LfPl => "lf_pl",
        }
    }
}

impl std::str::FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic_pl" => Ok(AugmentMode::SyntheticPl),
            "lf_pl" => Ok(AugmentMode::LfPl),
            other => Err(Error::invalid(format!(
                "unknown augmentation mode {other:?}"
            ))),
        }
    }
}

/// Re-applies labeling functions to arbitrary feature rows.
pub trait LfApplicator {
    fn apply(&self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<LabelMatrix>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub passed: bool,
    pub counts: Vec<usize>,
    pub shares: Vec<f64>,
    /// Largest share over smallest; infinite when a class is absent.
    pub ratio: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for BalanceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "class counts {:?}, max/min share ratio {:.3} (tolerance {})",
            self.counts, self.ratio, self.tolerance
        )
    }
}

/// Fails when a class is missing or the largest class share exceeds the
/// smallest by more than `tolerance`.
pub fn class_balance_check(labels: &[usize], classes: usize, tolerance: f64) -> BalanceReport {
    let mut counts = vec![0usize; classes];
    for &y in labels {
        if y < classes {
            counts[y] += 1;
        }
    }
    let total = labels.len().max(1) as f64;
    let shares: Vec<f64> = counts.iter().map(|&k| k as f64 / total).collect();
    let max = shares.iter().cloned().fold(0.0, f64::max);
    let min = shares.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
    BalanceReport {
        passed: classes > 0 && ratio <= tolerance,
        counts,
        shares,
        ratio,
        tolerance,
    }
}

#[derive(Clone, Debug)]
pub struct Augmented {
    /// Base rows followed by the synthetic ones.
    pub dataset: Dataset,
    pub synthetic_labels: Vec<usize>,
    pub balance: BalanceReport,
}

/// Appends `n_synth` generated samples labelled by the model. `base.labels`
/// should already hold whatever labels the end classifier trains on.
pub fn augment_dataset(
    bundle: &ModelBundle,
    base: &Dataset,
    n_synth: usize,
    mode: AugmentMode,
    applicator: Option<&dyn LfApplicator>,
    seed: u64,
    tolerance: f64,
) -> Result<Augmented> {
    if base.classes != bundle.arch.classes || base.dim() != bundle.arch.feature_dim {
        return Err(Error::invalid("base dataset does not match the model"));
    }
    if mode == AugmentMode::LfPl && applicator.is_none() {
        return Err(Error::invalid("lf_pl augmentation needs an LF applicator"));
    }
    if n_synth == 0 {
        let balance = class_balance_check(&base.labels, base.classes, tolerance);
        return Ok(Augmented {
            dataset: base.clone(),
            synthetic_labels: Vec::new(),
            balance,
        });
    }
    let (x, _) = generate_samples(bundle, n_synth, CodeSpec::Uniform, seed)?;
    let labels = match (mode, applicator) {
        (AugmentMode::LfPl, Some(app)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1f);
            let votes = app.apply(&x, &mut rng)?;
            predict_pseudolabels(bundle, &x, &votes)?.table.crisp()
        }
        _ => heads(bundle, &x)?.f1.argmax_rows(),
    };
    let balance = class_balance_check(&labels, base.classes, tolerance);
    if !balance.passed {
        return Err(Error::Imbalanced(balance.to_string()));
    }
    let d = base.dim();
    let mut feats = base.features.data().to_vec();
    feats.extend_from_slice(x.data());
    let mut all = base.labels.clone();
    all.extend_from_slice(&labels);
    let dataset = Dataset::new(
        Tensor::matrix(base.n() + n_synth, d, feats),
        all,
        base.classes,
    )?;
    Ok(Augmented {
        dataset,
        synthetic_labels: labels,
        balance,
    })
}
