use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::benchmark::{seed_data, training_config};
use super::config::{
    ExperimentConfig, SEED_OFFSET_AUGMENT, SEED_OFFSET_CLASSIFIER, SEED_OFFSET_TEST,
};
use super::dataset::{synth_dataset, DatasetSpec};
use super::lfs::PrototypeApplicator;
use super::manifest::{Failure, RunManifest, Timing};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{train_eval_classifier, ClassifierConfig};
use crate::weaksup::coverage_filter;
use crate::wsgan::{augment_dataset, predict_pseudolabels, train, AugmentMode, LfApplicator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRow {
    pub seed: u64,
    pub mode: String,
    pub n_synth: usize,
    pub base_accuracy: f64,
    /// Empty when the augmentation was skipped.
    pub augmented_accuracy: Option<f64>,
    pub delta: Option<f64>,
    pub balance_ratio: f64,
    pub status: String,
}

#[derive(Clone, Debug)]
pub struct AugmentationOutcome {
    pub rows: Vec<AugmentationRow>,
    pub manifest: RunManifest,
}

impl AugmentationOutcome {
    /// Mean delta over seeds for one mode, counting only completed runs.
    pub fn mean_delta(&self, mode: AugmentMode) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.mode == mode.as_str())
            .filter_map(|r| r.delta)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Applicator that re-applies the seed's LFs through nearest-prototype
/// class assignment, with uniform class priors.
pub fn prototype_applicator(
    spec: &DatasetSpec,
    lfs: &[crate::weaksup::LfSpec],
) -> Result<PrototypeApplicator> {
    PrototypeApplicator::new(
        spec.prototypes(),
        lfs.to_vec(),
        vec![1.0 / spec.classes as f64; spec.classes],
    )
}

/// Per seed: trains the configured WSGAN, labels the covered real samples
/// with its pseudolabels, trains the end classifier with and without
/// `n_synth` generated points, and reports the test-accuracy change.
pub fn run_augmentation(
    config: &ExperimentConfig,
    n_synth: usize,
    modes: &[AugmentMode],
) -> Result<AugmentationOutcome> {
    config.validate()?;
    let out = config.resolved_output_dir();
    fs::create_dir_all(&out)?;
    let mut manifest = RunManifest::new(&(config, n_synth, modes))?;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let start = Instant::now();
        match augmentation_seed(config, seed, n_synth, modes) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                warn!("augmentation seed {seed} failed: {e}");
                manifest.failures.push(Failure {
                    seed,
                    task: "augmentation".into(),
                    error: e.to_string(),
                });
            }
        }
        manifest.wall_clock.push(Timing {
            label: format!("seed_{seed}"),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let path = out.join("augmentation.csv");
    write_augmentation_csv(&rows, &path)?;
    manifest.shared_files.push(path);
    let mpath = out.join("augmentation_manifest.json");
    manifest.shared_files.push(mpath.clone());
    manifest.save(&mpath)?;
    manifest.verify_files()?;
    Ok(AugmentationOutcome { rows, manifest })
}

fn augmentation_seed(
    config: &ExperimentConfig,
    seed: u64,
    n_synth: usize,
    modes: &[AugmentMode],
) -> Result<Vec<AugmentationRow>> {
    let data = seed_data(config, seed)?;
    let d = &data.dataset;
    let test_spec = DatasetSpec {
        n: config.augmentation.test_n,
        seed: seed.wrapping_add(SEED_OFFSET_TEST),
        ..config.dataset.clone()
    };
    let test = synth_dataset(&test_spec)?;
    let cfg = training_config(config, config.training.mode, seed);
    let (bundle, _) = train(d, &data.votes, &cfg)?;

    let covered = coverage_filter(&data.votes);
    if covered.is_empty() {
        return Err(Error::invalid("no covered samples to pseudolabel"));
    }
    let pl = predict_pseudolabels(&bundle, &d.features, &data.votes)?
        .table
        .crisp();
    let base = Dataset::new(
        d.features.select_rows(&covered),
        covered.iter().map(|&i| pl[i]).collect(),
        d.classes,
    )?;
    let clf = ClassifierConfig {
        seed: seed.wrapping_add(SEED_OFFSET_CLASSIFIER),
        ..config.augmentation.classifier.clone()
    };
    let base_accuracy = train_eval_classifier(
        &base.features,
        &base.labels,
        &test.features,
        &test.labels,
        d.classes,
        &clf,
    )?;
    let applicator = prototype_applicator(&config.dataset, &data.specs)?;

    let mut rows = Vec::new();
    for &mode in modes {
        let app: Option<&dyn LfApplicator> = match mode {
            AugmentMode::LfPl => Some(&applicator),
            AugmentMode::SyntheticPl => None,
        };
        let aug = augment_dataset(
            &bundle,
            &base,
            n_synth,
            mode,
            app,
            seed.wrapping_add(SEED_OFFSET_AUGMENT),
            config.augmentation.balance_tolerance,
        );
        let row = match aug {
            Ok(a) => {
                let acc = train_eval_classifier(
                    &a.dataset.features,
                    &a.dataset.labels,
                    &test.features,
                    &test.labels,
                    d.classes,
                    &clf,
                )?;
                AugmentationRow {
                    seed,
                    mode: mode.as_str().into(),
                    n_synth,
                    base_accuracy,
                    augmented_accuracy: Some(acc),
                    delta: Some(acc - base_accuracy),
                    balance_ratio: a.balance.ratio,
                    status: "ok".into(),
                }
            }
            Err(Error::Imbalanced(report)) => {
                warn!("seed {seed} {}: {report}", mode.as_str());
                AugmentationRow {
                    seed,
                    mode: mode.as_str().into(),
                    n_synth,
                    base_accuracy,
                    augmented_accuracy: None,
                    delta: None,
                    balance_ratio: f64::INFINITY,
                    status: "augmentation skipped".into(),
                }
            }
            Err(e) => return Err(e),
        };
        info!("{row:?}");
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_augmentation_csv(rows: &[AugmentationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "seed",
            "mode",
            "n_synth",
            "base_accuracy",
            "augmented_accuracy",
            "delta",
            "balance_ratio",
            "status",
        ])?;
    }
    w.flush()?;
    Ok(())
}
