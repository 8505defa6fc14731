use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{
    ExperimentConfig, LfSource, Metric, ModelKind, SEED_OFFSET_FRECHET, SEED_OFFSET_LFS,
};
use super::dataset::synth_dataset;
use super::lfs::random_lf_specs;
use super::manifest::{Failure, RunManifest, Timing};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{
    adjusted_rand_index, frechet_gaussian_distance, pseudolabel_accuracy, weighted_f1,
    weighted_map, EvalReport,
};
use crate::weaksup::{
    dawid_skene_fit, generate_synthetic_lfs, majority_vote, LabelMatrix, LfSpec, PosteriorTable,
};
use crate::wsgan::{
    code_assignments, generate_samples, predict_pseudolabels, save_history_csv, train, CodeSpec,
    Mode, ModelBundle, TrainingConfig, TrainingHistory,
};

pub const METRICS_HEADER: [&str; 8] = [
    "seed",
    "model",
    "accuracy",
    "weighted_f1",
    "weighted_map",
    "ari",
    "covered_fraction",
    "frechet_distance",
];

/// Data and LFs for one seed.
pub struct SeedData {
    pub dataset: Dataset,
    pub specs: Vec<LfSpec>,
    pub votes: LabelMatrix,
}

pub fn seed_data(config: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let spec = super::dataset::DatasetSpec {
        seed,
        ..config.dataset.clone()
    };
    let dataset = synth_dataset(&spec)?;
    let specs = match &config.lfs {
        LfSource::Random(r) => {
            random_lf_specs(spec.classes, r, seed.wrapping_add(SEED_OFFSET_LFS))?
        }
        LfSource::Explicit(s) => s.clone(),
    };
    let votes = generate_synthetic_lfs(&dataset.labels, spec.classes, &specs)?;
    Ok(SeedData {
        dataset,
        specs,
        votes,
    })
}

pub fn training_config(config: &ExperimentConfig, mode: Mode, seed: u64) -> TrainingConfig {
    TrainingConfig {
        mode,
        seed,
        ..config.training.clone()
    }
}

/// Scores a posterior table against the hidden labels on its covered
/// rows. ARI here compares crisp labels on the covered rows.
pub fn evaluate_posteriors(
    table: &PosteriorTable,
    truth: &[usize],
    classes: usize,
    seed: u64,
    model: &str,
) -> Result<EvalReport> {
    let covered: Vec<usize> = (0..table.n()).filter(|&i| table.covered()[i]).collect();
    if covered.is_empty() {
        return Err(Error::invalid(format!(
            "{model}: no covered rows to evaluate"
        )));
    }
    let crisp = table.crisp();
    let pred: Vec<usize> = covered.iter().map(|&i| crisp[i]).collect();
    let t: Vec<usize> = covered.iter().map(|&i| truth[i]).collect();
    let sub = PosteriorTable::new(
        table.probs().select_rows(&covered),
        vec![true; covered.len()],
    )?;
    Ok(EvalReport {
        accuracy: pseudolabel_accuracy(table, truth)?.unwrap_or(0.0),
        weighted_f1: weighted_f1(&pred, &t, classes)?,
        weighted_map: weighted_map(&sub, &t)?,
        ari: adjusted_rand_index(&pred, &t)?,
        covered_fraction: covered.len() as f64 / table.n() as f64,
        frechet_distance: None,
        seed,
        model: model.to_string(),
    })
}

/// Label-model scores plus the ARI of `argmax Q` on all rows and the
/// Fréchet distance between real and generated samples.
pub fn evaluate_bundle(
    bundle: &ModelBundle,
    data: &SeedData,
    frechet_samples: usize,
    seed: u64,
    model: &str,
) -> Result<EvalReport> {
    let d = &data.dataset;
    let pl = predict_pseudolabels(bundle, &d.features, &data.votes)?;
    let mut report = evaluate_posteriors(&pl.table, &d.labels, d.classes, seed, model)?;
    report.ari = adjusted_rand_index(&code_assignments(bundle, &d.features)?, &d.labels)?;
    let n = if frechet_samples == 0 {
        d.n()
    } else {
        frechet_samples
    };
    let (x, _) = generate_samples(
        bundle,
        n,
        CodeSpec::Uniform,
        seed.wrapping_add(SEED_OFFSET_FRECHET),
    )?;
    report.frechet_distance = Some(frechet_gaussian_distance(&d.features, &x)?);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct ModelRun {
    pub model: ModelKind,
    pub report: EvalReport,
    pub history: Option<TrainingHistory>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SeedResult {
    pub seed: u64,
    pub runs: Vec<ModelRun>,
    pub failures: Vec<Failure>,
    /// Dawid-Skene EM iterations, when it ran.
    pub ds_iterations: Option<usize>,
    pub ds_converged: bool,
}

/// Runs every selected model on one seed; a failing model is recorded and
/// the rest continue.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let data = seed_data(config, seed)?;
    let d = &data.dataset;
    let mut out = SeedResult {
        seed,
        ..Default::default()
    };
    for &model in &config.models {
        let start = Instant::now();
        let result: Result<(EvalReport, Option<TrainingHistory>)> = match model {
            ModelKind::Mv => evaluate_posteriors(
                &majority_vote(&data.votes),
                &d.labels,
                d.classes,
                seed,
                model.as_str(),
            )
            .map(|r| (r, None)),
            ModelKind::DawidSkene => {
                dawid_skene_fit(&data.votes, &config.label_model).and_then(|fit| {
                    out.ds_iterations = Some(fit.iterations);
                    out.ds_converged = fit.converged;
                    evaluate_posteriors(&fit.posteriors, &d.labels, d.classes, seed, model.as_str())
                        .map(|r| (r, None))
                })
            }
            ModelKind::InfoGan | ModelKind::WsganVector | ModelKind::WsganEncoder => {
                let mode = match model {
                    ModelKind::InfoGan => Mode::InfoGan,
                    ModelKind::WsganVector => Mode::Vector,
                    _ => Mode::Encoder,
                };
                let cfg = training_config(config, mode, seed);
                train(d, &data.votes, &cfg).and_then(|(bundle, history)| {
                    evaluate_bundle(&bundle, &data, config.frechet_samples, seed, model.as_str())
                        .map(|r| (r, Some(history)))
                })
            }
        };
        let seconds = start.elapsed().as_secs_f64();
        match result.and_then(|(r, h)| r.validate().map(|_| (r, h))) {
            Ok((report, history)) => {
                info!(
                    "seed {seed} {}: {report:?} in {seconds:.1}s",
                    model.as_str()
                );
                out.runs.push(ModelRun {
                    model,
                    report,
                    history,
                    seconds,
                });
            }
            Err(e) => {
                warn!("seed {seed} {} failed: {e}", model.as_str());
                out.failures.push(Failure {
                    seed,
                    task: model.as_str().to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metric_value(r: &EvalReport, m: Metric) -> Option<f64> {
    match m {
        Metric::Accuracy => Some(r.accuracy),
        Metric::WeightedF1 => Some(r.weighted_f1),
        Metric::WeightedMap => Some(r.weighted_map),
        Metric::Ari => Some(r.ari),
        Metric::CoveredFraction => Some(r.covered_fraction),
        Metric::Frechet => r.frechet_distance,
    }
}

fn row_cells(r: &EvalReport, metrics: &[Metric]) -> Vec<String> {
    let mut cells = vec![r.seed.to_string(), r.model.clone()];
    for m in Metric::ALL {
        cells.push(if metrics.contains(&m) {
            cell(metric_value(r, m))
        } else {
            String::new()
        });
    }
    cells
}

pub fn write_metrics_csv(rows: &[EvalReport], metrics: &[Metric], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record(row_cells(r, metrics))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub seeds: usize,
    pub accuracy: Option<SummaryStat>,
    pub weighted_f1: Option<SummaryStat>,
    pub weighted_map: Option<SummaryStat>,
    pub ari: Option<SummaryStat>,
    pub covered_fraction: Option<SummaryStat>,
    pub frechet_distance: Option<SummaryStat>,
}

pub fn mean_std(values: &[f64]) -> Option<SummaryStat> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(SummaryStat { mean, std })
}

/// Mean and standard deviation per model, in `models` order.
pub fn summarize(rows: &[EvalReport], models: &[ModelKind], metrics: &[Metric]) -> Vec<SummaryRow> {
    models
        .iter()
        .filter_map(|m| {
            let mine: Vec<&EvalReport> = rows.iter().filter(|r| r.model == m.as_str()).collect();
            if mine.is_empty() {
                return None;
            }
            let stat = |metric: Metric| {
                if !metrics.contains(&metric) {
                    return None;
                }
                let v: Vec<f64> = mine
                    .iter()
                    .filter_map(|r| metric_value(r, metric))
                    .collect();
                mean_std(&v)
            };
            Some(SummaryRow {
                model: m.as_str().to_string(),
                seeds: mine.len(),
                accuracy: stat(Metric::Accuracy),
                weighted_f1: stat(Metric::WeightedF1),
                weighted_map: stat(Metric::WeightedMap),
                ari: stat(Metric::Ari),
                covered_fraction: stat(Metric::CoveredFraction),
                frechet_distance: stat(Metric::Frechet),
            })
        })
        .collect()
}

pub fn write_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["model".to_string(), "seeds".to_string()];
    for name in &METRICS_HEADER[2..] {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    w.write_record(&header)?;
    for s in summary {
        let mut cells = vec![s.model.clone(), s.seeds.to_string()];
        for st in [
            &s.accuracy,
            &s.weighted_f1,
            &s.weighted_map,
            &s.ari,
            &s.covered_fraction,
            &s.frechet_distance,
        ] {
            cells.push(cell(st.as_ref().map(|x| x.mean)));
            cells.push(cell(st.as_ref().map(|x| x.std)));
        }
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BenchmarkOutcome {
    pub manifest: RunManifest,
    pub rows: Vec<EvalReport>,
    pub summary: Vec<SummaryRow>,
    pub seeds: Vec<SeedResult>,
    pub output_dir: PathBuf,
}

impl BenchmarkOutcome {
    pub fn mean(&self, model: ModelKind, metric: Metric) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.model == model.as_str())
            .filter_map(|r| metric_value(r, metric))
            .collect();
        mean_std(&v).map(|s| s.mean)
    }
}

/// Writes `seed_<s>/metrics.csv` and training histories per seed, then
/// `per_seed.csv`, `summary.csv` and `manifest.json`.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkOutcome> {
    config.validate()?;
    let out = config.resolved_output_dir();
    fs::create_dir_all(&out)?;
    let mut manifest = RunManifest::new(config)?;
    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    for &seed in &config.seeds {
        let start = Instant::now();
        let dir = out.join(format!("seed_{seed}"));
        fs::create_dir_all(&dir)?;
        let result = match run_seed(config, seed) {
            Ok(r) => r,
            Err(e) => {
                manifest.failures.push(Failure {
                    seed,
                    task: "data".into(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        let seed_rows: Vec<EvalReport> = result.runs.iter().map(|r| r.report.clone()).collect();
        let path = dir.join("metrics.csv");
        write_metrics_csv(&seed_rows, &config.metrics, &path)?;
        manifest.add_file(seed, path);
        for run in &result.runs {
            if let Some(h) = &run.history {
                let path = dir.join(format!("history_{}.csv", run.model.as_str()));
                save_history_csv(h, &path)?;
                manifest.add_file(seed, path);
            }
            manifest.wall_clock.push(Timing {
                label: format!("seed_{seed}/{}", run.model.as_str()),
                seconds: run.seconds,
            });
        }
        manifest.wall_clock.push(Timing {
            label: format!("seed_{seed}"),
            seconds: start.elapsed().as_secs_f64(),
        });
        manifest.failures.extend(result.failures.iter().cloned());
        rows.extend(seed_rows);
        seeds.push(result);
    }
    let per_seed = out.join("per_seed.csv");
    write_metrics_csv(&rows, &config.metrics, &per_seed)?;
    let summary = summarize(&rows, &config.models, &config.metrics);
    let summary_path = out.join("summary.csv");
    write_summary_csv(&summary, &summary_path)?;
    manifest.shared_files.push(per_seed);
    manifest.shared_files.push(summary_path);
    let manifest_path = out.join("manifest.json");
    manifest.shared_files.push(manifest_path.clone());
    manifest.save(&manifest_path)?;
    manifest.verify_files()?;
    Ok(BenchmarkOutcome {
        manifest,
        rows,
        summary,
        seeds,
        output_dir: out,
    })
}
