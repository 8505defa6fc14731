//! Experiment orchestration: synthetic data and LFs, benchmark runs,
//! augmentation studies and theory reports.

mod augmentation;
mod benchmark;
mod config;
mod dataset;
mod lfs;
mod manifest;
mod theory_suite;

pub use augmentation::{
    prototype_applicator, run_augmentation, write_augmentation_csv, AugmentationOutcome,
    AugmentationRow,
};
pub use benchmark::{
    evaluate_bundle, evaluate_posteriors, mean_std, run_benchmark, run_seed, seed_data, summarize,
    training_config, write_metrics_csv, write_summary_csv, BenchmarkOutcome, ModelRun, SeedData,
    SeedResult, SummaryRow, SummaryStat, METRICS_HEADER,
};
pub use config::{
    resolve_output, AugmentationConfig, ExperimentConfig, LfSource, Metric, ModelKind,
    OUTPUT_ROOT_ENV, SEED_OFFSET_AUGMENT, SEED_OFFSET_CLASSIFIER, SEED_OFFSET_FRECHET,
    SEED_OFFSET_LFS, SEED_OFFSET_TEST,
};
pub use dataset::{nearest_prototype, nearest_prototype_labels, synth_dataset, DatasetSpec};
pub use lfs::{random_lf_specs, LfSpecRanges, PrototypeApplicator, FEASIBILITY_MARGIN};
pub use manifest::{config_hash, Failure, RunManifest, SeedOutputs, Timing, TOOL_VERSION};
pub use theory_suite::run_theory_suite;
