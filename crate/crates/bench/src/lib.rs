//! Fixtures shared by the benchmarks.

use wsgan_core::harness::{random_lf_specs, synth_dataset, DatasetSpec, LfSpecRanges};
use wsgan_core::weaksup::{generate_synthetic_lfs, LabelMatrix};
use wsgan_core::Dataset;

/// Default-shaped dataset with `n` rows and its random LF votes.
pub fn fixture(n: usize, seed: u64) -> (Dataset, LabelMatrix) {
    let spec = DatasetSpec {
        n,
        seed,
        ..Default::default()
    };
    let d = synth_dataset(&spec).expect("valid spec");
    let specs = random_lf_specs(spec.classes, &LfSpecRanges::default(), seed + 100)
        .expect("feasible ranges");
    let l = generate_synthetic_lfs(&d.labels, spec.classes, &specs).expect("feasible specs");
    (d, l)
}
